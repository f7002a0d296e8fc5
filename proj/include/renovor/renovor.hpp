#pragma once

#include "renovor/fcnmath.hpp"
#include "renovor/gmm.hpp"
#include "renovor/io.hpp"
#include "renovor/kdtree.hpp"
#include "renovor/maxflow.hpp"
#include "renovor/metaimage.hpp"
#include "renovor/metrics.hpp"
#include "renovor/morphology.hpp"
#include "renovor/parallel.hpp"
#include "renovor/phantom.hpp"
#include "renovor/pipeline.hpp"
#include "renovor/skeleton.hpp"
#include "renovor/spd.hpp"
#include "renovor/sym3.hpp"
#include "renovor/tensorcut.hpp"
#include "renovor/vesselness.hpp"
#include "renovor/vesseltree.hpp"
#include "renovor/volume.hpp"
#include "renovor/voronoi.hpp"
