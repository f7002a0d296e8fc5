#pragma once

// Tensor-cut: a binary MRF over voxels whose energy combines GMM intensity
// likelihoods, tensor likelihoods under the affine-invariant metric and
// Potts smoothness on both, minimised exactly by a single s-t min cut.

#include <algorithm>
#include <cmath>
#include <vector>

#include "renovor/gmm.hpp"
#include "renovor/maxflow.hpp"
#include "renovor/morphology.hpp"
#include "renovor/parallel.hpp"
#include "renovor/spd.hpp"
#include "renovor/vesselness.hpp"

namespace renovor {

enum class Label : std::uint8_t { Background = 0, Foreground = 1 };

struct MrfEnergyParams {
  double lambda_I = 1.0;
  double lambda_T = 1.0;
  double omega = 0.5;
  /// Boundary scales; values <= 0 select the self-tuned defaults (mean
  /// neighbour intensity difference, mean neighbour geodesic distance).
  double sigma_boundary_I = 0.0;
  double sigma_boundary_T = 0.0;
  int neighborhood = 6;

  void validate() const
  {
    if (lambda_I < 0 || lambda_T < 0 || omega < 0)
      throw std::invalid_argument("energy weights must be >= 0");
    if (neighborhood != 6 && neighborhood != 26) throw std::invalid_argument("neighborhood must be 6 or 26");
  }
};

struct SeedLabels {
  std::vector<std::size_t> foreground; // linear voxel indices
  std::vector<std::size_t> background;
};

inline constexpr double kHardSeedCapacity = 1e9;

/// Maps every Hessian of a field to its SPD tensor.
inline TensorField spd_field(const TensorField &hessian)
{
  TensorField out(hessian.geometry());
  parallel_for(0, hessian.size(), [&](std::size_t i) { out.set(i, hessian_to_spd(hessian.get(i))); });
  return out;
}

/// Isotropic Gaussian in geodesic distance to the class mean, constant
/// dropped: d^2(T, mean_label) / (2 dispersion^2).
inline double tensor_neg_log_likelihood(const Sym3 &foreground_mean, const Sym3 &background_mean,
                                        double dispersion, const Sym3 &t, Label label)
{
  if (!(dispersion > 0)) throw std::invalid_argument("tensor dispersion must be > 0");
  const double d = geodesic_distance(label == Label::Foreground ? foreground_mean : background_mean, t);
  return d * d / (2.0 * dispersion * dispersion);
}

/// Per-voxel factors of an SPD field. Throws NotSpdError before any
/// parallel work if a tensor is not SPD.
inline std::vector<SpdFactor> spd_factors(const TensorField &spd)
{
  for (std::size_t i = 0; i < spd.size(); ++i)
    if (!is_spd(spd.get(i))) throw NotSpdError("tensor field is not SPD-mapped");
  std::vector<SpdFactor> f(spd.size());
  parallel_for(0, spd.size(), [&](std::size_t i) { f[i] = spd_factor(spd.get(i)); });
  return f;
}

struct PairwiseArc {
  std::size_t m;
  std::size_t n;
  double capacity;
};

/// Forward half of the neighbourhood, so every unordered pair appears once.
inline std::vector<Index3> forward_offsets(int connectivity)
{
  std::vector<Index3> out;
  for (const auto &o : neighbor_offsets(connectivity)) {
    if (o.z > 0 || (o.z == 0 && o.y > 0) || (o.z == 0 && o.y == 0 && o.x > 0)) out.push_back(o);
  }
  return out;
}

/// Neighbour pairs in a fixed order: voxels in linear order, then offsets.
inline std::vector<std::pair<std::size_t, std::size_t>> neighbor_pairs(const VolumeGeometry &g, int connectivity)
{
  const auto offs = forward_offsets(connectivity);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(g.voxel_count() * offs.size());
  for (std::size_t i = 0; i < g.voxel_count(); ++i) {
    const Index3 p = g.index(i);
    for (const auto &o : offs) {
      const Index3 q = p + o;
      if (g.contains(q)) pairs.emplace_back(i, g.linear(q));
    }
  }
  return pairs;
}

inline double voxel_distance_mm(const VolumeGeometry &g, std::size_t m, std::size_t n)
{
  return std::sqrt(squared_distance_mm(g.index(m), g.index(n), g.spacing));
}

/// Smoothness term for one neighbour pair given the resolved scales.
inline double pairwise_capacity(double intensity_m, double intensity_n, double geodesic, double dist_mm,
                                const MrfEnergyParams &p)
{
  const double di = intensity_m - intensity_n;
  double w = p.lambda_I * std::exp(-di * di / (2.0 * p.sigma_boundary_I * p.sigma_boundary_I)) / dist_mm;
  if (p.omega > 0 && p.lambda_T > 0)
    w += p.omega * p.lambda_T * std::exp(-geodesic * geodesic / (2.0 * p.sigma_boundary_T * p.sigma_boundary_T)) /
         dist_mm;
  return w;
}

struct PairwiseTable {
  std::vector<PairwiseArc> arcs;
  MrfEnergyParams resolved; // params with the self-tuned scales filled in
};

/// n-link capacities for every neighbour pair. `spd` may be empty when the
/// tensor term is switched off (omega == 0 or lambda_T == 0).
inline PairwiseTable pairwise_weights(const ScalarVolume &vol, const TensorField &spd, const MrfEnergyParams &params)
{
  params.validate();
  const auto &g = vol.geometry();
  const bool use_tensor = params.omega > 0 && params.lambda_T > 0;
  if (use_tensor) require_same_geometry(g, spd.geometry(), "pairwise_weights");

  const auto pairs = neighbor_pairs(g, params.neighborhood);
  std::vector<double> geo(pairs.size(), 0.0);
  if (use_tensor) {
    const auto factors = spd_factors(spd);
    parallel_for(0, pairs.size(), [&](std::size_t k) {
      geo[k] = geodesic_distance(factors[pairs[k].first], factors[pairs[k].second]);
    });
  }

  PairwiseTable table;
  table.resolved = params;
  if (!(table.resolved.sigma_boundary_I > 0)) {
    double acc = 0;
    for (const auto &[m, n] : pairs) acc += std::abs(static_cast<double>(vol[m]) - vol[n]);
    const double mean = pairs.empty() ? 0.0 : acc / static_cast<double>(pairs.size());
    table.resolved.sigma_boundary_I = mean > 0 ? mean : 1.0;
  }
  if (!(table.resolved.sigma_boundary_T > 0)) {
    double acc = 0;
    for (double d : geo) acc += d;
    const double mean = geo.empty() ? 0.0 : acc / static_cast<double>(geo.size());
    table.resolved.sigma_boundary_T = mean > 0 ? mean : 1.0;
  }

  table.arcs.resize(pairs.size());
  parallel_for(0, pairs.size(), [&](std::size_t k) {
    const auto [m, n] = pairs[k];
    table.arcs[k] = {m, n, pairwise_capacity(vol[m], vol[n], geo[k], voxel_distance_mm(g, m, n), table.resolved)};
  });
  return table;
}

/// Per-voxel data costs of each label.
struct UnaryTerms {
  std::vector<double> foreground;
  std::vector<double> background;
};

inline double mrf_energy(const std::vector<std::uint8_t> &labels, const UnaryTerms &unary,
                         const std::vector<PairwiseArc> &arcs)
{
  double e = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) e += labels[i] ? unary.foreground[i] : unary.background[i];
  for (const auto &a : arcs)
    if (labels[a.m] != labels[a.n]) e += a.capacity;
  return e;
}

struct SeedPolicy {
  double foreground_vesselness_percentile = 99.5;
  double background_intensity_percentile = 50.0;
  /// Background seeds keep at least this distance from foreground seeds.
  double exclusion_mm = 3.0;
};

inline double percentile(std::vector<double> values, double pct)
{
  if (values.empty()) throw DataError("percentile of an empty set");
  pct = std::clamp(pct, 0.0, 100.0);
  const auto k = static_cast<std::size_t>(std::floor(pct / 100.0 * static_cast<double>(values.size() - 1)));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

/// Foreground: strongest vesselness responses. Background: darker half of
/// the intensities away from the foreground seeds.
inline SeedLabels make_seeds(const ScalarVolume &vol, const ScalarVolume &vesselness, const SeedPolicy &policy = {})
{
  require_same_geometry(vol.geometry(), vesselness.geometry(), "make_seeds");
  const double v_thr = percentile(std::vector<double>(vesselness.data().begin(), vesselness.data().end()),
                                  policy.foreground_vesselness_percentile);
  const double i_thr = percentile(std::vector<double>(vol.data().begin(), vol.data().end()),
                                  policy.background_intensity_percentile);
  SeedLabels seeds;
  LabelVolume fg(vol.geometry());
  for (std::size_t i = 0; i < vol.size(); ++i)
    if (vesselness[i] > 0 && vesselness[i] >= v_thr) {
      seeds.foreground.push_back(i);
      fg[i] = 1;
    }
  const LabelVolume exclusion = dilate_ball(fg, policy.exclusion_mm);
  for (std::size_t i = 0; i < vol.size(); ++i)
    if (exclusion[i] == 0 && vol[i] < i_thr) seeds.background.push_back(i);
  return seeds;
}

struct TensorCutOptions {
  std::size_t foreground_components = 2;
  std::size_t background_components = 3;
  std::uint64_t seed = 0;
  GmmFitOptions gmm{1e-6, 200, 1.0};
  std::size_t max_gmm_samples = 20000;
  std::size_t max_mean_tensors = 256;
  /// Background mixture training set, see background_sample; < 0 trains on
  /// the hard background seeds only.
  double background_exclusion_mm = 3.0;
};

struct TensorCutModel {
  GmmModel foreground_gmm;
  GmmModel background_gmm;
  Sym3 foreground_mean = Sym3::identity();
  Sym3 background_mean = Sym3::identity();
  double dispersion = 1.0; // foreground
  double background_dispersion = 1.0;
};

struct TensorCutResult {
  LabelVolume labels;
  double energy = 0;
  double flow = 0;
  TensorCutModel model;
  MrfEnergyParams resolved;
  UnaryTerms unary;
  std::vector<PairwiseArc> arcs;
};

namespace detail {

template <typename T>
std::vector<T> strided_subsample(const std::vector<T> &v, std::size_t max_count)
{
  if (v.size() <= max_count) return v;
  std::vector<T> out;
  out.reserve(max_count);
  for (std::size_t k = 0; k < max_count; ++k) out.push_back(v[k * v.size() / max_count]);
  return out;
}

inline GmmModel fit_class_gmm(const ScalarVolume &vol, const std::vector<std::size_t> &idx, std::size_t k,
                              const TensorCutOptions &opt)
{
  std::vector<double> samples;
  for (std::size_t i : strided_subsample(idx, opt.max_gmm_samples)) samples.push_back(vol[i]);
  std::vector<double> distinct = samples;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  return fit_gmm(samples, std::min(k, distinct.size()), opt.seed, opt.gmm).model;
}

} // namespace detail

/// Voxels that train the background mixture: everything outside the
/// foreground seeds dilated by opt.background_exclusion_mm. The hard
/// background seeds alone are the darkest voxels and miss bright
/// non-vessel tissue such as kidney parenchyma.
inline std::vector<std::size_t> background_sample(const VolumeGeometry &g, const SeedLabels &seeds,
                                                  const TensorCutOptions &opt)
{
  if (opt.background_exclusion_mm < 0) return seeds.background;
  LabelVolume fg(g);
  for (std::size_t i : seeds.foreground) fg[i] = 1;
  const LabelVolume zone = dilate_ball(fg, opt.background_exclusion_mm);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < zone.size(); ++i)
    if (!zone[i]) out.push_back(i);
  return out.empty() ? seeds.background : out;
}

/// Fits the per-class intensity mixtures and tensor statistics from seeds.
inline TensorCutModel fit_tensor_cut_model(const ScalarVolume &vol, const TensorField &spd, const SeedLabels &seeds,
                                           bool with_tensors, const TensorCutOptions &opt = {})
{
  TensorCutModel m;
  m.foreground_gmm = detail::fit_class_gmm(vol, seeds.foreground, opt.foreground_components, opt);
  m.background_gmm = detail::fit_class_gmm(vol, background_sample(vol.geometry(), seeds, opt), opt.background_components, opt);
  if (!with_tensors) return m;

  const auto class_mean = [&](const std::vector<std::size_t> &idx, std::vector<Sym3> &ts) {
    for (std::size_t i : detail::strided_subsample(idx, opt.max_mean_tensors)) ts.push_back(spd.get(i));
    return frechet_mean(ts).mean;
  };
  std::vector<Sym3> fg_t, bg_t;
  m.foreground_mean = class_mean(seeds.foreground, fg_t);
  m.background_mean = class_mean(seeds.background, bg_t);
  const auto spread = [](const Sym3 &mean, const std::vector<Sym3> &ts) {
    const SpdFactor f = spd_factor(mean);
    double acc = 0;
    for (const auto &t : ts) acc += geodesic_distance(f, spd_factor(t));
    return std::max(acc / static_cast<double>(ts.size()), 1e-6);
  };
  m.dispersion = spread(m.foreground_mean, fg_t);
  m.background_dispersion = spread(m.background_mean, bg_t);
  return m;
}

inline UnaryTerms unary_terms(const ScalarVolume &vol, const TensorField &spd, const TensorCutModel &model,
                              const MrfEnergyParams &params)
{
  const bool use_tensor = params.omega > 0;
  UnaryTerms u{std::vector<double>(vol.size()), std::vector<double>(vol.size())};
  const SpdFactor fg_m = use_tensor ? spd_factor(model.foreground_mean) : SpdFactor{};
  const SpdFactor bg_m = use_tensor ? spd_factor(model.background_mean) : SpdFactor{};
  const std::vector<SpdFactor> factors = use_tensor ? spd_factors(spd) : std::vector<SpdFactor>{};
  const double inv_f = 1.0 / (2.0 * model.dispersion * model.dispersion);
  const double inv_b = 1.0 / (2.0 * model.background_dispersion * model.background_dispersion);
  parallel_for(0, vol.size(), [&](std::size_t i) {
    double f = gmm_neg_log_likelihood(model.foreground_gmm, vol[i]);
    double b = gmm_neg_log_likelihood(model.background_gmm, vol[i]);
    if (use_tensor) {
      const double df = geodesic_distance(fg_m, factors[i]);
      const double db = geodesic_distance(bg_m, factors[i]);
      f += params.omega * df * df * inv_f;
      b += params.omega * db * db * inv_b;
    }
    u.foreground[i] = f;
    u.background[i] = b;
  });
  return u;
}

/// Exact minimiser of the binary energy with hard seed constraints.
/// Labels are 1 for the source (foreground) side.
inline std::vector<std::uint8_t> minimize_binary_energy(const UnaryTerms &unary, const std::vector<PairwiseArc> &arcs,
                                                        const SeedLabels &seeds, double *flow_out = nullptr)
{
  const std::size_t n = unary.foreground.size();
  MaxFlowGraph graph(n, arcs.size());
  std::vector<std::uint8_t> seed_state(n, 0);
  for (std::size_t i : seeds.foreground) seed_state[i] = 1;
  for (std::size_t i : seeds.background) {
    if (seed_state[i] == 1) throw DataError("a voxel is seeded as both foreground and background");
    seed_state[i] = 2;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double hard_s = seed_state[i] == 1 ? kHardSeedCapacity : 0.0;
    const double hard_t = seed_state[i] == 2 ? kHardSeedCapacity : 0.0;
    graph.add_tweights(i, unary.background[i] + hard_s, unary.foreground[i] + hard_t);
  }
  for (const auto &a : arcs) graph.add_edge(a.m, a.n, a.capacity, a.capacity);
  const double flow = graph.maxflow();
  if (flow_out) *flow_out = flow;
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = graph.in_source_segment(i) ? 1 : 0;
  return labels;
}

/// Segments a VOI. `spd` holds the SPD-mapped tensor field (see spd_field);
/// it may be empty when params.omega == 0.
inline TensorCutResult tensor_cut_segment(const ScalarVolume &vol, const TensorField &spd, const SeedLabels &seeds,
                                          const MrfEnergyParams &params, const TensorCutOptions &opt = {})
{
  params.validate();
  if (seeds.foreground.empty() || seeds.background.empty())
    throw DataError("tensor_cut_segment: both seed sets must be non-empty");
  for (std::size_t i : seeds.foreground)
    if (i >= vol.size()) throw DataError("seed index outside the volume");
  for (std::size_t i : seeds.background)
    if (i >= vol.size()) throw DataError("seed index outside the volume");
  const bool use_tensor = params.omega > 0;
  if (use_tensor) require_same_geometry(vol.geometry(), spd.geometry(), "tensor_cut_segment");

  TensorCutResult r;
  r.model = fit_tensor_cut_model(vol, spd, seeds, use_tensor, opt);
  auto table = pairwise_weights(vol, spd, params);
  r.resolved = table.resolved;
  r.arcs = std::move(table.arcs);
  r.unary = unary_terms(vol, spd, r.model, params);
  const auto labels = minimize_binary_energy(r.unary, r.arcs, seeds, &r.flow);
  r.energy = mrf_energy(labels, r.unary, r.arcs);
  r.labels = LabelVolume(vol.geometry(), std::vector<std::uint16_t>(labels.begin(), labels.end()));
  return r;
}

} // namespace renovor
