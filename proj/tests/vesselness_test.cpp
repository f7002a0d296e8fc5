#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "renovor/phantom.hpp"
#include "renovor/vesselness.hpp"
#include "test_util.hpp"

using namespace renovor;

namespace {

Eigen::Matrix3d to_eigen(const Sym3 &s)
{
  Eigen::Matrix3d m;
  m << s.xx, s.xy, s.xz, s.xy, s.yy, s.yz, s.xz, s.yz, s.zz;
  return m;
}

Sym3 random_sym(std::mt19937_64 &rng, double scale = 1.0)
{
  std::normal_distribution<double> n(0.0, scale);
  return {n(rng), n(rng), n(rng), n(rng), n(rng), n(rng)};
}

ScalarVolume analytic(const VolumeGeometry &g, auto fn)
{
  ScalarVolume v(g);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec3 w = g.to_world(g.index(i));
    v[i] = static_cast<float>(fn(w[0], w[1], w[2]));
  }
  return v;
}

/// 90 degree turn about z on a cube grid: (x, y, z) -> (n-1-y, x, z).
template <typename T>
Volume<T> rotate_z(const Volume<T> &v)
{
  const long n = v.dims()[0];
  Volume<T> out(v.geometry());
  for (long z = 0; z < n; ++z)
    for (long y = 0; y < n; ++y)
      for (long x = 0; x < n; ++x) out.at(n - 1 - y, x, z) = v.at(x, y, z);
  return out;
}

} // namespace

TEST(Hessian, QuadraticInX)
{
  const VolumeGeometry g{{7, 6, 5}, {0.5, 1.0, 2.0}, {-1, 0, 0}};
  const auto h = hessian_field(analytic(g, [](double x, double, double) { return x * x; }), 0.0);
  for (long z = 1; z < 4; ++z)
    for (long y = 1; y < 5; ++y)
      for (long x = 1; x < 6; ++x) {
        const Sym3 s = h.get(g.linear({x, y, z}));
        EXPECT_NEAR(s.xx, 2.0, 1e-9);
        for (double c : {s.xy, s.xz, s.yy, s.yz, s.zz}) EXPECT_NEAR(c, 0.0, 1e-9);
      }
}

TEST(Hessian, MixedTerm)
{
  const VolumeGeometry g{{6, 6, 6}, {0.5, 2.0, 1.0}, {0, 0, 0}};
  const auto h = hessian_field(analytic(g, [](double x, double y, double) { return x * y; }), 0.0);
  const Sym3 s = h.get(g.linear({3, 3, 3}));
  EXPECT_NEAR(s.xy, 1.0, 1e-6);
  EXPECT_NEAR(s.xx, 0.0, 1e-6);
  EXPECT_NEAR(s.yz, 0.0, 1e-6);
}

TEST(Hessian, TooSmallVolumeRejected)
{
  EXPECT_THROW(hessian_field(ScalarVolume(VolumeGeometry{{2, 5, 5}, {1, 1, 1}, {0, 0, 0}}), 1.0),
               std::invalid_argument);
}

// Oracle: dense (non-separable) convolution with the sampled Gaussian, then
// the same central differences.
TEST(Hessian, MatchesDenseConvolution)
{
  const VolumeGeometry g = test::cube(13);
  const ScalarVolume blob = analytic(g, [](double x, double y, double z) {
    return 100.0 * std::exp(-((x - 6) * (x - 6) + 1.5 * (y - 5.5) * (y - 5.5) + (z - 7) * (z - 7)) / 8.0);
  });
  const double sigma = 1.0;
  const auto k = gaussian_kernel(sigma, 1.0);
  const long r = static_cast<long>(k.size() / 2);
  std::vector<double> dense(blob.size());
  for (std::size_t i = 0; i < blob.size(); ++i) {
    const Index3 p = g.index(i);
    double acc = 0;
    for (long c = -r; c <= r; ++c)
      for (long b = -r; b <= r; ++b)
        for (long a = -r; a <= r; ++a)
          acc += k[a + r] * k[b + r] * k[c + r] * blob.clamped(p.x + a, p.y + b, p.z + c);
    dense[i] = acc;
  }
  const auto at = [&](long x, long y, long z) { return dense[g.linear({x, y, z})]; };
  const auto h = hessian_field(blob, sigma);
  double worst = 0, scale = 0;
  for (long z = 2; z < 11; ++z)
    for (long y = 2; y < 11; ++y)
      for (long x = 2; x < 11; ++x) {
        const Sym3 s = h.get(g.linear({x, y, z}));
        const double xx = at(x + 1, y, z) - 2 * at(x, y, z) + at(x - 1, y, z);
        const double yz = (at(x, y + 1, z + 1) - at(x, y + 1, z - 1) - at(x, y - 1, z + 1) + at(x, y - 1, z - 1)) / 4;
        worst = std::max({worst, std::abs(s.xx - xx), std::abs(s.yz - yz)});
        scale = std::max({scale, std::abs(xx), std::abs(yz)});
      }
  EXPECT_LE(worst, 1e-3 * scale);
}

// Against the analytic Hessian of the smoothed Gaussian the error is the
// stencil truncation h^2 / (4 t^2), 1.25% at the centre here.
TEST(Hessian, CloseToAnalyticGaussian)
{
  const VolumeGeometry g = test::cube(41);
  const double s2 = 16.0, sigma = 2.0, t2 = s2 + sigma * sigma;
  const ScalarVolume blob = analytic(g, [&](double x, double y, double z) {
    return 1000.0 * std::exp(-((x - 20) * (x - 20) + (y - 20) * (y - 20) + (z - 20) * (z - 20)) / (2 * s2));
  });
  const auto h = hessian_field(blob, sigma);
  const double amp = 1000.0 * std::pow(s2 / t2, 1.5);
  for (long x : {20L, 22L, 25L}) {
    const double dx = x - 20.0;
    const double f = amp * std::exp(-dx * dx / (2 * t2));
    const double want_xx = f * (dx * dx / (t2 * t2) - 1.0 / t2);
    const double want_yy = -f / t2;
    const Sym3 got = h.get(g.linear({x, 20, 20}));
    EXPECT_NEAR(got.xx, want_xx, 1.5e-2 * amp / t2);
    EXPECT_NEAR(got.yy, want_yy, 1.5e-2 * amp / t2);
  }
}

TEST(Eigen3x3, Diagonal)
{
  const auto e = eigen_symmetric3(Sym3::diagonal(3, 1, 2));
  EXPECT_DOUBLE_EQ(e.values[0], 3);
  EXPECT_DOUBLE_EQ(e.values[1], 2);
  EXPECT_DOUBLE_EQ(e.values[2], 1);
  const auto i = eigen_symmetric3(Sym3::identity());
  for (double v : i.values) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Eigen3x3, MatchesEigenAndReconstructs)
{
  std::mt19937_64 rng(11);
  for (int t = 0; t < 500; ++t) {
    const Sym3 s = random_sym(rng, t % 2 ? 1.0 : 1e3);
    const auto e = eigen_symmetric3(s);
    const Eigen::Matrix3d a = to_eigen(s);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> oracle(a);
    const double norm = std::max(1.0, a.norm());
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(e.values[k], oracle.eigenvalues()[2 - k], 1e-9 * norm);
    EXPECT_GE(e.values[0], e.values[1]);
    EXPECT_GE(e.values[1], e.values[2]);
    Eigen::Matrix3d v;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) v(r, c) = e.vectors[r][c];
    EXPECT_LE((v.transpose() * v - Eigen::Matrix3d::Identity()).norm(), 1e-6);
    for (int k = 0; k < 3; ++k) EXPECT_LE((a * v.col(k) - e.values[k] * v.col(k)).norm(), 1e-6 * norm);
    const Eigen::Matrix3d rec = v * Eigen::Vector3d(e.values[0], e.values[1], e.values[2]).asDiagonal() * v.transpose();
    EXPECT_LE((rec - a).norm(), 1e-6 * norm);
  }
}

TEST(Eigen3x3, InvariantUnderSignedAxisPermutations)
{
  std::mt19937_64 rng(12);
  const Sym3 s = random_sym(rng, 5.0);
  const auto base = eigen_symmetric3(s);
  std::array<int, 3> perm{0, 1, 2};
  int count = 0;
  do {
    for (int signs = 0; signs < 8; ++signs) {
      Mat3 p{};
      for (int r = 0; r < 3; ++r) p[r][perm[r]] = (signs >> r) & 1 ? -1.0 : 1.0;
      const auto e = eigen_symmetric3(congruence(p, s));
      for (int k = 0; k < 3; ++k) EXPECT_NEAR(e.values[k], base.values[k], 1e-6);
      ++count;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(count, 48);
}

TEST(Sato, WorkedExample)
{
  EXPECT_NEAR(sato_response({-0.1, -9, -10}, 1, 1), 8.9, 1e-12);
  EXPECT_EQ(sato_response({1, -10, -10}, 1, 1), 0.0);
}

TEST(Sato, IdealCylinderResponds)
{
  EXPECT_DOUBLE_EQ(sato_response({0, -4, -4}, 1, 1), 4.0);
}

TEST(Sato, NonNegativeAndZeroForPositiveL1)
{
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0, 10);
  for (int t = 0; t < 10000; ++t) {
    std::array<double, 3> l{n(rng), n(rng), n(rng)};
    std::sort(l.rbegin(), l.rend());
    const double r = sato_response(l, 1, 1);
    EXPECT_GE(r, 0.0);
    if (l[0] > 0) {
      EXPECT_EQ(r, 0.0);
    }
  }
}

TEST(Vesselness, TubeAxisIsMaximal)
{
  const VolumeGeometry g = test::cube(32);
  const ScalarVolume tube = tube_phantom(g, {16, 16, -5}, {16, 16, 40}, 1.5, 100.0, 0.0);
  const auto v = multiscale_vesselness(tube, VesselnessParams{});
  double bg = 0;
  for (std::size_t i = 0; i < v.response.size(); ++i) bg += v.response[i];
  bg /= static_cast<double>(v.response.size());
  for (long z = 6; z < 26; ++z) {
    float best = -1;
    Index3 arg;
    for (long y = 0; y < 32; ++y)
      for (long x = 0; x < 32; ++x)
        if (v.response.at(x, y, z) > best) {
          best = v.response.at(x, y, z);
          arg = {x, y, z};
        }
    EXPECT_LE(std::abs(arg.x - 16), 1);
    EXPECT_LE(std::abs(arg.y - 16), 1);
    EXPECT_GE(v.response.at(16, 16, z), 5.0 * bg);
  }
}

TEST(Vesselness, RotationPermutesResponse)
{
  std::mt19937_64 rng(14);
  const VolumeGeometry g = test::cube(20);
  ScalarVolume vol = tube_phantom(g, {3, 5, 2}, {16, 12, 17}, 2.0, 80.0, 0.0);
  std::normal_distribution<float> n(0, 5);
  for (auto &x : vol.data()) x += n(rng);
  const auto a = multiscale_vesselness(rotate_z(vol), VesselnessParams{});
  const ScalarVolume b = rotate_z(multiscale_vesselness(vol, VesselnessParams{}).response);
  float peak = 0;
  for (float x : b.data()) peak = std::max(peak, x);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(a.response[i], b[i], 1e-4 * peak);
}

TEST(Vesselness, NonNegativeEverywhere)
{
  std::mt19937_64 rng(15);
  ScalarVolume vol(test::cube(16));
  std::normal_distribution<float> n(0, 50);
  for (auto &x : vol.data()) x = n(rng);
  const auto v = multiscale_vesselness(vol, VesselnessParams{});
  for (float x : v.response.data()) EXPECT_GE(x, 0.0f);
}

TEST(Vesselness, ThreadCountDoesNotChangeOutput)
{
  const ScalarVolume vol = tube_phantom(test::cube(24), {2, 3, 4}, {20, 18, 21}, 1.5, 100.0, 0.0);
  const int saved = thread_count();
  set_thread_count(1);
  const auto a = multiscale_vesselness(vol, VesselnessParams{});
  set_thread_count(4);
  const auto b = multiscale_vesselness(vol, VesselnessParams{});
  set_thread_count(saved);
  EXPECT_EQ(a.response, b.response);
  EXPECT_EQ(a.hessian.data(), b.hessian.data());
}

TEST(Vesselness, RejectsBadParams)
{
  VesselnessParams p;
  p.scales_mm = {};
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.scales_mm = {1.0, -1.0};
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.scales_mm = {1.0};
  p.gamma12 = -1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Smoothing, PreservesMean)
{
  const VolumeGeometry g = test::cube(40);
  const ScalarVolume blob = analytic(g, [](double x, double y, double z) {
    return 500.0 * std::exp(-((x - 19.5) * (x - 19.5) + (y - 20) * (y - 20) + (z - 19) * (z - 19)) / 18.0);
  });
  for (double sigma : {0.5, 1.0, 2.0}) {
    const ScalarVolume s = gaussian_smooth(blob, sigma);
    double a = 0, b = 0;
    for (std::size_t i = 0; i < blob.size(); ++i) {
      a += blob[i];
      b += s[i];
    }
    EXPECT_NEAR(b, a, 1e-6 * a);
  }
}
