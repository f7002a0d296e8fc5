#pragma once

// Affine-invariant Riemannian geometry on 3x3 symmetric positive-definite
// tensors: matrix log/exp, geodesic distance and the Frechet (Karcher) mean.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "renovor/sym3.hpp"

namespace renovor {

inline constexpr double kSpdFloor = 1e-8;

class NotSpdError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

inline Eigen3 spd_eigen(const Sym3 &t)
{
  const auto e = eigen_symmetric3(t);
  if (!(e.values[2] > 0.0) || !std::isfinite(e.values[0]))
    throw NotSpdError("tensor is not symmetric positive-definite");
  return e;
}

inline bool is_spd(const Sym3 &t, double floor = 0.0)
{
  const auto e = eigen_symmetric3(t);
  return e.values[2] > floor && std::isfinite(e.values[0]);
}

/// Negates the eigenvalues and floors them at kSpdFloor, so bright tubes
/// (strongly negative curvature across the axis) become dominant directions.
inline Sym3 hessian_to_spd(const Sym3 &hessian)
{
  return apply_eigen_function(eigen_symmetric3(hessian),
                              [](double l) { return std::max(-l, kSpdFloor); });
}

inline Sym3 spd_log(const Sym3 &t)
{
  return apply_eigen_function(spd_eigen(t), [](double l) { return std::log(l); });
}

inline Sym3 spd_exp(const Sym3 &s)
{
  return apply_eigen_function(eigen_symmetric3(s), [](double l) { return std::exp(l); });
}

inline Sym3 spd_sqrt(const Sym3 &t)
{
  return apply_eigen_function(spd_eigen(t), [](double l) { return std::sqrt(l); });
}

inline Sym3 spd_inv_sqrt(const Sym3 &t)
{
  return apply_eigen_function(spd_eigen(t), [](double l) { return 1.0 / std::sqrt(l); });
}

/// Geodesic distance given a precomputed a^{-1/2}; lets callers reuse the
/// square root across many distances from the same tensor.
inline double geodesic_distance_from(const Sym3 &a_inv_sqrt, const Sym3 &b)
{
  const Mat3 w = a_inv_sqrt.matrix();
  const auto e = eigen_symmetric3(congruence(w, b));
  double acc = 0;
  for (double l : e.values) {
    if (!(l > 0.0)) throw NotSpdError("tensor is not symmetric positive-definite");
    const double lg = std::log(l);
    acc += lg * lg;
  }
  return std::sqrt(acc);
}

/// d(a, b) = || log(a^{-1/2} b a^{-1/2}) ||_F.
inline double geodesic_distance(const Sym3 &a, const Sym3 &b)
{
  spd_eigen(b);
  return geodesic_distance_from(spd_inv_sqrt(a), b);
}

/// One tensor prepared for many distance evaluations.
struct SpdFactor {
  Sym3 tensor;
  Sym3 inv_sqrt;
  double min_eig = 1;
  double max_eig = 1;
};

inline SpdFactor spd_factor(const Sym3 &t)
{
  const auto e = spd_eigen(t);
  return {t, apply_eigen_function(e, [](double l) { return 1.0 / std::sqrt(l); }), e.values[2], e.values[0]};
}

/// Geodesic distance with each generalized eigenvalue clamped to its exact
/// bounds [min_b / max_a, max_b / min_a]. Tensors whose eigenvalues span
/// many decades lose the small ones to rounding otherwise.
inline double geodesic_distance(const SpdFactor &a, const SpdFactor &b)
{
  const auto e = eigen_symmetric3(congruence(a.inv_sqrt.matrix(), b.tensor));
  const double lo = b.min_eig / a.max_eig, hi = b.max_eig / a.min_eig;
  double acc = 0;
  for (double l : e.values) {
    const double lg = std::log(std::clamp(l, lo, hi));
    acc += lg * lg;
  }
  return std::sqrt(acc);
}

struct FrechetMeanResult {
  Sym3 mean;
  int iterations = 0;
  bool converged = false;
  double residual = 0; // Frobenius norm of the mean tangent vector at `mean`
};

/// Fixed-point iteration M <- M^{1/2} exp(mean_i log(M^{-1/2} T_i M^{-1/2})) M^{1/2}
/// started at the arithmetic mean.
inline FrechetMeanResult frechet_mean(std::span<const Sym3> tensors, double tol = 1e-10, int max_iter = 100)
{
  if (tensors.empty()) throw std::invalid_argument("frechet_mean: empty tensor list");
  Sym3 m{};
  for (const auto &t : tensors) {
    spd_eigen(t);
    m = m + t;
  }
  m = (1.0 / static_cast<double>(tensors.size())) * m;

  FrechetMeanResult r;
  const double inv_n = 1.0 / static_cast<double>(tensors.size());
  for (int it = 0; it <= max_iter; ++it) {
    const auto e = spd_eigen(m);
    const Sym3 root = apply_eigen_function(e, [](double l) { return std::sqrt(l); });
    const Mat3 inv_root = apply_eigen_function(e, [](double l) { return 1.0 / std::sqrt(l); }).matrix();
    Sym3 tangent{};
    for (const auto &t : tensors) tangent = tangent + spd_log(congruence(inv_root, t));
    tangent = inv_n * tangent;
    r.residual = tangent.frobenius_norm();
    r.iterations = it;
    if (r.residual <= tol) {
      r.converged = true;
      break;
    }
    if (it == max_iter) break;
    m = congruence(root.matrix(), spd_exp(tangent));
  }
  r.mean = m;
  return r;
}

} // namespace renovor
