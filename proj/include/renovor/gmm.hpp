#pragma once

// One-dimensional Gaussian mixtures fitted by EM from a k-means++ start.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

namespace renovor {

struct GmmComponent {
  double weight = 1.0;
  double mean = 0.0;
  double variance = 1.0;
};

struct GmmModel {
  std::vector<GmmComponent> components;

  std::size_t size() const { return components.size(); }

  double density(double x) const
  {
    double p = 0;
    for (const auto &c : components) {
      const double d = x - c.mean;
      p += c.weight * std::exp(-d * d / (2.0 * c.variance)) / std::sqrt(2.0 * std::numbers::pi * c.variance);
    }
    return p;
  }
};

struct GmmFitOptions {
  double tol = 1e-6;
  int max_iter = 200;
  double var_floor = 1e-6;
};

struct GmmFit {
  GmmModel model;
  std::vector<double> log_likelihood; // one entry per EM iteration, starting at the initial model
  int iterations = 0;
  bool converged = false;
};

inline constexpr double kNllClamp = 50.0;

namespace detail {

inline double component_log_density(const GmmComponent &c, double x)
{
  const double d = x - c.mean;
  return std::log(c.weight) - 0.5 * std::log(2.0 * std::numbers::pi * c.variance) - d * d / (2.0 * c.variance);
}

inline double neg_log_density(const GmmModel &model, double x)
{
  double best = -std::numeric_limits<double>::infinity();
  for (const auto &c : model.components)
    if (c.weight > 0) best = std::max(best, component_log_density(c, x));
  if (!std::isfinite(best)) return std::numeric_limits<double>::infinity();
  double s = 0;
  for (const auto &c : model.components)
    if (c.weight > 0) s += std::exp(component_log_density(c, x) - best);
  return -(best + std::log(s));
}

} // namespace detail

/// -log sum_k w_k N(x; mu_k, var_k), clamped to at most kNllClamp.
inline double gmm_neg_log_likelihood(const GmmModel &model, double x)
{
  return std::min(kNllClamp, detail::neg_log_density(model, x));
}

namespace detail {

inline std::vector<double> kmeanspp_centers(std::span<const double> x, std::size_t k, std::mt19937_64 &rng)
{
  std::vector<double> centers;
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  centers.push_back(x[pick(rng)]);
  std::vector<double> d2(x.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centers.size() < k) {
    double total = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (x[i] - c) * (x[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0) break;
    const double target = unit(rng) * total;
    double acc = 0;
    std::size_t chosen = x.size() - 1;
    for (std::size_t i = 0; i < x.size(); ++i) {
      acc += d2[i];
      if (acc >= target && d2[i] > 0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(x[chosen]);
  }
  std::sort(centers.begin(), centers.end());
  return centers;
}

inline double log_likelihood(const GmmModel &m, std::span<const double> x)
{
  double ll = 0;
  for (double v : x) ll -= neg_log_density(m, v);
  return ll;
}

} // namespace detail

/// EM fit of a K-component mixture. Log-likelihood is non-decreasing per
/// iteration; stops once the gain drops to `tol` or after `max_iter` steps.
inline GmmFit fit_gmm(std::span<const double> samples, std::size_t k, std::uint64_t seed,
                      const GmmFitOptions &opt = {})
{
  if (k == 0) throw std::invalid_argument("fit_gmm: K must be >= 1");
  {
    std::set<double> distinct(samples.begin(), samples.end());
    if (distinct.size() < k) throw std::invalid_argument("fit_gmm: fewer distinct samples than components");
  }
  const std::size_t n = samples.size();
  std::mt19937_64 rng(seed);
  std::vector<double> centers = detail::kmeanspp_centers(samples, k, rng);

  // Lloyd refinement of the seeding, then moments of the hard clusters.
  std::vector<std::size_t> assign(n, 0);
  for (int it = 0; it < 50; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < centers.size(); ++c)
        if (std::abs(samples[i] - centers[c]) < std::abs(samples[i] - centers[best])) best = c;
      changed |= best != assign[i];
      assign[i] = best;
    }
    std::vector<double> sum(centers.size(), 0);
    std::vector<std::size_t> cnt(centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[assign[i]] += samples[i];
      ++cnt[assign[i]];
    }
    for (std::size_t c = 0; c < centers.size(); ++c)
      if (cnt[c]) centers[c] = sum[c] / static_cast<double>(cnt[c]);
    if (!changed && it > 0) break;
  }

  GmmFit fit;
  fit.model.components.resize(centers.size());
  {
    std::vector<double> s(centers.size(), 0), s2(centers.size(), 0), cnt(centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      s[assign[i]] += samples[i];
      ++cnt[assign[i]];
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      auto &comp = fit.model.components[c];
      comp.mean = cnt[c] > 0 ? s[c] / cnt[c] : centers[c];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double d = samples[i] - fit.model.components[assign[i]].mean;
      s2[assign[i]] += d * d;
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      auto &comp = fit.model.components[c];
      comp.weight = std::max(cnt[c], 1.0) / static_cast<double>(n);
      comp.variance = std::max(opt.var_floor, cnt[c] > 0 ? s2[c] / cnt[c] : opt.var_floor);
    }
    double wsum = 0;
    for (const auto &c : fit.model.components) wsum += c.weight;
    for (auto &c : fit.model.components) c.weight /= wsum;
  }

  const std::size_t kk = fit.model.size();
  std::vector<double> resp(n * kk);
  double ll = detail::log_likelihood(fit.model, samples);
  fit.log_likelihood.push_back(ll);
  for (int it = 0; it < opt.max_iter; ++it) {
    // E step
    for (std::size_t i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < kk; ++c) {
        const auto &comp = fit.model.components[c];
        const double d = samples[i] - comp.mean;
        const double lg = std::log(comp.weight) - 0.5 * std::log(comp.variance) - d * d / (2.0 * comp.variance);
        resp[i * kk + c] = lg;
        best = std::max(best, lg);
      }
      double s = 0;
      for (std::size_t c = 0; c < kk; ++c) s += (resp[i * kk + c] = std::exp(resp[i * kk + c] - best));
      for (std::size_t c = 0; c < kk; ++c) resp[i * kk + c] /= s;
    }
    // M step
    GmmModel next = fit.model;
    for (std::size_t c = 0; c < kk; ++c) {
      double nk = 0, mu = 0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * kk + c];
        mu += resp[i * kk + c] * samples[i];
      }
      if (nk <= 0) continue;
      mu /= nk;
      double var = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = samples[i] - mu;
        var += resp[i * kk + c] * d * d;
      }
      next.components[c] = {nk / static_cast<double>(n), mu, std::max(opt.var_floor, var / nk)};
    }
    const double next_ll = detail::log_likelihood(next, samples);
    fit.iterations = it + 1;
    // Clamped tails can make a step look worse by rounding; keep the better model.
    if (next_ll < ll) {
      fit.converged = true;
      break;
    }
    fit.model = next;
    fit.log_likelihood.push_back(next_ll);
    const double gain = next_ll - ll;
    ll = next_ll;
    if (gain <= opt.tol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

} // namespace renovor
