#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "adfs/adfs.hpp"

namespace testing {

using adfs::AugmentedGraph;
using adfs::ComponentFunction;
using adfs::ProblemInstance;
using adfs::Vector;

inline AugmentedGraph augment(const adfs::CommGraph& base, const ProblemInstance& p) {
  return AugmentedGraph(base, p.sigmas(), p.leaf_smoothness());
}

inline adfs::CommGraph triangle() {
  return adfs::CommGraph(3, {{0, 1}, {1, 2}, {0, 2}});
}

/// Logistic instance whose components all satisfy L_j >= sigma.
inline ProblemInstance scaled_logistic(std::size_t n, std::size_t m, Eigen::Index d, double sigma,
                                       std::uint64_t seed, double scale = 2.0) {
  ProblemInstance p = adfs::generate_synthetic(n, m, d, sigma, seed);
  for (auto& node : p.nodes)
    for (auto& f : node.components) {
      Vector x = f.data();
      const double need = std::sqrt(4.0 * sigma) * scale;
      if (x.norm() < need) x *= need / std::max(x.norm(), 1e-3);
      f = ComponentFunction::logistic(x, f.label());
    }
  return p;
}

inline ProblemInstance random_quadratic_instance(std::size_t n, std::size_t m, Eigen::Index d, double sigma,
                                                 std::uint64_t seed) {
  adfs::Rng rng(seed);
  ProblemInstance p;
  p.dim = d;
  p.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    adfs::NodeObjective node;
    node.sigma = sigma;
    for (std::size_t j = 0; j < m; ++j) {
      Vector c(d);
      for (Eigen::Index k = 0; k < d; ++k) c[k] = rng.normal();
      node.components.push_back(ComponentFunction::quadratic(1.0 + 2.0 * rng.uniform(), c));
    }
    p.nodes.push_back(std::move(node));
  }
  return p;
}

/// Bisection for the root of a nondecreasing function on [lo, hi].
inline double bisect(const std::function<double(double)>& g, double lo, double hi, int iters = 200) {
  for (int k = 0; k < iters; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

inline double logistic_loss(double y, double s) {
  const double t = -y * s;
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double logistic_dloss(double y, double s) { return -y / (1.0 + std::exp(y * s)); }

/// argmax_s k s - loss(s) for the logistic loss, by bisection on k - loss'(s) = 0.
/// Returns the maximizer; k must satisfy -y k in (0, 1).
inline double logistic_conjugate_argmax(double y, double k) {
  return bisect([&](double s) { return logistic_dloss(y, s) - k; }, -60.0, 60.0);
}

inline double logistic_conjugate_numeric(double y, double k) {
  const double s = logistic_conjugate_argmax(y, k);
  return k * s - logistic_loss(y, s);
}

}  // namespace testing
