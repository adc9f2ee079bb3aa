#include "adfs/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "adfs/rng.hpp"
#include "run_support.hpp"

namespace adfs {

namespace {

std::vector<const ComponentFunction*> flatten(const ProblemInstance& problem) {
  std::vector<const ComponentFunction*> out;
  for (const NodeObjective& node : problem.nodes)
    for (const ComponentFunction& f : node.components) out.push_back(&f);
  return out;
}

}  // namespace

double point_saga_step(const ProblemInstance& problem) {
  const std::vector<const ComponentFunction*> comps = flatten(problem);
  if (comps.empty()) throw std::invalid_argument("point_saga_step: no components");
  const double N = static_cast<double>(comps.size());
  const double s = problem.total_sigma() / N;
  double L = 0.0;
  for (const ComponentFunction* f : comps) L = std::max(L, f->smoothness());
  L += s;
  const double kappa = L / s;
  return std::sqrt((N - 1.0) * (N - 1.0) + 4.0 * N * kappa) / (2.0 * L * N) - (1.0 - 1.0 / N) / (2.0 * L);
}

BaselineTrace run_point_saga(const ProblemInstance& problem, std::size_t T, const BaselineOptions& options) {
  const std::vector<const ComponentFunction*> comps = flatten(problem);
  if (comps.empty()) throw std::invalid_argument("run_point_saga: no components");
  const std::size_t N = comps.size();
  const double s = problem.total_sigma() / static_cast<double>(N);
  BaselineTrace trace;
  trace.step = options.step ? *options.step : point_saga_step(problem);
  const double gamma = trace.step;
  if (!(gamma > 0.0)) throw std::invalid_argument("run_point_saga: step must be positive");
  const double shrink = 1.0 + gamma * s;
  const double gamma_f = gamma / shrink;

  Vector x = options.x0 ? *options.x0 : Vector::Zero(problem.dim);
  Matrix table(problem.dim, static_cast<Eigen::Index>(N));
  for (std::size_t k = 0; k < N; ++k) table.col(static_cast<Eigen::Index>(k)) = comps[k]->gradient(x) + s * x;
  Vector mean = table.rowwise().mean();
  std::vector<double> warm(N, std::numeric_limits<double>::quiet_NaN());

  Rng rng(options.seed);
  const std::size_t every = detail::default_every(options.checkpoint_every, T);
  const auto marks = detail::checkpoint_set(T, every, options.extra_checkpoints);
  detail::DivergenceMonitor monitor(options.divergence_check);
  auto checkpoint = [&](std::size_t t) {
    BaselineCheckpoint cp{t, static_cast<double>(t), std::max(0.0, problem.value(x) - options.F_star)};
    trace.checkpoints.push_back(cp);
    monitor.observe(t, cp.primal_subopt);
    return options.target > 0.0 && cp.primal_subopt <= options.target;
  };

  trace.reached_target = checkpoint(0);
  for (std::size_t t = 0; t < T && !trace.reached_target; ++t) {
    const std::size_t j = rng.index(N);
    const auto col = static_cast<Eigen::Index>(j);
    const Vector z = x + gamma * (table.col(col) - mean);
    x = comps[j]->prox(gamma_f, z / shrink, &warm[j]);
    const Vector g = (z - x) / gamma;
    mean += (g - table.col(col)) / static_cast<double>(N);
    table.col(col) = g;
    if (options.check_mean_invariant)
      trace.max_mean_error = std::max(trace.max_mean_error, (table.rowwise().mean() - mean).cwiseAbs().maxCoeff());
    trace.iterations = t + 1;
    if (marks.count(t + 1)) trace.reached_target = checkpoint(t + 1);
  }
  trace.theta = x;
  return trace;
}

std::pair<double, double> global_smoothness(const ProblemInstance& problem) {
  Matrix h = Matrix::Zero(problem.dim, problem.dim);
  for (const NodeObjective& node : problem.nodes) {
    h.diagonal().array() += node.sigma;
    for (const ComponentFunction& f : node.components) {
      switch (f.kind()) {
        case LossKind::Quadratic:
          h.diagonal().array() += f.smoothness();
          break;
        case LossKind::LeastSquares:
          h.noalias() += f.data() * f.data().transpose();
          break;
        case LossKind::LogisticLinear:
          h.noalias() += 0.25 * f.data() * f.data().transpose();
          break;
      }
    }
  }
  const Vector ev = jacobi_eigenvalues(h);
  return {ev[ev.size() - 1], problem.total_sigma()};
}

BaselineTrace run_agd(const ProblemInstance& problem, std::size_t T, const BaselineOptions& options) {
  const auto [M, mu] = global_smoothness(problem);
  if (!(mu > 0.0)) throw std::invalid_argument("run_agd: objective is not strongly convex");
  BaselineTrace trace;
  trace.step = options.step ? *options.step : 1.0 / M;
  trace.momentum = (std::sqrt(M) - std::sqrt(mu)) / (std::sqrt(M) + std::sqrt(mu));
  const double cost = static_cast<double>(std::max<std::size_t>(1, problem.num_components()));

  Vector x = options.x0 ? *options.x0 : Vector::Zero(problem.dim);
  Vector y = x;
  const std::size_t every = detail::default_every(options.checkpoint_every, T);
  const auto marks = detail::checkpoint_set(T, every, options.extra_checkpoints);
  detail::DivergenceMonitor monitor(options.divergence_check);
  auto checkpoint = [&](std::size_t t) {
    BaselineCheckpoint cp{t, cost * static_cast<double>(t), std::max(0.0, problem.value(x) - options.F_star)};
    trace.checkpoints.push_back(cp);
    monitor.observe(t, cp.primal_subopt);
    return options.target > 0.0 && cp.primal_subopt <= options.target;
  };

  trace.reached_target = checkpoint(0);
  for (std::size_t t = 0; t < T && !trace.reached_target; ++t) {
    const Vector next = y - trace.step * problem.gradient(y);
    y = next + trace.momentum * (next - x);
    x = next;
    trace.iterations = t + 1;
    if (marks.count(t + 1)) trace.reached_target = checkpoint(t + 1);
  }
  trace.theta = x;
  return trace;
}

}  // namespace adfs
