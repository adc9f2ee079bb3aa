#include "adfs/adfs.hpp"

#include "run_support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace adfs {

using detail::checkpoint_set;
using detail::DivergenceMonitor;

namespace {

double center_primal_gap(const ProblemInstance& problem, const std::vector<Vector>& thetas, Vector& average,
                         double& consensus) {
  average = Vector::Zero(problem.dim);
  for (const Vector& th : thetas) average += th;
  average /= static_cast<double>(thetas.size());
  consensus = 0.0;
  for (const Vector& th : thetas) consensus = std::max(consensus, (th - average).norm());
  return problem.value(average);
}

const ComponentFunction& leaf_component(const AugmentedGraph& g, const ProblemInstance& problem,
                                        std::size_t leaf) {
  const std::size_t i = g.leaf_center(leaf);
  return problem.nodes[i].components[leaf - g.leaf_offset(i)];
}

void check_compatible(const AugmentedGraph& g, const ProblemInstance& problem) {
  if (problem.num_nodes() != g.num_centers())
    throw std::invalid_argument("problem and graph disagree on the number of machines");
  for (std::size_t i = 0; i < g.num_centers(); ++i)
    if (problem.nodes[i].components.size() != g.local_size(i))
      throw std::invalid_argument("problem and graph disagree on local dataset sizes");
}

void check_smooth_params(const AugmentedGraph& g, const RunParameters& params) {
  if (!(params.sigma_A > 0.0) || !(params.rho > 0.0))
    throw InvalidState("smooth solver requires sigma_A > 0");
  if (params.p.size() != g.num_edges() || params.eta_tilde.size() != g.num_edges())
    throw std::invalid_argument("run parameters do not match the augmented graph");
  for (std::size_t leaf = 0; leaf < g.num_leaves(); ++leaf) {
    const std::size_t e = g.leaf_edge(leaf);
    if (params.eta_tilde[e] > (1.0 - 1e-9) * g.leaf_smoothness(leaf))
      throw InvalidState("step on virtual edge " + std::to_string(e) + " reaches the component smoothness");
  }
}

}  // namespace

RunParameters derive_parameters(const AugmentedGraph& g, const SpectralReport& spec,
                                std::optional<double> p_comm) {
  if (!g.weights_assigned()) throw InvalidState("derive_parameters: edge weights not assigned");
  if (spec.R.size() != g.num_edges()) throw InvalidState("derive_parameters: spectral report incomplete");
  const std::size_t n = g.num_centers();
  const std::size_t E = g.num_comm_edges();
  const std::size_t leaves = g.num_leaves();
  RunParameters out;
  ParameterReport& rep = out.report;

  rep.kappa_i.resize(n);
  rep.kappa_s = 0.0;
  rep.kappa_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    rep.kappa_i[i] = g.kappa(i);
    rep.kappa_s = std::max(rep.kappa_s, rep.kappa_i[i]);
    rep.kappa_min = std::min(rep.kappa_min, rep.kappa_i[i]);
  }
  double root_sum = 0.0;
  for (std::size_t leaf = 0; leaf < leaves; ++leaf)
    root_sum += std::sqrt(1.0 + g.leaf_smoothness(leaf) / g.sigma_center(g.leaf_center(leaf)));
  rep.S_comp = root_sum / static_cast<double>(n);
  rep.r_kappa = (1.0 + rep.kappa_min) / (1.0 + rep.kappa_s);
  rep.gamma_tilde = spec.gamma_tilde;
  rep.Delta_p = 1.0;

  double pc = 0.0;
  if (p_comm) {
    pc = *p_comm;
    if (!(pc >= 0.0 && pc <= 1.0)) throw std::invalid_argument("p_comm must lie in [0, 1]");
  } else if (E == 0) {
    pc = 0.0;
  } else if (leaves == 0) {
    pc = 1.0;
  } else {
    pc = std::min(0.5, 1.0 / (1.0 + std::sqrt(rep.gamma_tilde / (1.0 + rep.kappa_min)) * rep.S_comp));
  }
  if (E > 0 && !(pc > 0.0)) throw std::invalid_argument("p_comm = 0 leaves communication edges unsampled");
  if (E == 0 && pc > 0.0) throw std::invalid_argument("p_comm > 0 on a graph without communication edges");
  if (leaves > 0 && !(pc < 1.0)) throw std::invalid_argument("p_comm = 1 leaves computation edges unsampled");
  out.p_comm = pc;
  out.p_comp = leaves > 0 ? 1.0 - pc : 0.0;

  out.p.assign(g.num_edges(), 0.0);
  for (std::size_t e = 0; e < E; ++e) out.p[e] = pc / static_cast<double>(E);
  for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
    const double ratio = g.leaf_smoothness(leaf) / g.sigma_center(g.leaf_center(leaf));
    out.p[g.leaf_edge(leaf)] = out.p_comp * std::sqrt(1.0 + ratio) / (static_cast<double>(n) * rep.S_comp);
  }

  const std::vector<double>& sig = g.sigma_diag();
  double S2 = 0.0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const AugmentedEdge& ed = g.edge(e);
    const double M = g.mu_sq()[e] * (1.0 / sig[ed.u] + 1.0 / sig[ed.v]);
    S2 = std::max(S2, M * spec.R[e] / (out.p[e] * out.p[e]));
  }
  rep.S_tight = std::sqrt(S2);
  out.sigma_A = spec.lambda_min_plus_Ltilde;
  if (!(out.sigma_A > 0.0)) throw InvalidState("derive_parameters: sigma_A must be positive");
  out.S = rep.S_tight;
  for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
    const std::size_t e = g.leaf_edge(leaf);
    const double needed =
        g.mu_sq()[e] / (std::sqrt(out.sigma_A) * out.p[e] * kMaxStepRatio * g.leaf_smoothness(leaf));
    if (needed > rep.S_tight) rep.step_violations.push_back(e);
    out.S = std::max(out.S, needed);
  }
  out.rho = std::sqrt(out.sigma_A) / out.S;

  out.eta_tilde.resize(g.num_edges());
  rep.admissibility_margin = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    out.eta_tilde[e] = out.rho * g.mu_sq()[e] / (out.sigma_A * out.p[e]);
    const double margin = 1.0 - out.rho - out.rho * spec.R[e] / out.p[e];
    rep.admissibility_margin = std::min(rep.admissibility_margin, margin);
    if (margin < -1e-12) rep.admissibility_violations.push_back(e);
  }

  double per_node_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t e = 0; e < E; ++e)
      if (g.edge(e).u == i || g.edge(e).v == i) total += out.p[e];
    per_node_max = std::max(per_node_max, total);
  }
  out.p_comm_max = static_cast<double>(n) * per_node_max;
  rep.c_tau = pc > 0.0 ? out.p_comm_max / pc : kNaN;
  rep.comm_dominates = out.p_comp <= out.p_comm_max;
  return out;
}

double batch_condition(const ProblemInstance& p) {
  double worst = 0.0;
  for (const NodeObjective& node : p.nodes) {
    Matrix h = Matrix::Zero(p.dim, p.dim);
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
    const Vector ev = jacobi_eigenvalues(h);
    worst = std::max(worst, ev[ev.size() - 1] / node.sigma);
  }
  return worst;
}

std::string format_parameters(const RunParameters& params, const SpectralReport& spec) {
  std::ostringstream out;
  out.precision(12);
  const ParameterReport& r = params.report;
  out << "S = " << params.S << '\n'
      << "S_tight = " << r.S_tight << '\n'
      << "rho = " << params.rho << '\n'
      << "sigma_A = " << params.sigma_A << '\n'
      << "p_comm = " << params.p_comm << '\n'
      << "p_comp = " << params.p_comp << '\n'
      << "p_comm_max = " << params.p_comm_max << '\n'
      << "lambda_min_plus_L = " << spec.lambda_min_plus_L << '\n'
      << "lambda_max_L = " << spec.lambda_max_L << '\n'
      << "gamma = " << spec.gamma << '\n'
      << "gamma_tilde = " << r.gamma_tilde << '\n'
      << "lambda_min_plus_Ltilde = " << spec.lambda_min_plus_Ltilde << '\n'
      << "lambda_max_plus_ASigma2A = " << spec.lambda_max_plus_ASigma2A << '\n'
      << "kappa_s = " << r.kappa_s << '\n'
      << "kappa_min = " << r.kappa_min << '\n'
      << "kappa_b = " << r.kappa_b << '\n'
      << "S_comp = " << r.S_comp << '\n'
      << "r_kappa = " << r.r_kappa << '\n'
      << "Delta_p = " << r.Delta_p << '\n'
      << "c_tau = " << r.c_tau << '\n'
      << "admissibility_margin = " << r.admissibility_margin << '\n'
      << "admissibility_violations = " << r.admissibility_violations.size() << '\n'
      << "step_violations = " << r.step_violations.size() << '\n'
      << "comm_dominates = " << (r.comm_dominates ? "true" : "false") << '\n';
  return out.str();
}

Schedule::Schedule(std::span<const double> p, std::uint64_t seed) : seed_(seed), rng_(seed), sampler_(p) {}

Schedule make_schedule(const RunParameters& params, std::uint64_t seed) { return Schedule(params.p, seed); }

DenseAdfs::DenseAdfs(const AugmentedGraph& g, const ProblemInstance& problem, const SpectralReport& spec,
                     const RunParameters& params)
    : g_(g), problem_(problem), spec_(spec), params_(params) {
  check_compatible(g, problem);
  check_smooth_params(g, params);
  const auto rows = static_cast<Eigen::Index>(g.num_nodes());
  x_ = NodeMatrix::Zero(rows, problem.dim);
  v_ = NodeMatrix::Zero(rows, problem.dim);
  warm_.assign(g.num_leaves(), std::numeric_limits<double>::quiet_NaN());
}

void DenseAdfs::step(std::size_t e) {
  const double rho = params_.rho;
  const AugmentedEdge& ed = g_.edge(e);
  const auto u = static_cast<Eigen::Index>(ed.u);
  const auto w_ = static_cast<Eigen::Index>(ed.v);
  const double eta = params_.eta_tilde[e];
  const std::vector<double>& sig = g_.sigma_diag();

  NodeMatrix y = (x_ + rho * v_) / (1.0 + rho);
  NodeMatrix w = (1.0 - rho) * v_ + rho * y;
  const Vector grad = y.row(u).transpose() / sig[ed.u] - y.row(w_).transpose() / sig[ed.v];
  NodeMatrix next = w;
  next.row(u) -= eta * grad.transpose();
  next.row(w_) += eta * grad.transpose();
  if (ed.kind == EdgeKind::Computation) {
    const Vector zi = next.row(u).transpose();
    const Vector zl = next.row(w_).transpose();
    const Vector vl = leaf_component(g_, problem_, ed.leaf).prox_conjugate_tilde(eta, zl, &warm_[ed.leaf]);
    next.row(u) = (zi + zl - vl).transpose();
    next.row(w_) = vl.transpose();
  }
  const double coef = rho * spec_.R[e] / params_.p[e];
  x_ = std::move(y);
  x_.row(u) += coef * (next.row(u) - w.row(u));
  x_.row(w_) += coef * (next.row(w_) - w.row(w_));
  v_ = std::move(next);
  ++t_;
}

LazyAdfs::LazyAdfs(const AugmentedGraph& g, const ProblemInstance& problem, const SpectralReport& spec,
                   const RunParameters& params, bool scalar_leaves, std::size_t power_cache)
    : g_(g), problem_(problem), spec_(spec), params_(params) {
  check_compatible(g, problem);
  check_smooth_params(g, params);
  bool all_linear = true;
  for (const NodeObjective& node : problem.nodes)
    for (const ComponentFunction& f : node.components) all_linear = all_linear && f.is_linear();
  scalar_ = scalar_leaves && all_linear;

  const auto n = static_cast<Eigen::Index>(g.num_centers());
  const auto leaves = static_cast<Eigen::Index>(g.num_leaves());
  cx_ = NodeMatrix::Zero(n, problem.dim);
  cv_ = NodeMatrix::Zero(n, problem.dim);
  if (scalar_) {
    lxc_ = Vector::Zero(leaves);
    lvc_ = Vector::Zero(leaves);
  } else {
    lx_ = NodeMatrix::Zero(leaves, problem.dim);
    lv_ = NodeMatrix::Zero(leaves, problem.dim);
  }
  center_last_.assign(g.num_centers(), 0);
  leaf_last_.assign(g.num_leaves(), 0);
  warm_.assign(g.num_leaves(), std::numeric_limits<double>::quiet_NaN());

  const double rho = params.rho;
  const double a1 = 1.0 / (1.0 + rho);
  const double b1 = rho / (1.0 + rho);
  powers_.reserve(std::max<std::size_t>(power_cache, 2));
  powers_.emplace_back(1.0, 0.0);
  for (std::size_t k = 1; k < std::max<std::size_t>(power_cache, 2); ++k) {
    const auto [a, b] = powers_.back();
    powers_.emplace_back(a * a1 + b * b1, a * b1 + b * a1);
  }
}

std::pair<double, double> LazyAdfs::mixing_power(std::size_t k) const {
  if (k < powers_.size()) return powers_[k];
  // square-and-multiply on the commutative family [[a, b], [b, a]]
  std::pair<double, double> result{1.0, 0.0};
  std::pair<double, double> base = powers_[1];
  auto mul = [](std::pair<double, double> p, std::pair<double, double> q) {
    return std::pair<double, double>{p.first * q.first + p.second * q.second,
                                     p.first * q.second + p.second * q.first};
  };
  while (k > 0) {
    if (k & 1U) result = mul(result, base);
    base = mul(base, base);
    k >>= 1U;
  }
  return result;
}

const ComponentFunction& LazyAdfs::component(std::size_t leaf) const {
  return leaf_component(g_, problem_, leaf);
}

void LazyAdfs::catch_up_center(std::size_t i) {
  const std::size_t k = t_ - center_last_[i];
  if (k == 0) return;
  const auto [a, b] = mixing_power(k);
  const auto r = static_cast<Eigen::Index>(i);
  const Vector x = cx_.row(r).transpose();
  const Vector v = cv_.row(r).transpose();
  cx_.row(r) = (a * x + b * v).transpose();
  cv_.row(r) = (b * x + a * v).transpose();
  center_last_[i] = t_;
}

void LazyAdfs::catch_up_leaf(std::size_t leaf) {
  const std::size_t k = t_ - leaf_last_[leaf];
  if (k == 0) return;
  const auto [a, b] = mixing_power(k);
  const auto r = static_cast<Eigen::Index>(leaf);
  if (scalar_) {
    const double x = lxc_[r];
    const double v = lvc_[r];
    lxc_[r] = a * x + b * v;
    lvc_[r] = b * x + a * v;
  } else {
    const Vector x = lx_.row(r).transpose();
    const Vector v = lv_.row(r).transpose();
    lx_.row(r) = (a * x + b * v).transpose();
    lv_.row(r) = (b * x + a * v).transpose();
  }
  leaf_last_[leaf] = t_;
}

void LazyAdfs::step(std::size_t e) {
  const double rho = params_.rho;
  const AugmentedEdge& ed = g_.edge(e);
  const double eta = params_.eta_tilde[e];
  const double coef = rho * spec_.R[e] / params_.p[e];
  const auto u = static_cast<Eigen::Index>(ed.u);
  const double su = g_.sigma_center(ed.u);
  catch_up_center(ed.u);
  const Vector yu = (cx_.row(u).transpose() + rho * cv_.row(u).transpose()) / (1.0 + rho);
  const Vector wu = (1.0 - rho) * cv_.row(u).transpose() + rho * yu;

  if (ed.kind == EdgeKind::Communication) {
    const auto v = static_cast<Eigen::Index>(ed.v);
    catch_up_center(ed.v);
    const Vector yv = (cx_.row(v).transpose() + rho * cv_.row(v).transpose()) / (1.0 + rho);
    const Vector wv = (1.0 - rho) * cv_.row(v).transpose() + rho * yv;
    const Vector delta = eta * (yu / su - yv / g_.sigma_center(ed.v));
    cv_.row(u) = (wu - delta).transpose();
    cv_.row(v) = (wv + delta).transpose();
    cx_.row(u) = (yu - coef * delta).transpose();
    cx_.row(v) = (yv + coef * delta).transpose();
    center_last_[ed.u] = center_last_[ed.v] = ++t_;
    return;
  }

  const std::size_t leaf = ed.leaf;
  const auto l = static_cast<Eigen::Index>(leaf);
  const double L = g_.leaf_smoothness(leaf);
  const ComponentFunction& f = component(leaf);
  catch_up_leaf(leaf);
  if (scalar_) {
    const Vector& X = f.data();
    const double yl = (lxc_[l] + rho * lvc_[l]) / (1.0 + rho);
    const double wl = (1.0 - rho) * lvc_[l] + rho * yl;
    const double xz = wl * X.squaredNorm() + eta * (X.dot(yu) / su - yl * X.squaredNorm() / L);
    const double k = f.prox_conjugate_tilde_coef(eta, xz, &warm_[leaf]);
    cv_.row(u) = (wu + (wl - k) * X).transpose();
    cx_.row(u) = (yu + coef * (wl - k) * X).transpose();
    lvc_[l] = k;
    lxc_[l] = yl + coef * (k - wl);
  } else {
    const Vector yl = (lx_.row(l).transpose() + rho * lv_.row(l).transpose()) / (1.0 + rho);
    const Vector wl = (1.0 - rho) * lv_.row(l).transpose() + rho * yl;
    const Vector grad = yu / su - yl / L;
    const Vector zu = wu - eta * grad;
    const Vector zl = wl + eta * grad;
    const Vector vl = f.prox_conjugate_tilde(eta, zl, &warm_[leaf]);
    const Vector vu = zu + zl - vl;
    cv_.row(u) = vu.transpose();
    cx_.row(u) = (yu + coef * (vu - wu)).transpose();
    lv_.row(l) = vl.transpose();
    lx_.row(l) = (yl + coef * (vl - wl)).transpose();
  }
  center_last_[ed.u] = leaf_last_[leaf] = ++t_;
}

void LazyAdfs::sync_centers() {
  for (std::size_t i = 0; i < g_.num_centers(); ++i) catch_up_center(i);
}

Vector LazyAdfs::center_primal(std::size_t i) const {
  const std::size_t k = t_ - center_last_[i];
  const auto [a, b] = mixing_power(k);
  const auto r = static_cast<Eigen::Index>(i);
  return (b * cx_.row(r).transpose() + a * cv_.row(r).transpose()) / g_.sigma_center(i);
}

NodeMatrix LazyAdfs::materialize_x() const {
  NodeMatrix out(static_cast<Eigen::Index>(g_.num_nodes()), problem_.dim);
  for (std::size_t i = 0; i < g_.num_centers(); ++i) {
    const auto [a, b] = mixing_power(t_ - center_last_[i]);
    const auto r = static_cast<Eigen::Index>(i);
    out.row(r) = a * cx_.row(r) + b * cv_.row(r);
  }
  for (std::size_t leaf = 0; leaf < g_.num_leaves(); ++leaf) {
    const auto [a, b] = mixing_power(t_ - leaf_last_[leaf]);
    const auto r = static_cast<Eigen::Index>(leaf);
    const auto row = static_cast<Eigen::Index>(g_.leaf_node(leaf));
    if (scalar_)
      out.row(row) = (a * lxc_[r] + b * lvc_[r]) * component(leaf).data().transpose();
    else
      out.row(row) = a * lx_.row(r) + b * lv_.row(r);
  }
  return out;
}

NodeMatrix LazyAdfs::materialize_v() const {
  NodeMatrix out(static_cast<Eigen::Index>(g_.num_nodes()), problem_.dim);
  for (std::size_t i = 0; i < g_.num_centers(); ++i) {
    const auto [a, b] = mixing_power(t_ - center_last_[i]);
    const auto r = static_cast<Eigen::Index>(i);
    out.row(r) = b * cx_.row(r) + a * cv_.row(r);
  }
  for (std::size_t leaf = 0; leaf < g_.num_leaves(); ++leaf) {
    const auto [a, b] = mixing_power(t_ - leaf_last_[leaf]);
    const auto r = static_cast<Eigen::Index>(leaf);
    const auto row = static_cast<Eigen::Index>(g_.leaf_node(leaf));
    if (scalar_)
      out.row(row) = (b * lxc_[r] + a * lvc_[r]) * component(leaf).data().transpose();
    else
      out.row(row) = b * lx_.row(r) + a * lv_.row(r);
  }
  return out;
}

double dual_value(const AugmentedGraph& g, const ProblemInstance& problem, const NodeMatrix& u) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < g.num_centers(); ++i)
    total += u.row(static_cast<Eigen::Index>(i)).squaredNorm() / (2.0 * g.sigma_center(i));
  for (std::size_t leaf = 0; leaf < g.num_leaves(); ++leaf) {
    const Vector row = u.row(static_cast<Eigen::Index>(g.leaf_node(leaf))).transpose();
    total += leaf_component(g, problem, leaf).conjugate(row);
  }
  return static_cast<double>(total);
}

NodeMatrix dual_optimum(const AugmentedGraph& g, const ProblemInstance& problem, const Vector& theta_star) {
  NodeMatrix out(static_cast<Eigen::Index>(g.num_nodes()), problem.dim);
  for (std::size_t i = 0; i < g.num_centers(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = g.sigma_center(i) * theta_star.transpose();
  for (std::size_t leaf = 0; leaf < g.num_leaves(); ++leaf)
    out.row(static_cast<Eigen::Index>(g.leaf_node(leaf))) =
        leaf_component(g, problem, leaf).gradient(theta_star).transpose();
  return out;
}

AdfsTrace run_adfs(const ProblemInstance& problem, const AugmentedGraph& g, const SpectralReport& spec,
                   const RunParameters& params, std::size_t T, const AdfsRunOptions& options) {
  std::optional<LazyAdfs> lazy;
  std::optional<DenseAdfs> dense;
  if (options.lazy)
    lazy.emplace(g, problem, spec, params, options.scalar_leaves);
  else
    dense.emplace(g, problem, spec, params);

  Schedule schedule = make_schedule(params, options.seed);
  std::optional<IdealizedClock> clock;
  if (options.time_model) clock.emplace(g.num_centers(), *options.time_model);

  // Lyapunov quantities on tiny instances
  const bool lyapunov = options.track_lyapunov && options.theta_star && g.num_nodes() <= 200;
  NodeMatrix v_star;
  double dual_star = 0.0, c1 = 0.0, C0 = 0.0;
  if (lyapunov) {
    v_star = dual_optimum(g, problem, *options.theta_star);
    const Matrix a = g.incidence();
    const Matrix lambda_star = pseudo_inverse(a) * Matrix(v_star);
    dual_star = dual_value(g, problem, v_star);
    const NodeMatrix zero = NodeMatrix::Zero(v_star.rows(), v_star.cols());
    c1 = params.sigma_A / spec.lambda_max_plus_ASigma2A;
    C0 = params.sigma_A * lambda_star.squaredNorm() + 2.0 * (dual_value(g, problem, zero) - dual_star);
  }
  Vector sigma_inv(static_cast<Eigen::Index>(g.num_nodes()));
  for (std::size_t k = 0; k < g.num_nodes(); ++k) sigma_inv[static_cast<Eigen::Index>(k)] = 1.0 / g.sigma_diag()[k];

  const std::size_t every = detail::default_every(options.checkpoint_every, T);
  const std::set<std::size_t> marks = checkpoint_set(T, every, options.extra_checkpoints);
  DivergenceMonitor monitor(options.divergence_check);
  AdfsTrace trace;
  std::vector<Vector> thetas(g.num_centers());

  auto checkpoint = [&](std::size_t t) {
    AdfsCheckpoint cp;
    cp.iteration = t;
    cp.idealized_time = clock ? clock->now() : 0.0;
    if (lazy) {
      lazy->sync_centers();
      for (std::size_t i = 0; i < thetas.size(); ++i) thetas[i] = lazy->center_primal(i);
    } else {
      for (std::size_t i = 0; i < thetas.size(); ++i)
        thetas[i] = dense->v().row(static_cast<Eigen::Index>(i)).transpose() / g.sigma_center(i);
    }
    const double value = center_primal_gap(problem, thetas, trace.theta, cp.consensus_gap);
    cp.primal_subopt = std::max(0.0, value - options.F_star);
    if (lyapunov) {
      const NodeMatrix x = lazy ? lazy->materialize_x() : dense->x();
      const NodeMatrix v = lazy ? lazy->materialize_v() : dense->v();
      const NodeMatrix diff = sigma_inv.asDiagonal() * (v - v_star);
      cp.lhs = c1 * diff.squaredNorm() + 2.0 * (dual_value(g, problem, x) - dual_star);
      cp.rhs = C0 * std::pow(1.0 - params.rho, static_cast<double>(t));
    }
    trace.checkpoints.push_back(cp);
    monitor.observe(t, cp.primal_subopt);
    return options.target > 0.0 && cp.primal_subopt <= options.target;
  };

  if (checkpoint(0)) {
    trace.reached_target = true;
    return trace;
  }
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t e = schedule.next();
    if (lazy)
      lazy->step(e);
    else
      dense->step(e);
    if (clock) clock->apply(g, e);
    trace.iterations = t + 1;
    if (marks.count(t + 1) && checkpoint(t + 1)) {
      trace.reached_target = true;
      break;
    }
  }
  return trace;
}

ApcgProblem make_dual_apcg_problem(const AugmentedGraph& g, const ProblemInstance& problem,
                                   const SpectralReport& spec, const RunParameters& params) {
  check_compatible(g, problem);
  const Matrix a = g.incidence();
  const std::vector<double>& sig = g.sigma_diag();
  ApcgProblem prob;
  prob.num_coords = g.num_edges();
  prob.block = problem.dim;
  prob.sigma_A = spec.lambda_min_plus_Ltilde;
  prob.R = spec.R;
  prob.p = params.p;
  prob.smoothness.resize(g.num_edges());
  prob.prox.resize(g.num_edges());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const AugmentedEdge& ed = g.edge(e);
    prob.smoothness[e] = g.mu_sq()[e] * (1.0 / sig[ed.u] + 1.0 / sig[ed.v]);
    if (ed.kind == EdgeKind::Computation) {
      const double mu = std::sqrt(g.mu_sq()[e]);
      const ComponentFunction* f = &leaf_component(g, problem, ed.leaf);
      prob.prox[e] = [mu, f](double eta, const Vector& z) -> Vector {
        return -f->prox_conjugate_tilde(eta * mu * mu, -mu * z) / mu;
      };
    }
  }
  prob.grad_coord = [a, &g](std::size_t e, const NodeMatrix& lambda) -> Vector {
    const AugmentedEdge& ed = g.edge(e);
    const auto u = static_cast<Eigen::Index>(ed.u);
    const auto v = static_cast<Eigen::Index>(ed.v);
    const double mu = std::sqrt(g.mu_sq()[e]);
    const Vector au = (a.row(u) * lambda).transpose();
    const Vector av = (a.row(v) * lambda).transpose();
    return mu * (au / g.sigma_diag()[ed.u] - av / g.sigma_diag()[ed.v]);
  };
  prob.objective = [a, &g, &problem](const NodeMatrix& lambda) {
    const NodeMatrix u = a * lambda;
    return dual_value(g, problem, u);
  };
  prob.projector = pseudo_inverse(a) * a;
  return prob;
}

NsParameters derive_ns_parameters(const AugmentedGraph& g, const SpectralReport& spec,
                                  std::optional<double> p_comm) {
  if (!g.weights_assigned() || spec.R.size() != g.num_edges())
    throw InvalidState("derive_ns_parameters: graph not configured");
  const std::size_t E = g.num_comm_edges();
  const std::size_t leaves = g.num_leaves();
  NsParameters out;
  double pc = 0.0;
  if (p_comm) {
    pc = *p_comm;
  } else if (E == 0) {
    pc = 0.0;
  } else if (leaves == 0) {
    pc = 1.0;
  } else {
    std::size_t m = 0;
    for (std::size_t i = 0; i < g.num_centers(); ++i) m = std::max(m, g.local_size(i));
    pc = 1.0 / (1.0 + std::sqrt(static_cast<double>(m) * spec.gamma_tilde));
  }
  if (!(pc >= 0.0 && pc <= 1.0) || (E > 0 && !(pc > 0.0)) || (E == 0 && pc > 0.0) ||
      (leaves > 0 && !(pc < 1.0)))
    throw std::invalid_argument("p_comm incompatible with the graph");
  out.p_comm = pc;
  out.p_comp = leaves > 0 ? 1.0 - pc : 0.0;
  out.p.assign(g.num_edges(), 0.0);
  for (std::size_t e = 0; e < E; ++e) out.p[e] = pc / static_cast<double>(E);
  for (std::size_t leaf = 0; leaf < leaves; ++leaf)
    out.p[g.leaf_edge(leaf)] = out.p_comp / static_cast<double>(leaves);
  out.eta.resize(g.num_edges());
  double S2 = 0.0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const AugmentedEdge& ed = g.edge(e);
    double inv = 1.0 / g.sigma_center(ed.u);
    if (ed.kind == EdgeKind::Communication) inv += 1.0 / g.sigma_center(ed.v);
    S2 = std::max(S2, g.mu_sq()[e] * inv * spec.R[e] / (out.p[e] * out.p[e]));
    out.eta[e] = g.mu_sq()[e] / out.p[e];
  }
  out.S = std::sqrt(S2);
  return out;
}

NsAdfs::NsAdfs(const AugmentedGraph& g, const ProblemInstance& problem, const SpectralReport& spec,
               const NsParameters& params)
    : g_(g), problem_(problem), spec_(spec), params_(params), seq_(SequenceMode::Nonsmooth, params.S, 0.0) {
  check_compatible(g, problem);
  const auto rows = static_cast<Eigen::Index>(g.num_nodes());
  x_ = NodeMatrix::Zero(rows, problem.dim);
  v_ = NodeMatrix::Zero(rows, problem.dim);
}

void NsAdfs::step(std::size_t e) {
  const ApcgCoefficients c = seq_.next();
  const AugmentedEdge& ed = g_.edge(e);
  const auto u = static_cast<Eigen::Index>(ed.u);
  const auto w = static_cast<Eigen::Index>(ed.v);
  const bool comp = ed.kind == EdgeKind::Computation;
  NodeMatrix y = (1.0 - c.alpha) * x_ + c.alpha * v_;
  Vector grad = y.row(u).transpose() / g_.sigma_center(ed.u);
  if (!comp) grad -= y.row(w).transpose() / g_.sigma_center(ed.v);
  const double step = c.a * params_.eta[e];
  NodeMatrix next = v_;
  next.row(u) -= step * grad.transpose();
  next.row(w) += step * grad.transpose();
  if (comp) {
    const Vector zi = next.row(u).transpose();
    const Vector zl = next.row(w).transpose();
    const Vector vl = leaf_component(g_, problem_, ed.leaf).prox_conjugate(step, zl);
    next.row(u) = (zi + zl - vl).transpose();
    next.row(w) = vl.transpose();
  }
  const double coef = c.alpha * spec_.R[e] / params_.p[e];
  x_ = std::move(y);
  x_.row(u) += coef * (next.row(u) - v_.row(u));
  x_.row(w) += coef * (next.row(w) - v_.row(w));
  v_ = std::move(next);
}

std::vector<NsCheckpoint> run_ns_adfs(const ProblemInstance& problem, const AugmentedGraph& g,
                                      const SpectralReport& spec, const NsParameters& params, std::size_t T,
                                      const NsRunOptions& options) {
  NsAdfs solver(g, problem, spec, params);
  Schedule schedule(params.p, options.seed);
  const std::size_t every = detail::default_every(options.checkpoint_every, T);
  const std::set<std::size_t> marks = checkpoint_set(T, every, options.extra_checkpoints);
  DivergenceMonitor monitor(options.divergence_check);
  std::optional<IdealizedClock> clock;
  if (options.time_model) clock.emplace(g.num_centers(), *options.time_model);
  std::vector<Vector> thetas(g.num_centers());
  Vector average;
  std::vector<NsCheckpoint> out;
  auto checkpoint = [&](std::size_t t) {
    NsCheckpoint cp;
    cp.iteration = t;
    cp.idealized_time = clock ? clock->now() : 0.0;
    cp.dual_subopt = dual_value(g, problem, solver.x()) + options.F_star;
    for (std::size_t i = 0; i < thetas.size(); ++i)
      thetas[i] = solver.v().row(static_cast<Eigen::Index>(i)).transpose() / g.sigma_center(i);
    double consensus = 0.0;
    cp.primal_subopt = std::max(0.0, center_primal_gap(problem, thetas, average, consensus) - options.F_star);
    out.push_back(cp);
    monitor.observe(t, std::abs(cp.dual_subopt));
  };
  checkpoint(0);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t e = schedule.next();
    solver.step(e);
    if (clock) clock->apply(g, e);
    if (marks.count(t + 1)) checkpoint(t + 1);
  }
  return out;
}

void write_trace_csv(std::ostream& out, const AdfsTrace& trace, bool with_lyapunov) {
  out << "iteration,idealized_time,primal_subopt";
  if (with_lyapunov) out << ",dual_lyapunov";
  out << ",consensus_gap\n";
  char buf[64];
  for (const AdfsCheckpoint& cp : trace.checkpoints) {
    out << cp.iteration;
    for (double value : {cp.idealized_time, cp.primal_subopt}) {
      std::snprintf(buf, sizeof buf, ",%.17g", value);
      out << buf;
    }
    if (with_lyapunov) {
      std::snprintf(buf, sizeof buf, ",%.17g", cp.lhs);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", cp.consensus_gap);
    out << buf;
  }
}

}  // namespace adfs
