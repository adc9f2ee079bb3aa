#include "adfs/objective.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "adfs/rng.hpp"

namespace adfs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kResidualTol = 1e-12;
constexpr double kNoWarm = std::numeric_limits<double>::quiet_NaN();

// h(u) = log(1 + exp(-u)) and derivatives, overflow-safe
double softplus_neg(double u) {
  return u > 0.0 ? std::log1p(std::exp(-u)) : -u + std::log1p(std::exp(u));
}

double softplus_neg_d1(double u) {
  if (u >= 0.0) {
    const double e = std::exp(-u);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(u));
}

double softplus_neg_d2(double u) {
  const double e = std::exp(-std::abs(u));
  return e / ((1.0 + e) * (1.0 + e));
}

double xlogx(double r) { return r > 0.0 ? r * std::log(r) : 0.0; }

}  // namespace

ComponentFunction ComponentFunction::quadratic(double smoothness, Vector center) {
  if (!(smoothness > 0.0)) throw std::invalid_argument("quadratic component: L must be positive");
  ComponentFunction f;
  f.kind_ = LossKind::Quadratic;
  f.vec_ = std::move(center);
  f.smoothness_ = smoothness;
  return f;
}

ComponentFunction ComponentFunction::least_squares(Vector x, double target) {
  ComponentFunction f;
  f.kind_ = LossKind::LeastSquares;
  f.sq_norm_ = x.squaredNorm();
  if (!(f.sq_norm_ > 0.0)) throw std::invalid_argument("least-squares component: zero data vector");
  f.vec_ = std::move(x);
  f.scalar_ = target;
  f.smoothness_ = f.sq_norm_;
  return f;
}

ComponentFunction ComponentFunction::logistic(Vector x, double label) {
  if (label != 1.0 && label != -1.0) throw std::invalid_argument("logistic component: label must be +1 or -1");
  ComponentFunction f;
  f.kind_ = LossKind::LogisticLinear;
  f.sq_norm_ = x.squaredNorm();
  if (!(f.sq_norm_ > 0.0)) throw std::invalid_argument("logistic component: zero data vector");
  f.vec_ = std::move(x);
  f.scalar_ = label;
  f.smoothness_ = f.sq_norm_ / 4.0;
  return f;
}

double ComponentFunction::loss(double s) const {
  if (kind_ == LossKind::LeastSquares) return 0.5 * (s - scalar_) * (s - scalar_);
  return softplus_neg(scalar_ * s);
}

double ComponentFunction::dloss(double s) const {
  if (kind_ == LossKind::LeastSquares) return s - scalar_;
  return scalar_ * softplus_neg_d1(scalar_ * s);
}

double ComponentFunction::d2loss(double s) const {
  if (kind_ == LossKind::LeastSquares) return 1.0;
  return softplus_neg_d2(scalar_ * s);
}

double ComponentFunction::value(const Vector& theta) const {
  if (kind_ == LossKind::Quadratic) return 0.5 * smoothness_ * (theta - vec_).squaredNorm();
  return loss(vec_.dot(theta));
}

Vector ComponentFunction::gradient(const Vector& theta) const {
  if (kind_ == LossKind::Quadratic) return smoothness_ * (theta - vec_);
  return dloss(vec_.dot(theta)) * vec_;
}

void ComponentFunction::add_hessian(const Vector& theta, Matrix& h) const {
  if (kind_ == LossKind::Quadratic) {
    h.diagonal().array() += smoothness_;
    return;
  }
  h.noalias() += d2loss(vec_.dot(theta)) * vec_ * vec_.transpose();
}

ScalarProxResult ComponentFunction::prox_scalar(double eta, double a, double warm) const {
  const double k = eta * sq_norm_;
  ScalarProxResult out;
  if (kind_ == LossKind::LeastSquares) {
    out.s = (a + k * scalar_) / (1.0 + k);
    out.residual = out.s - a + k * dloss(out.s);
    return out;
  }
  // |dloss| < 1, so the root lies in [a - k, a + k]
  double lo = a - k;
  double hi = a + k;
  double s = (std::isfinite(warm) && warm > lo && warm < hi) ? warm : a;
  auto g = [&](double t) { return t - a + k * dloss(t); };
  double gs = g(s);
  const int kMaxNewton = 100;
  while (std::abs(gs) > kResidualTol && out.newton_steps + out.bisection_steps < 400) {
    if (gs < 0.0)
      lo = s;
    else
      hi = s;
    double next = s - gs / (1.0 + k * d2loss(s));
    if (out.newton_steps >= kMaxNewton || !(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
      ++out.bisection_steps;
    } else {
      ++out.newton_steps;
    }
    if (next == s) break;
    s = next;
    gs = g(s);
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(s))) break;
  }
  // one polishing Newton step when it improves the residual
  const double polished = s - gs / (1.0 + k * d2loss(s));
  const double gp = g(polished);
  if (std::abs(gp) < std::abs(gs)) {
    s = polished;
    gs = gp;
  }
  out.s = s;
  out.residual = gs;
  return out;
}

Vector ComponentFunction::prox(double eta, const Vector& x, double* warm) const {
  if (!(eta > 0.0)) throw std::invalid_argument("prox: step must be positive");
  if (kind_ == LossKind::Quadratic)
    return (x + eta * smoothness_ * vec_) / (1.0 + eta * smoothness_);
  const double a = vec_.dot(x);
  const ScalarProxResult r = prox_scalar(eta, a, warm ? *warm : kNoWarm);
  if (warm) *warm = r.s;
  return x - eta * dloss(r.s) * vec_;
}

double ComponentFunction::conjugate_coef(double k) const {
  if (kind_ == LossKind::LeastSquares) return 0.5 * k * k + k * scalar_;
  const double r = -scalar_ * k;
  const double slack = 1e-10;
  if (r < -slack || r > 1.0 + slack) return kInf;
  const double rc = std::clamp(r, 0.0, 1.0);
  return xlogx(rc) + xlogx(1.0 - rc);
}

double ComponentFunction::conjugate(const Vector& u) const {
  if (kind_ == LossKind::Quadratic) return u.squaredNorm() / (2.0 * smoothness_) + vec_.dot(u);
  const double k = vec_.dot(u) / sq_norm_;
  if ((u - k * vec_).norm() > 1e-9 * (1.0 + u.norm())) return kInf;
  return conjugate_coef(k);
}

Vector ComponentFunction::prox_conjugate(double eta, const Vector& u, double* warm) const {
  if (!(eta > 0.0)) throw std::invalid_argument("prox_conjugate: step must be positive");
  return u - eta * prox(1.0 / eta, u / eta, warm);
}

double ComponentFunction::prox_conjugate_coef(double eta, double xu, double* warm) const {
  if (kind_ == LossKind::Quadratic) throw std::logic_error("prox_conjugate_coef: linear kinds only");
  if (!(eta > 0.0)) throw std::invalid_argument("prox_conjugate: step must be positive");
  const ScalarProxResult r = prox_scalar(1.0 / eta, xu / eta, warm ? *warm : kNoWarm);
  if (warm) *warm = r.s;
  return dloss(r.s);
}

void ComponentFunction::check_tilde_step(double eta_tilde) const {
  if (!(eta_tilde > 0.0)) throw std::invalid_argument("prox_conjugate_tilde: step must be positive");
  if (eta_tilde > (1.0 - 1e-9) * smoothness_)
    throw std::invalid_argument("prox_conjugate_tilde: step must stay below the component smoothness");
}

Vector ComponentFunction::prox_conjugate_tilde(double eta_tilde, const Vector& z, double* warm) const {
  check_tilde_step(eta_tilde);
  const double c = 1.0 / eta_tilde - 1.0 / smoothness_;
  const Vector inner = prox(c, z / eta_tilde, warm);
  return (z - eta_tilde * inner) / (1.0 - eta_tilde / smoothness_);
}

double ComponentFunction::prox_conjugate_tilde_coef(double eta_tilde, double xz, double* warm) const {
  if (kind_ == LossKind::Quadratic) throw std::logic_error("prox_conjugate_tilde_coef: linear kinds only");
  check_tilde_step(eta_tilde);
  const double c = 1.0 / eta_tilde - 1.0 / smoothness_;
  // z - eta_tilde * prox_{cf}(z / eta_tilde) collapses to (1 - eta_tilde / L) dl(s) X
  const ScalarProxResult r = prox_scalar(c, xz / eta_tilde, warm ? *warm : kNoWarm);
  if (warm) *warm = r.s;
  return dloss(r.s);
}

double NodeObjective::kappa() const {
  double total = 0.0;
  for (const ComponentFunction& f : components) total += f.smoothness();
  return total / sigma;
}

std::size_t ProblemInstance::num_components() const {
  std::size_t total = 0;
  for (const NodeObjective& node : nodes) total += node.components.size();
  return total;
}

std::vector<double> ProblemInstance::sigmas() const {
  std::vector<double> out;
  out.reserve(nodes.size());
  for (const NodeObjective& node : nodes) out.push_back(node.sigma);
  return out;
}

std::vector<std::vector<double>> ProblemInstance::leaf_smoothness() const {
  std::vector<std::vector<double>> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (const ComponentFunction& f : nodes[i].components) out[i].push_back(f.smoothness());
  return out;
}

double ProblemInstance::total_sigma() const {
  double s = 0.0;
  for (const NodeObjective& node : nodes) s += node.sigma;
  return s;
}

double ProblemInstance::value(const Vector& theta) const {
  long double total = 0.5L * total_sigma() * theta.squaredNorm();
  for (const NodeObjective& node : nodes)
    for (const ComponentFunction& f : node.components) total += f.value(theta);
  return static_cast<double>(total);
}

Vector ProblemInstance::gradient(const Vector& theta) const {
  std::vector<long double> acc(static_cast<std::size_t>(dim), 0.0L);
  auto add = [&](const Vector& g) {
    for (Eigen::Index k = 0; k < dim; ++k) acc[static_cast<std::size_t>(k)] += g[k];
  };
  add(total_sigma() * theta);
  for (const NodeObjective& node : nodes)
    for (const ComponentFunction& f : node.components) add(f.gradient(theta));
  Vector g(dim);
  for (Eigen::Index k = 0; k < dim; ++k) g[k] = static_cast<double>(acc[static_cast<std::size_t>(k)]);
  return g;
}

Matrix ProblemInstance::hessian(const Vector& theta) const {
  Matrix h = Matrix::Identity(dim, dim) * total_sigma();
  for (const NodeObjective& node : nodes)
    for (const ComponentFunction& f : node.components) f.add_hessian(theta, h);
  return h;
}

ProblemInstance generate_synthetic(std::size_t n, std::size_t m, Eigen::Index d, double sigma,
                                   std::uint64_t seed) {
  if (n == 0 || d <= 0 || !(sigma > 0.0))
    throw std::invalid_argument("generate_synthetic: n, d and sigma must be positive");
  if (m % 2 != 0) throw std::invalid_argument("generate_synthetic: m must be even for balanced classes");
  ProblemInstance p;
  p.dim = d;
  p.seed = seed;
  p.nodes.resize(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    p.nodes[i].sigma = sigma;
    p.nodes[i].components.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double label = (k % 2 == 0) ? 1.0 : -1.0;
      Vector x(d);
      for (Eigen::Index c = 0; c < d; ++c) x[c] = label + rng.normal();
      p.nodes[i].components.push_back(ComponentFunction::logistic(std::move(x), label));
    }
  }
  return p;
}

ReferenceSolution reference_minimizer(const ProblemInstance& p, double tol, int max_iterations) {
  ReferenceSolution out;
  out.theta = Vector::Zero(p.dim);
  double value = p.value(out.theta);
  Vector g = p.gradient(out.theta);
  for (; out.iterations < max_iterations && g.norm() > tol; ++out.iterations) {
    const Vector step = p.hessian(out.theta).ldlt().solve(g);
    double t = 1.0;
    Vector candidate = out.theta - step;
    double candidate_value = p.value(candidate);
    // Armijo backtracking; near the optimum the full step is always taken
    while (candidate_value > value - 1e-4 * t * g.dot(step) && t > 1e-10) {
      t *= 0.5;
      candidate = out.theta - t * step;
      candidate_value = p.value(candidate);
    }
    if (t <= 1e-10) candidate = out.theta - step;
    const Vector next_g = p.gradient(candidate);
    if (next_g.norm() >= g.norm() && t <= 1e-10) break;
    out.theta = candidate;
    value = p.value(out.theta);
    g = next_g;
  }
  out.value = p.value(out.theta);
  out.grad_norm = g.norm();
  return out;
}

void write_dataset(std::ostream& out, const ProblemInstance& p) {
  out << "node_id,label";
  for (Eigen::Index c = 0; c < p.dim; ++c) out << ",x_" << (c + 1);
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < p.nodes.size(); ++i)
    for (const ComponentFunction& f : p.nodes[i].components) {
      if (f.kind() != LossKind::LogisticLinear)
        throw std::invalid_argument("write_dataset: only logistic components can be exported");
      out << i << ',' << static_cast<int>(f.label());
      for (Eigen::Index c = 0; c < p.dim; ++c) out << ',' << f.data()[c];
      out << '\n';
    }
}

ProblemInstance read_dataset(std::istream& in, double sigma) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset: empty input");
  const auto columns = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  if (columns < 2 || line.rfind("node_id,label", 0) != 0)
    throw std::invalid_argument("dataset: header must be node_id,label,x_1..x_d");
  ProblemInstance p;
  p.dim = columns - 1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(fields, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::invalid_argument("dataset row " + std::to_string(row) + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<Eigen::Index>(values.size()) != p.dim + 2)
      throw std::invalid_argument("dataset row " + std::to_string(row) + ": wrong column count");
    if (values[0] < 0.0 || values[0] != std::floor(values[0]))
      throw std::invalid_argument("dataset row " + std::to_string(row) + ": bad node id");
    const auto node = static_cast<std::size_t>(values[0]);
    if (node >= p.nodes.size()) {
      p.nodes.resize(node + 1);
      for (NodeObjective& n : p.nodes) n.sigma = sigma;
    }
    Vector x(p.dim);
    for (Eigen::Index c = 0; c < p.dim; ++c) x[c] = values[static_cast<std::size_t>(c + 2)];
    p.nodes[node].components.push_back(ComponentFunction::logistic(std::move(x), values[1]));
  }
  for (NodeObjective& n : p.nodes) n.sigma = sigma;
  if (p.nodes.empty()) throw std::invalid_argument("dataset: no samples");
  return p;
}

ProblemInstance load_dataset_file(const std::string& path, double sigma) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset file: " + path);
  return read_dataset(in, sigma);
}

}  // namespace adfs
