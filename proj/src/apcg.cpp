#include "adfs/apcg.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "adfs/graph.hpp"
#include "adfs/rng.hpp"

namespace adfs {

void ApcgProblem::validate() const {
  if (num_coords == 0) throw std::invalid_argument("ApcgProblem: no coordinates");
  if (block <= 0) throw std::invalid_argument("ApcgProblem: block width must be positive");
  if (!grad_coord) throw std::invalid_argument("ApcgProblem: missing coordinate gradient");
  if (smoothness.size() != num_coords || R.size() != num_coords || p.size() != num_coords)
    throw std::invalid_argument("ApcgProblem: per-coordinate arrays have the wrong length");
  if (!prox.empty() && prox.size() != num_coords)
    throw std::invalid_argument("ApcgProblem: prox list must be empty or one entry per coordinate");
  if (!(sigma_A >= 0.0)) throw std::invalid_argument("ApcgProblem: sigma_A must be nonnegative");
  double total = 0.0;
  for (std::size_t i = 0; i < num_coords; ++i) {
    if (!(p[i] >= 0.0)) throw std::invalid_argument("ApcgProblem: negative probability");
    if (smoothness[i] > 0.0 && !(p[i] > 0.0))
      throw std::invalid_argument("ApcgProblem: coordinate with M_i > 0 has zero probability");
    if (!(R[i] > 0.0) || R[i] > 1.0 + 1e-9) throw std::invalid_argument("ApcgProblem: R_i must lie in (0, 1]");
    if (has_prox(i) && R[i] < 1.0 - 1e-9)
      throw std::invalid_argument("ApcgProblem: prox term on a coordinate with R_i < 1");
    total += p[i];
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("ApcgProblem: probabilities must sum to 1");
  if (projector.size() != 0 &&
      (projector.rows() != static_cast<Eigen::Index>(num_coords) || projector.cols() != projector.rows()))
    throw std::invalid_argument("ApcgProblem: projector has the wrong shape");
}

double compute_S(const ApcgProblem& prob) {
  if (prob.smoothness.size() != prob.p.size() || prob.R.size() != prob.p.size())
    throw std::invalid_argument("compute_S: per-coordinate arrays have the wrong length");
  double S = 0.0;
  for (std::size_t i = 0; i < prob.p.size(); ++i) {
    if (prob.smoothness[i] == 0.0) continue;
    if (!(prob.p[i] > 0.0)) throw std::invalid_argument("compute_S: zero probability on a smooth coordinate");
    S = std::max(S, std::sqrt(prob.smoothness[i] * prob.R[i]) / prob.p[i]);
  }
  return S;
}

ApcgSequences::ApcgSequences(SequenceMode mode, double S, double sigma_A, double A0, double B0)
    : mode_(mode), S_(S), sigma_A_(sigma_A) {
  if (!(S > 0.0)) throw std::invalid_argument("ApcgSequences: S must be positive");
  switch (mode) {
    case SequenceMode::StronglyConvex:
      if (!(sigma_A > 0.0)) throw std::invalid_argument("ApcgSequences: strongly convex mode needs sigma_A > 0");
      rho_ = std::sqrt(sigma_A) / S;
      if (!(rho_ < 1.0)) throw InvalidState("ApcgSequences: rho >= 1 (sigma_A >= S^2)");
      A_ = 1.0;
      B_ = sigma_A;
      break;
    case SequenceMode::General:
      if (!(A0 >= 0.0) || !(B0 > 0.0)) throw std::invalid_argument("ApcgSequences: need A0 >= 0, B0 > 0");
      if (!(S * S > sigma_A)) throw InvalidState("ApcgSequences: S^2 must exceed sigma_A");
      A_ = A0;
      B_ = B0;
      log_A_ = std::log(A0);
      break;
    case SequenceMode::Nonsmooth:
      sigma_A_ = 0.0;
      A_ = 0.0;
      B_ = 1.0;
      log_A_ = -std::numeric_limits<double>::infinity();
      break;
  }
}

double ApcgSequences::A() const {
  return mode_ == SequenceMode::StronglyConvex ? std::exp(log_A_) : A_;
}

double ApcgSequences::B() const {
  return mode_ == SequenceMode::StronglyConvex ? sigma_A_ * std::exp(log_A_) : B_;
}

ApcgCoefficients ApcgSequences::next() {
  ApcgCoefficients c;
  if (mode_ == SequenceMode::StronglyConvex) {
    c.alpha = rho_;
    c.beta = rho_;
    c.step = rho_ / sigma_A_;
    log_A_ -= std::log1p(-rho_);
    c.A_next = std::exp(log_A_);
    c.B_next = sigma_A_ * c.A_next;
    c.a = c.A_next * rho_;
    ++t_;
    return c;
  }
  const double S2 = S_ * S_;
  if (mode_ == SequenceMode::Nonsmooth) {
    c.a = (1.0 + std::sqrt(1.0 + 4.0 * S2 * A_)) / (2.0 * S2);
  } else {
    // positive root of (S^2 - sigma_A) a^2 - (B + sigma_A A) a - A B = 0
    const double qa = S2 - sigma_A_;
    const double qb = B_ + sigma_A_ * A_;
    c.a = (qb + std::sqrt(qb * qb + 4.0 * qa * A_ * B_)) / (2.0 * qa);
  }
  A_ += c.a;
  B_ += sigma_A_ * c.a;
  log_A_ = std::log(A_);
  c.A_next = A_;
  c.B_next = B_;
  c.alpha = c.a / A_;
  c.beta = sigma_A_ * c.a / B_;
  c.step = c.a / B_;
  ++t_;
  return c;
}

std::vector<ApcgCoefficients> nonsmooth_sequences(double S, std::size_t T) {
  ApcgSequences seq(SequenceMode::Nonsmooth, S, 0.0);
  std::vector<ApcgCoefficients> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) out.push_back(seq.next());
  return out;
}

double admissibility_margin(const ApcgProblem& prob, double alpha, double beta) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < prob.p.size(); ++i)
    if (prob.p[i] > 0.0) margin = std::min(margin, 1.0 - beta - alpha * prob.R[i] / prob.p[i]);
  return margin;
}

void apcg_step(const ApcgProblem& prob, ApcgState& state, const ApcgCoefficients& c, std::size_t i) {
  const double denom = 1.0 - c.alpha * c.beta;
  if (!(denom > 0.0)) throw InvalidState("apcg_step: alpha * beta = 1");
  const auto row = static_cast<Eigen::Index>(i);
  NodeMatrix y = ((1.0 - c.alpha) * state.x + c.alpha * (1.0 - c.beta) * state.v) / denom;
  NodeMatrix w = (1.0 - c.beta) * state.v + c.beta * y;
  const double eta = c.step / prob.p[i];
  Vector z = w.row(row).transpose() - eta * prob.grad_coord(i, y);
  Vector v_new = prob.has_prox(i) ? prob.prox[i](eta, z) : z;
  const Vector delta = v_new - w.row(row).transpose();
  state.v = std::move(w);
  state.v.row(row) = v_new.transpose();
  state.x = std::move(y);
  state.x.row(row) += (c.alpha * prob.R[i] / prob.p[i]) * delta.transpose();
}

namespace {

double seminorm_sq(const ApcgProblem& prob, const NodeMatrix& d) {
  if (prob.projector.size() == 0) return d.squaredNorm();
  const Matrix dm = d;
  return (dm.transpose() * prob.projector * dm).trace();
}

}  // namespace

ApcgTrace run_apcg(const ApcgProblem& prob, std::size_t T, const ApcgRunOptions& options) {
  prob.validate();
  const auto rows = static_cast<Eigen::Index>(prob.num_coords);
  ApcgState state;
  state.x = options.x0 ? *options.x0 : NodeMatrix::Zero(rows, prob.block);
  state.v = options.v0 ? *options.v0 : NodeMatrix::Zero(rows, prob.block);

  ApcgTrace trace;
  trace.S = compute_S(prob);
  if (options.S) {
    if (*options.S < trace.S * (1.0 - 1e-12)) throw std::invalid_argument("run_apcg: S below the sampling bound");
    trace.S = *options.S;
  }
  ApcgSequences seq(options.mode, trace.S, prob.sigma_A, options.A0, options.B0);
  trace.rho = seq.rho();

  const bool tracking = options.theta_star.has_value() && static_cast<bool>(prob.objective);
  auto record = [&](std::size_t t) {
    if (options.keep_states) trace.states.push_back(state);
    if (!tracking) return;
    ApcgTracePoint pt;
    pt.t = t;
    pt.distance = seminorm_sq(prob, state.v - *options.theta_star);
    pt.gap = prob.objective(state.x) - options.F_star;
    pt.log_A = seq.log_A();
    pt.A = seq.A();
    pt.B = seq.B();
    pt.B_over_A = options.mode == SequenceMode::StronglyConvex ? prob.sigma_A : pt.B / pt.A;
    trace.points.push_back(pt);
  };

  const bool explicit_coords = !options.coords.empty();
  if (explicit_coords && options.coords.size() < T)
    throw std::invalid_argument("run_apcg: fewer explicit coordinates than iterations");
  Rng rng(options.seed);
  DiscreteSampler sampler(prob.p);
  const std::size_t every = std::max<std::size_t>(1, options.record_every);
  trace.coords.reserve(T);
  record(0);
  for (std::size_t t = 0; t < T; ++t) {
    const ApcgCoefficients c = seq.next();
    const std::size_t i = explicit_coords ? options.coords[t] : sampler(rng);
    if (i >= prob.num_coords) throw std::invalid_argument("run_apcg: coordinate out of range");
    trace.coords.push_back(i);
    apcg_step(prob, state, c, i);
    if ((t + 1) % every == 0 || t + 1 == T) record(t + 1);
  }
  trace.final_state = std::move(state);
  return trace;
}

}  // namespace adfs
