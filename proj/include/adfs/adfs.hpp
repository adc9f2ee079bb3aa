#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "adfs/apcg.hpp"
#include "adfs/graph.hpp"
#include "adfs/objective.hpp"
#include "adfs/rng.hpp"
#include "adfs/simtime.hpp"

namespace adfs {

/// Raised by the run loops when suboptimality keeps exceeding 10x its initial value.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParameterReport {
  double kappa_s = 0.0;
  double kappa_b = kNaN;  // needs the data; see batch_condition
  double kappa_min = 0.0;
  std::vector<double> kappa_i;
  double S_comp = 0.0;
  double r_kappa = 0.0;
  double gamma_tilde = kNaN;
  double Delta_p = 1.0;
  double c_tau = kNaN;
  /// Smallest S allowed by the sampling bound alone.
  double S_tight = 0.0;
  /// Virtual edges whose step would exceed kMaxStepRatio L_j at S_tight; S is raised to fix them.
  std::vector<std::size_t> step_violations;
  /// Edges with 1 - rho - rho R / p < -1e-12.
  std::vector<std::size_t> admissibility_violations;
  double admissibility_margin = 0.0;
  /// p_comp <= p_comm_max: the time bound then needs tau > 1.
  bool comm_dominates = false;
};

/// Largest eta_tilde / L_j that derive_parameters accepts on a virtual edge.
inline constexpr double kMaxStepRatio = 0.999;

struct RunParameters {
  double S = 0.0;
  double rho = 0.0;
  double sigma_A = 0.0;
  std::vector<double> eta_tilde;  // per augmented edge
  std::vector<double> p;          // per augmented edge
  double p_comm = 0.0;
  double p_comp = 0.0;
  double p_comm_max = 0.0;
  ParameterReport report;
};

/// Parameters for the smooth algorithm. `p_comm` empty selects the default balance between the two kinds of edges.
RunParameters derive_parameters(const AugmentedGraph& g, const SpectralReport& spec,
                                std::optional<double> p_comm = std::nullopt);

/// max_i lambda_max(Hessian bound of the local sum) / sigma_i
double batch_condition(const ProblemInstance& p);

std::string format_parameters(const RunParameters& params, const SpectralReport& spec);

/// Shared edge stream: every node seeds the same generator.
class Schedule {
 public:
  Schedule(std::span<const double> p, std::uint64_t seed);
  std::size_t next() { return sampler_(rng_); }
  std::uint64_t seed() const { return seed_; }
  const DiscreteSampler& sampler() const { return sampler_; }

 private:
  std::uint64_t seed_;
  Rng rng_;
  DiscreteSampler sampler_;
};

Schedule make_schedule(const RunParameters& params, std::uint64_t seed);

/// Reference implementation: every row is updated at every iteration.
class DenseAdfs {
 public:
  DenseAdfs(const AugmentedGraph& g, const ProblemInstance& problem, const SpectralReport& spec,
            const RunParameters& params);

  void step(std::size_t edge);
  const NodeMatrix& x() const { return x_; }
  const NodeMatrix& v() const { return v_; }
  std::size_t iteration() const { return t_; }

 private:
  const AugmentedGraph& g_;
  const ProblemInstance& problem_;
  const SpectralReport& spec_;
  const RunParameters& params_;
  NodeMatrix x_, v_;
  std::vector<double> warm_;
  std::size_t t_ = 0;
};

/// Rows untouched by an update are caught up lazily by powers of the 2x2
/// mixing map. Leaves of linear components can be stored as one coefficient
/// along X_{i,j}.
class LazyAdfs {
 public:
  LazyAdfs(const AugmentedGraph& g, const ProblemInstance& problem, const SpectralReport& spec,
           const RunParameters& params, bool scalar_leaves = true, std::size_t power_cache = 4096);

  void step(std::size_t edge);
  std::size_t iteration() const { return t_; }
  bool scalar_leaves() const { return scalar_; }

  /// Catch up every center row to the current iteration.
  void sync_centers();
  /// Sigma^{-1} v restricted to center i (after sync_centers).
  Vector center_primal(std::size_t i) const;
  /// Current state of all rows, without mutating the lazy representation.
  NodeMatrix materialize_x() const;
  NodeMatrix materialize_v() const;

  /// (a_k, b_k) with M^k = [[a_k, b_k], [b_k, a_k]].
  std::pair<double, double> mixing_power(std::size_t k) const;

 private:
  void catch_up_center(std::size_t i);
  void catch_up_leaf(std::size_t leaf);
  const ComponentFunction& component(std::size_t leaf) const;

  const AugmentedGraph& g_;
  const ProblemInstance& problem_;
  const SpectralReport& spec_;
  const RunParameters& params_;
  bool scalar_;
  NodeMatrix cx_, cv_;  // center rows
  NodeMatrix lx_, lv_;  // leaf rows (vector storage)
  Vector lxc_, lvc_;    // leaf coefficients (scalar storage)
  std::vector<std::size_t> center_last_, leaf_last_;
  std::vector<double> warm_;
  std::vector<std::pair<double, double>> powers_;
  std::size_t t_ = 0;
};

struct AdfsCheckpoint {
  std::size_t iteration = 0;
  double idealized_time = 0.0;
  double primal_subopt = 0.0;
  double consensus_gap = 0.0;
  double lhs = kNaN;  // Lyapunov left-hand side
  double rhs = kNaN;
};

struct AdfsRunOptions {
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0: max(1, T / 1000)
  std::vector<std::size_t> extra_checkpoints;
  double F_star = 0.0;
  std::optional<Vector> theta_star;
  bool track_lyapunov = false;  // only honoured for at most 200 augmented nodes
  bool lazy = true;
  bool scalar_leaves = true;
  std::optional<SimConfig> time_model;
  /// Stop at the first checkpoint with primal_subopt <= target.
  double target = 0.0;
  bool divergence_check = true;
};

struct AdfsTrace {
  std::vector<AdfsCheckpoint> checkpoints;
  Vector theta;  // final center average
  bool reached_target = false;
  std::size_t iterations = 0;
};

AdfsTrace run_adfs(const ProblemInstance& problem, const AugmentedGraph& g, const SpectralReport& spec,
                   const RunParameters& params, std::size_t T, const AdfsRunOptions& options);

/// Node-variable dual value F*(u) = sum_i ||u_i||^2 / (2 sigma_i) + sum_leaves f*(u_leaf).
double dual_value(const AugmentedGraph& g, const ProblemInstance& problem, const NodeMatrix& u);

/// v* = grad F(1 theta*): sigma_i theta* on centers, grad f_{i,j}(theta*) on leaves.
NodeMatrix dual_optimum(const AugmentedGraph& g, const ProblemInstance& problem, const Vector& theta_star);

/// The dual problem in edge variables, solved by the generic method.
ApcgProblem make_dual_apcg_problem(const AugmentedGraph& g, const ProblemInstance& problem,
                                   const SpectralReport& spec, const RunParameters& params);

struct NsParameters {
  double S = 0.0;
  std::vector<double> p;
  std::vector<double> eta;  // mu^2 / p per edge
  double p_comm = 0.0;
  double p_comp = 0.0;
};

/// Probabilities for the non-smooth variant; `g` must be set up by configure_nonsmooth.
NsParameters derive_ns_parameters(const AugmentedGraph& g, const SpectralReport& spec,
                                  std::optional<double> p_comm = std::nullopt);

class NsAdfs {
 public:
  NsAdfs(const AugmentedGraph& g, const ProblemInstance& problem, const SpectralReport& spec,
         const NsParameters& params);

  void step(std::size_t edge);
  const NodeMatrix& x() const { return x_; }
  const NodeMatrix& v() const { return v_; }
  std::size_t iteration() const { return seq_.t(); }
  double A() const { return seq_.A(); }

 private:
  const AugmentedGraph& g_;
  const ProblemInstance& problem_;
  const SpectralReport& spec_;
  const NsParameters& params_;
  ApcgSequences seq_;
  NodeMatrix x_, v_;
};

struct NsCheckpoint {
  std::size_t iteration = 0;
  double idealized_time = 0.0;
  double dual_subopt = 0.0;
  double primal_subopt = 0.0;  // center average of Sigma^{-1} v
};

struct NsRunOptions {
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;
  std::vector<std::size_t> extra_checkpoints;
  double F_star = 0.0;
  std::optional<SimConfig> time_model;
  bool divergence_check = true;
};

std::vector<NsCheckpoint> run_ns_adfs(const ProblemInstance& problem, const AugmentedGraph& g,
                                      const SpectralReport& spec, const NsParameters& params, std::size_t T,
                                      const NsRunOptions& options);

/// iteration,idealized_time,primal_subopt[,dual_lyapunov],consensus_gap
void write_trace_csv(std::ostream& out, const AdfsTrace& trace, bool with_lyapunov);

}  // namespace adfs
