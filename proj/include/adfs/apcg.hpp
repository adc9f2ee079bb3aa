#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "adfs/linalg.hpp"

namespace adfs {

/// Composite problem min f(x) + sum_i psi_i(x_i) over block coordinates.
///
/// Each coordinate is one row of a `num_coords x block` matrix.
struct ApcgProblem {
  using Gradient = std::function<Vector(std::size_t i, const NodeMatrix& y)>;
  using Prox = std::function<Vector(double eta, const Vector& z)>;
  using Objective = std::function<double(const NodeMatrix& x)>;

  std::size_t num_coords = 0;
  Eigen::Index block = 1;
  Gradient grad_coord;
  std::vector<double> smoothness;  // M_i
  double sigma_A = 0.0;
  std::vector<double> R;  // e_i^T A^+ A e_i
  std::vector<Prox> prox; // empty entry: psi_i = 0
  std::vector<double> p;
  /// Optional: full objective and the projector A^+A, used only for traces.
  Objective objective;
  Matrix projector;

  bool has_prox(std::size_t i) const { return i < prox.size() && static_cast<bool>(prox[i]); }
  /// Throws std::invalid_argument when any invariant fails.
  void validate() const;
};

/// max_i sqrt(M_i R_i) / p_i
double compute_S(const ApcgProblem& prob);

enum class SequenceMode { StronglyConvex, General, Nonsmooth };

/// Coefficients of one iteration t -> t+1.
struct ApcgCoefficients {
  double a = 0.0;        // a_{t+1}
  double A_next = 0.0;   // A_{t+1}; 0 in strongly convex mode (kept as log)
  double B_next = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double step = 0.0;     // a_{t+1} / B_{t+1}; eta_i = step / p_i
};

/// Generator for (a_t, A_t, B_t, alpha_t, beta_t).
///
/// In strongly convex mode A_t = (1 - rho)^{-t} overflows quickly, so only
/// log A_t is tracked and the coefficients are the constants rho and rho / sigma_A.
class ApcgSequences {
 public:
  ApcgSequences(SequenceMode mode, double S, double sigma_A, double A0 = 0.0, double B0 = 1.0);

  ApcgCoefficients next();

  SequenceMode mode() const { return mode_; }
  double S() const { return S_; }
  double sigma_A() const { return sigma_A_; }
  double rho() const { return rho_; }
  std::size_t t() const { return t_; }
  /// A_t and B_t; in strongly convex mode these are (1 - rho)^{-t} and sigma_A A_t.
  double A() const;
  double B() const;
  double log_A() const { return log_A_; }

 private:
  SequenceMode mode_;
  double S_;
  double sigma_A_;
  double rho_ = 0.0;
  double A_ = 0.0;
  double B_ = 1.0;
  double log_A_ = 0.0;
  std::size_t t_ = 0;
};

/// Sequence trace A_t, alpha_t for the sigma_A = 0, B = 1, A_0 = 0 recursion.
std::vector<ApcgCoefficients> nonsmooth_sequences(double S, std::size_t T);

/// min_i (1 - beta - alpha R_i / p_i); must be >= -1e-12 for the rate to hold.
double admissibility_margin(const ApcgProblem& prob, double alpha, double beta);

struct ApcgState {
  NodeMatrix x;
  NodeMatrix v;
};

/// One iteration of the generalized method on coordinate i.
void apcg_step(const ApcgProblem& prob, ApcgState& state, const ApcgCoefficients& c, std::size_t i);

struct ApcgRunOptions {
  SequenceMode mode = SequenceMode::StronglyConvex;
  std::uint64_t seed = 0;
  /// When nonempty, coordinates are taken from here instead of the sampler.
  std::vector<std::size_t> coords;
  std::optional<NodeMatrix> x0;
  std::optional<NodeMatrix> v0;
  std::optional<NodeMatrix> theta_star;
  double F_star = 0.0;
  std::size_t record_every = 1;
  bool keep_states = false;
  /// Overrides compute_S; must not be smaller.
  std::optional<double> S;
  /// General mode only.
  double A0 = 0.0;
  double B0 = 1.0;
};

struct ApcgTracePoint {
  std::size_t t = 0;
  double distance = 0.0;  // ||v_t - theta*||^2 in the A^+A semi-norm
  double gap = 0.0;       // F(x_t) - F(theta*)
  double log_A = 0.0;
  double B_over_A = 0.0;
  double A = 0.0;  // infinite once (1 - rho)^{-t} overflows
  double B = 0.0;
  /// (B_t distance + 2 A_t gap) / A_t
  double scaled_lyapunov() const { return B_over_A * distance + 2.0 * gap; }
  double lyapunov() const { return B * distance + 2.0 * A * gap; }
};

struct ApcgTrace {
  std::vector<std::size_t> coords;
  std::vector<ApcgTracePoint> points;
  std::vector<ApcgState> states;  // when keep_states
  ApcgState final_state;
  double S = 0.0;
  double rho = 0.0;
};

ApcgTrace run_apcg(const ApcgProblem& prob, std::size_t T, const ApcgRunOptions& options);

}  // namespace adfs
