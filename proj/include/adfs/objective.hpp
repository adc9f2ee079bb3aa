#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "adfs/linalg.hpp"

namespace adfs {

enum class LossKind {
  Quadratic,       // (L/2)||theta - c||^2
  LeastSquares,    // (1/2)(X^T theta - b)^2
  LogisticLinear,  // log(1 + exp(-y X^T theta))
};

/// Scalar root finder used by every one-dimensional proximal problem.
///
/// Solves s - a + k * dl(s) = 0 for nondecreasing dl with |dl| <= bound,
/// which brackets the root in [a - k*bound, a + k*bound].
struct ScalarProxResult {
  double s = 0.0;
  double residual = 0.0;
  int newton_steps = 0;
  int bisection_steps = 0;
};

/// One term f_{i,j} of a local finite sum.
class ComponentFunction {
 public:
  static ComponentFunction quadratic(double smoothness, Vector center);
  static ComponentFunction least_squares(Vector x, double target);
  static ComponentFunction logistic(Vector x, double label);

  LossKind kind() const { return kind_; }
  bool is_linear() const { return kind_ != LossKind::Quadratic; }
  Eigen::Index dim() const { return vec_.size(); }
  double smoothness() const { return smoothness_; }
  /// X for linear kinds, c for the quadratic kind.
  const Vector& data() const { return vec_; }
  /// y for logistic, b for least squares, unused for quadratic.
  double label() const { return scalar_; }

  double value(const Vector& theta) const;
  Vector gradient(const Vector& theta) const;
  void add_hessian(const Vector& theta, Matrix& h) const;

  /// prox_{eta f}(x). `warm` (linear kinds) carries X^T result between calls.
  Vector prox(double eta, const Vector& x, double* warm = nullptr) const;
  ScalarProxResult prox_scalar(double eta, double a, double warm) const;

  /// Fenchel conjugate; +infinity outside the domain.
  double conjugate(const Vector& u) const;
  /// prox_{eta f*}(u) through the Moreau identity.
  Vector prox_conjugate(double eta, const Vector& u, double* warm = nullptr) const;

  /// prox_{eta_tilde g}(z) where g(u) = f*(u) - ||u||^2 / (2L), evaluated from
  /// the primal prox only. Requires eta_tilde <= (1 - 1e-9) L.
  Vector prox_conjugate_tilde(double eta_tilde, const Vector& z, double* warm = nullptr) const;
  /// Linear kinds: the result of prox_conjugate_tilde is k X; returns k given X^T z.
  double prox_conjugate_tilde_coef(double eta_tilde, double xz, double* warm = nullptr) const;
  /// Linear kinds: the result of prox_conjugate is k X; returns k given X^T u.
  double prox_conjugate_coef(double eta, double xu, double* warm = nullptr) const;
  /// Linear kinds: f*(k X).
  double conjugate_coef(double k) const;

 private:
  double loss(double s) const;
  double dloss(double s) const;
  double d2loss(double s) const;
  void check_tilde_step(double eta_tilde) const;

  LossKind kind_ = LossKind::Quadratic;
  Vector vec_;
  double scalar_ = 0.0;
  double smoothness_ = 0.0;
  double sq_norm_ = 0.0;
};

/// f_i(theta) = sum_j f_{i,j}(theta) + (sigma_i / 2) ||theta||^2
struct NodeObjective {
  std::vector<ComponentFunction> components;
  double sigma = 1.0;

  double kappa() const;
};

struct ProblemInstance {
  std::vector<NodeObjective> nodes;
  Eigen::Index dim = 0;
  std::uint64_t seed = 0;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_components() const;
  std::vector<double> sigmas() const;
  std::vector<std::vector<double>> leaf_smoothness() const;
  double total_sigma() const;

  double value(const Vector& theta) const;
  Vector gradient(const Vector& theta) const;
  Matrix hessian(const Vector& theta) const;
};

/// Balanced two-class Gaussian data: m/2 samples from N(-1, I) labelled -1
/// and m/2 from N(+1, I) labelled +1 on every node, logistic losses.
/// Throws std::invalid_argument for odd or nonpositive sizes.
ProblemInstance generate_synthetic(std::size_t n, std::size_t m, Eigen::Index d, double sigma,
                                   std::uint64_t seed);

struct ReferenceSolution {
  Vector theta;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// Damped Newton on the full objective until ||grad|| <= tol.
ReferenceSolution reference_minimizer(const ProblemInstance& p, double tol = 1e-12,
                                      int max_iterations = 200);

/// CSV with header node_id,label,x_1..x_d; logistic components only.
void write_dataset(std::ostream& out, const ProblemInstance& p);
ProblemInstance read_dataset(std::istream& in, double sigma);
ProblemInstance load_dataset_file(const std::string& path, double sigma);

}  // namespace adfs
