#pragma once

#include <cstddef>
#include <stdexcept>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "adfs/linalg.hpp"

namespace adfs {

/// Raised when a computation reaches a state its preconditions rule out
/// (disconnected augmented graph, unset weights, degenerate step sizes).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;  // u < v after normalization
};

/// Undirected simple graph of physical machines.
class CommGraph {
 public:
  CommGraph() = default;
  /// Throws std::invalid_argument on self-loops, duplicates or out-of-range ids.
  CommGraph(std::size_t num_nodes, std::vector<Edge> edges);

  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
  std::size_t degree(std::size_t i) const { return adjacency_[i].size(); }
  std::size_t num_components() const;
  bool connected() const { return num_components() == 1; }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// 4-neighbour rows x cols grid, nodes numbered row-major.
CommGraph build_grid(std::size_t rows, std::size_t cols);

/// Line-oriented text: `nodes N` once, then `edge I J` records. `#` starts a comment.
CommGraph parse_graph(std::istream& in);
CommGraph load_graph_file(const std::string& path);
void write_graph(std::ostream& out, const CommGraph& g);

enum class EdgeKind { Communication, Computation };

struct AugmentedEdge {
  std::size_t u = 0;  // lower node index, carries +mu in the incidence column
  std::size_t v = 0;  // higher node index, carries -mu
  EdgeKind kind = EdgeKind::Communication;
  std::size_t center = 0;  // computation edges: owning machine
  std::size_t leaf = 0;    // computation edges: global leaf index
};

/// Communication graph where every machine i is a star whose m_i leaves hold
/// the local loss components.
///
/// Node layout: centers 0..n-1, then the leaves of machine 0, machine 1, ...
/// Edge layout: communication edges in base order, then one computation edge
/// per leaf in the same order as the leaves.
class AugmentedGraph {
 public:
  AugmentedGraph() = default;
  /// `leaf_smoothness[i]` lists L_j for the components of machine i.
  AugmentedGraph(CommGraph base, std::vector<double> sigma,
                 const std::vector<std::vector<double>>& leaf_smoothness);

  const CommGraph& base() const { return base_; }
  std::size_t num_centers() const { return base_.num_nodes(); }
  std::size_t num_leaves() const { return num_leaves_; }
  std::size_t num_nodes() const { return num_centers() + num_leaves_; }
  std::size_t num_comm_edges() const { return base_.num_edges(); }
  std::size_t num_edges() const { return edges_.size(); }

  const std::vector<AugmentedEdge>& edges() const { return edges_; }
  const AugmentedEdge& edge(std::size_t e) const { return edges_[e]; }
  bool is_computation(std::size_t e) const { return e >= num_comm_edges(); }

  std::size_t local_size(std::size_t i) const { return m_[i]; }
  const std::vector<std::size_t>& m_per_node() const { return m_; }
  std::size_t leaf_offset(std::size_t i) const { return leaf_offset_[i]; }
  std::size_t leaf_node(std::size_t leaf) const { return num_centers() + leaf; }
  std::size_t leaf_center(std::size_t leaf) const { return leaf_center_[leaf]; }
  std::size_t leaf_edge(std::size_t leaf) const { return num_comm_edges() + leaf; }

  /// Sigma: sigma_i on centers, L_j on leaves.
  const std::vector<double>& sigma_diag() const { return sigma_diag_; }
  double sigma_center(std::size_t i) const { return sigma_diag_[i]; }
  double leaf_smoothness(std::size_t leaf) const { return sigma_diag_[leaf_node(leaf)]; }

  /// Squared edge weights mu_e^2; all zero until assigned.
  const std::vector<double>& mu_sq() const { return mu_sq_; }
  void set_mu_sq(std::vector<double> mu_sq);
  bool weights_assigned() const;

  /// kappa_i = sigma_i^{-1} sum_{j in V_i} L_j
  double kappa(std::size_t i) const;

  /// Materialized incidence matrix A (|V+| x |E+|), column e = mu_e (e_u - e_v).
  Matrix incidence() const;
  /// Communication block: n x |E| weighted incidence restricted to centers.
  Matrix comm_incidence() const;

 private:
  CommGraph base_;
  std::size_t num_leaves_ = 0;
  std::vector<std::size_t> m_;
  std::vector<std::size_t> leaf_offset_;
  std::vector<std::size_t> leaf_center_;
  std::vector<AugmentedEdge> edges_;
  std::vector<double> sigma_diag_;
  std::vector<double> mu_sq_;
};

struct LaplacianSpectrum {
  Vector eigenvalues;  // ascending
  double lambda_min_plus = kNaN;
  double lambda_max = kNaN;
  std::size_t zero_multiplicity = 0;
};

Matrix laplacian_matrix(const CommGraph& g, std::span<const double> weights);

/// Dense spectrum of the weighted Laplacian, eigenvalues ascending.
/// lambda_min_plus is the second smallest eigenvalue; zero_multiplicity counts
/// eigenvalues at most 1e-10 * max(1, lambda_max) in magnitude.
LaplacianSpectrum laplacian_spectrum(const CommGraph& g, std::span<const double> weights);

struct SpectralReport {
  /// weighted communication Laplacian L = A P_comm A^T
  double lambda_min_plus_L = kNaN;
  double lambda_max_L = kNaN;
  double gamma = kNaN;  // lambda_min_plus_L / lambda_max_L
  /// L~ = Sigma^{-1/2} A A^T Sigma^{-1/2}; same nonzero spectrum as A^T Sigma^{-1} A
  double lambda_min_plus_Ltilde = kNaN;
  double lambda_max_plus_ASigma2A = kNaN;
  /// min over communication edges of lambda_min_plus_L n^2 / (R_ij |E|^2)
  double gamma_tilde = kNaN;
  std::vector<double> R;  // per augmented edge
};

/// Fills the communication-Laplacian fields using the communication mu^2 as weights.
void fill_comm_spectrum(const AugmentedGraph& g, SpectralReport& spec);

/// Communication edges get mu^2 = 1/2; virtual edge (i,j) gets
/// mu^2 = lambda_min_plus(L) L_j / (sigma (1 + kappa_i)).
/// Throws InvalidState when lambda_min_plus(L) is not positive (n > 1).
void assign_mu(AugmentedGraph& g, const SpectralReport& spec, double sigma,
               std::span<const double> kappa_i);

/// Weights for the non-smooth variant: 1/2 on communication edges and
/// lambda_min_plus(L) / (1 + m_i) on virtual edges.
void assign_mu_nonsmooth(AugmentedGraph& g, const SpectralReport& spec);

/// R_e = e_e^T A^+ A e_e for every augmented edge. Virtual edges lie on no
/// cycle, so only the communication block needs a factorization.
std::vector<double> edge_projection_coeffs(const AugmentedGraph& g);
/// Same quantity from the pseudoinverse of the fully materialized A.
std::vector<double> edge_projection_coeffs_dense(const AugmentedGraph& g);

/// Number of eigenvalues of the pencil (A A^T, diag(d)) strictly below lambda.
///
/// Leaves are eliminated exactly (each has degree one), leaving an n x n
/// Schur complement whose inertia is read off a dense eigendecomposition.
std::size_t pencil_count_below(const AugmentedGraph& g, std::span<const double> d, double lambda);

/// lambda_min_plus(L~) and lambda_max(A^T Sigma^{-2} A) by bisection on
/// pencil_count_below. Cost is O(bisection steps * (|V+| + n^3)).
void fill_augmented_spectrum(const AugmentedGraph& g, SpectralReport& spec);

/// Dense reference: eigendecomposition of the materialized L~ and
/// Sigma^{-1} A A^T Sigma^{-1}. Intended for |V+| up to a few hundred.
void fill_augmented_spectrum_dense(const AugmentedGraph& g, SpectralReport& spec);

/// Full pipeline for the smooth algorithm: communication weights, spectrum
/// of L, virtual weights, projection coefficients, augmented spectrum.
SpectralReport configure_smooth(AugmentedGraph& g);
/// Same for the non-smooth variant (virtual weights from assign_mu_nonsmooth).
SpectralReport configure_nonsmooth(AugmentedGraph& g);

/// lambda_min_plus(L) / (2 sigma (1 + kappa)), sigma = max sigma_i, kappa = max kappa_i.
double augmented_lemma_bound(const AugmentedGraph& g, const SpectralReport& spec);

}  // namespace adfs
