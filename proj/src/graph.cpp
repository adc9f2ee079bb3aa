#include "adfs/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace adfs {

CommGraph::CommGraph(std::size_t num_nodes, std::vector<Edge> edges)
    : n_(num_nodes), edges_(std::move(edges)), adjacency_(num_nodes) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (Edge& e : edges_) {
    if (e.u >= n_ || e.v >= n_)
      throw std::invalid_argument("CommGraph: edge endpoint out of range");
    if (e.u == e.v) throw std::invalid_argument("CommGraph: self-loop");
    if (e.u > e.v) std::swap(e.u, e.v);
    if (!seen.emplace(e.u, e.v).second)
      throw std::invalid_argument("CommGraph: duplicate edge");
    adjacency_[e.u].push_back(e.v);
    adjacency_[e.v].push_back(e.u);
  }
}

std::size_t CommGraph::num_components() const {
  std::vector<std::size_t> parent(n_);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = n_;
  for (const Edge& e : edges_) {
    const std::size_t a = find(e.u);
    const std::size_t b = find(e.v);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components;
}

CommGraph build_grid(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("build_grid: zero dimension");
  std::vector<Edge> edges;
  auto id = [cols](std::size_t r, std::size_t c) { return r * cols + c; };
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      if (c + 1 < cols) edges.push_back({id(r, c), id(r, c + 1)});
      if (r + 1 < rows) edges.push_back({id(r, c), id(r + 1, c)});
    }
  return CommGraph(rows * cols, std::move(edges));
}

CommGraph parse_graph(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t n = 0;
  bool have_nodes = false;
  std::vector<Edge> edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string keyword;
    if (!(fields >> keyword)) continue;
    auto fail = [&](const std::string& what) {
      throw std::invalid_argument("graph file line " + std::to_string(line_no) + ": " + what);
    };
    if (keyword == "nodes") {
      if (have_nodes) fail("repeated 'nodes' record");
      if (!(fields >> n) || n == 0) fail("expected a positive node count");
      have_nodes = true;
    } else if (keyword == "edge") {
      Edge e;
      if (!(fields >> e.u >> e.v)) fail("expected 'edge I J'");
      edges.push_back(e);
    } else {
      fail("unknown record '" + keyword + "'");
    }
    std::string extra;
    if (fields >> extra) fail("trailing tokens");
  }
  if (!have_nodes) throw std::invalid_argument("graph file: missing 'nodes' record");
  return CommGraph(n, std::move(edges));
}

CommGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open graph file: " + path);
  return parse_graph(in);
}

void write_graph(std::ostream& out, const CommGraph& g) {
  out << "nodes " << g.num_nodes() << '\n';
  for (const Edge& e : g.edges()) out << "edge " << e.u << ' ' << e.v << '\n';
}

AugmentedGraph::AugmentedGraph(CommGraph base, std::vector<double> sigma,
                               const std::vector<std::vector<double>>& leaf_smoothness)
    : base_(std::move(base)) {
  const std::size_t n = base_.num_nodes();
  if (sigma.size() != n || leaf_smoothness.size() != n)
    throw std::invalid_argument("AugmentedGraph: per-node data does not match node count");
  m_.resize(n);
  leaf_offset_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    leaf_offset_[i] = num_leaves_;
    m_[i] = leaf_smoothness[i].size();
    num_leaves_ += m_[i];
  }
  sigma_diag_.reserve(n + num_leaves_);
  for (double s : sigma) {
    if (!(s > 0.0)) throw std::invalid_argument("AugmentedGraph: sigma_i must be positive");
    sigma_diag_.push_back(s);
  }
  leaf_center_.reserve(num_leaves_);
  for (std::size_t i = 0; i < n; ++i)
    for (double l : leaf_smoothness[i]) {
      if (!(l > 0.0)) throw std::invalid_argument("AugmentedGraph: L_j must be positive");
      sigma_diag_.push_back(l);
      leaf_center_.push_back(i);
    }

  edges_.reserve(base_.num_edges() + num_leaves_);
  for (const Edge& e : base_.edges())
    edges_.push_back({e.u, e.v, EdgeKind::Communication, 0, 0});
  for (std::size_t leaf = 0; leaf < num_leaves_; ++leaf)
    edges_.push_back({leaf_center_[leaf], n + leaf, EdgeKind::Computation, leaf_center_[leaf], leaf});
  mu_sq_.assign(edges_.size(), 0.0);
}

void AugmentedGraph::set_mu_sq(std::vector<double> mu_sq) {
  if (mu_sq.size() != edges_.size())
    throw std::invalid_argument("set_mu_sq: one weight per augmented edge required");
  for (double w : mu_sq)
    if (!(w > 0.0)) throw std::invalid_argument("set_mu_sq: weights must be positive");
  mu_sq_ = std::move(mu_sq);
}

bool AugmentedGraph::weights_assigned() const {
  return std::all_of(mu_sq_.begin(), mu_sq_.end(), [](double w) { return w > 0.0; });
}

double AugmentedGraph::kappa(std::size_t i) const {
  double total = 0.0;
  for (std::size_t j = 0; j < m_[i]; ++j) total += leaf_smoothness(leaf_offset_[i] + j);
  return total / sigma_diag_[i];
}

Matrix AugmentedGraph::incidence() const {
  if (!weights_assigned()) throw InvalidState("incidence: edge weights not assigned");
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(num_nodes()),
                          static_cast<Eigen::Index>(num_edges()));
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const double mu = std::sqrt(mu_sq_[e]);
    a(static_cast<Eigen::Index>(edges_[e].u), static_cast<Eigen::Index>(e)) = mu;
    a(static_cast<Eigen::Index>(edges_[e].v), static_cast<Eigen::Index>(e)) = -mu;
  }
  return a;
}

Matrix AugmentedGraph::comm_incidence() const {
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(num_centers()),
                          static_cast<Eigen::Index>(num_comm_edges()));
  for (std::size_t e = 0; e < num_comm_edges(); ++e) {
    const double mu = std::sqrt(mu_sq_[e]);
    a(static_cast<Eigen::Index>(edges_[e].u), static_cast<Eigen::Index>(e)) = mu;
    a(static_cast<Eigen::Index>(edges_[e].v), static_cast<Eigen::Index>(e)) = -mu;
  }
  return a;
}

Matrix laplacian_matrix(const CommGraph& g, std::span<const double> weights) {
  if (weights.size() != g.num_edges())
    throw std::invalid_argument("laplacian_matrix: one weight per edge required");
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Matrix l = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < g.num_edges(); ++k) {
    const auto u = static_cast<Eigen::Index>(g.edges()[k].u);
    const auto v = static_cast<Eigen::Index>(g.edges()[k].v);
    const double w = weights[k];
    if (!(w > 0.0)) throw std::invalid_argument("laplacian_matrix: weights must be positive");
    l(u, u) += w;
    l(v, v) += w;
    l(u, v) -= w;
    l(v, u) -= w;
  }
  return l;
}

LaplacianSpectrum laplacian_spectrum(const CommGraph& g, std::span<const double> weights) {
  LaplacianSpectrum out;
  out.eigenvalues = jacobi_eigenvalues(laplacian_matrix(g, weights));
  const auto n = out.eigenvalues.size();
  out.lambda_max = n > 0 ? out.eigenvalues[n - 1] : 0.0;
  const double zero_tol = 1e-10 * std::max(1.0, out.lambda_max);
  for (Eigen::Index k = 0; k < n; ++k)
    if (std::abs(out.eigenvalues[k]) <= zero_tol) ++out.zero_multiplicity;
  if (n >= 2) out.lambda_min_plus = out.eigenvalues[1];
  return out;
}

void fill_comm_spectrum(const AugmentedGraph& g, SpectralReport& spec) {
  const std::size_t n = g.num_centers();
  if (n == 1) {
    spec.lambda_min_plus_L = kNaN;
    spec.lambda_max_L = 0.0;
    spec.gamma = kNaN;
    return;
  }
  std::vector<double> w(g.mu_sq().begin(), g.mu_sq().begin() + static_cast<long>(g.num_comm_edges()));
  const LaplacianSpectrum ls = laplacian_spectrum(g.base(), w);
  spec.lambda_min_plus_L = ls.lambda_min_plus;
  spec.lambda_max_L = ls.lambda_max;
  spec.gamma = ls.lambda_min_plus / ls.lambda_max;
}

namespace {

double max_sigma(const AugmentedGraph& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.num_centers(); ++i) s = std::max(s, g.sigma_center(i));
  return s;
}

std::vector<double> kappas(const AugmentedGraph& g) {
  std::vector<double> k(g.num_centers());
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = g.kappa(i);
  return k;
}

void assign_comm_half(AugmentedGraph& g, std::vector<double>& mu) {
  for (std::size_t e = 0; e < g.num_comm_edges(); ++e) mu[e] = 0.5;
}

// lambda_min_plus(L) for a single machine is taken as 1: its only role is to
// scale virtual weights, and any positive constant gives a valid star.
double effective_lambda(const AugmentedGraph& g, const SpectralReport& spec) {
  if (g.num_centers() == 1) return 1.0;
  if (!(spec.lambda_min_plus_L > 1e-10))
    throw InvalidState("assign_mu: lambda_min_plus(L) must be positive (graph disconnected?)");
  return spec.lambda_min_plus_L;
}

double gershgorin_bound(const AugmentedGraph& g, std::span<const double> d) {
  std::vector<double> row(g.num_nodes(), 0.0);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const AugmentedEdge& ed = g.edge(e);
    const double w = g.mu_sq()[e];
    const double cross = w / std::sqrt(d[ed.u] * d[ed.v]);
    row[ed.u] += w / d[ed.u] + cross;
    row[ed.v] += w / d[ed.v] + cross;
  }
  return *std::max_element(row.begin(), row.end());
}

// inf { lambda : count_below(lambda) >= k }
double bisect_count(const AugmentedGraph& g, std::span<const double> d, std::size_t k) {
  double lo = 0.0;
  double hi = 1.01 * gershgorin_bound(g, d) + 1e-300;
  for (int iter = 0; iter < 200 && hi - lo > 1e-15 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (pencil_count_below(g, d, mid) >= k)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void assign_mu(AugmentedGraph& g, const SpectralReport& spec, double sigma,
               std::span<const double> kappa_i) {
  if (kappa_i.size() != g.num_centers())
    throw std::invalid_argument("assign_mu: one kappa per machine required");
  const double lambda = effective_lambda(g, spec);
  std::vector<double> mu(g.num_edges());
  assign_comm_half(g, mu);
  for (std::size_t leaf = 0; leaf < g.num_leaves(); ++leaf) {
    const std::size_t i = g.leaf_center(leaf);
    mu[g.leaf_edge(leaf)] = lambda * g.leaf_smoothness(leaf) / (sigma * (1.0 + kappa_i[i]));
  }
  g.set_mu_sq(std::move(mu));
}

void assign_mu_nonsmooth(AugmentedGraph& g, const SpectralReport& spec) {
  const double lambda = effective_lambda(g, spec);
  std::vector<double> mu(g.num_edges());
  assign_comm_half(g, mu);
  for (std::size_t leaf = 0; leaf < g.num_leaves(); ++leaf) {
    const std::size_t i = g.leaf_center(leaf);
    mu[g.leaf_edge(leaf)] = lambda / (1.0 + static_cast<double>(g.local_size(i)));
  }
  g.set_mu_sq(std::move(mu));
}

std::vector<double> edge_projection_coeffs(const AugmentedGraph& g) {
  if (!g.weights_assigned()) throw InvalidState("edge_projection_coeffs: weights not assigned");
  std::vector<double> r(g.num_edges(), 1.0);
  if (g.num_comm_edges() == 0) return r;
  const Matrix a = g.comm_incidence();
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double cutoff = 1e-10 * s[0];
  const Eigen::Index rank = (s.array() > cutoff).count();
  const Matrix& v = svd.matrixV();
  for (std::size_t e = 0; e < g.num_comm_edges(); ++e) {
    const auto row = static_cast<Eigen::Index>(e);
    double value = v.row(row).head(rank).squaredNorm();
    if (std::abs(value - 1.0) <= 1e-12) value = 1.0;
    r[e] = value;
  }
  return r;
}

std::vector<double> edge_projection_coeffs_dense(const AugmentedGraph& g) {
  if (g.num_edges() > 5000) throw std::invalid_argument("edge_projection_coeffs_dense: too many edges");
  const Matrix a = g.incidence();
  const Matrix proj = pseudo_inverse(a) * a;
  std::vector<double> r(g.num_edges());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    double value = proj(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(e));
    if (std::abs(value - 1.0) <= 1e-12) value = 1.0;
    r[e] = value;
  }
  return r;
}

std::size_t pencil_count_below(const AugmentedGraph& g, std::span<const double> d, double lambda) {
  const std::size_t n = g.num_centers();
  const auto ni = static_cast<Eigen::Index>(n);
  Matrix h = Matrix::Zero(ni, ni);
  std::size_t negatives = 0;
  for (std::size_t e = 0; e < g.num_comm_edges(); ++e) {
    const auto u = static_cast<Eigen::Index>(g.edge(e).u);
    const auto v = static_cast<Eigen::Index>(g.edge(e).v);
    const double w = g.mu_sq()[e];
    h(u, u) += w;
    h(v, v) += w;
    h(u, v) -= w;
    h(v, u) -= w;
  }
  for (std::size_t i = 0; i < n; ++i) h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) -= lambda * d[i];
  for (std::size_t leaf = 0; leaf < g.num_leaves(); ++leaf) {
    const auto c = static_cast<Eigen::Index>(g.leaf_center(leaf));
    const double w = g.mu_sq()[g.leaf_edge(leaf)];
    double pivot = w - lambda * d[g.leaf_node(leaf)];
    if (pivot == 0.0) pivot = -1e-300;  // measure-zero tie, resolve to the left
    if (pivot < 0.0) ++negatives;
    h(c, c) += w - w * w / pivot;
  }
  const Vector eig = jacobi_eigenvalues(h);
  negatives += static_cast<std::size_t>((eig.array() < 0.0).count());
  return negatives;
}

void fill_augmented_spectrum(const AugmentedGraph& g, SpectralReport& spec) {
  if (!g.weights_assigned()) throw InvalidState("augmented_spectrum: weights not assigned");
  if (g.num_nodes() < 2) throw InvalidState("augmented_spectrum: need at least two nodes");
  const std::vector<double>& sigma = g.sigma_diag();
  spec.lambda_min_plus_Ltilde = bisect_count(g, sigma, 2);
  if (!(spec.lambda_min_plus_Ltilde > 1e-14))
    throw InvalidState("augmented_spectrum: zero lambda_min_plus (disconnected augmented graph)");
  std::vector<double> sigma_sq(sigma.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) sigma_sq[k] = sigma[k] * sigma[k];
  spec.lambda_max_plus_ASigma2A = bisect_count(g, sigma_sq, g.num_nodes());
}

void fill_augmented_spectrum_dense(const AugmentedGraph& g, SpectralReport& spec) {
  const Matrix a = g.incidence();
  Vector inv_sqrt(a.rows()), inv(a.rows());
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    inv[k] = 1.0 / g.sigma_diag()[static_cast<std::size_t>(k)];
    inv_sqrt[k] = std::sqrt(inv[k]);
  }
  const Matrix aat = a * a.transpose();
  const Matrix ltilde = inv_sqrt.asDiagonal() * aat * inv_sqrt.asDiagonal();
  const Vector ev = jacobi_eigenvalues(ltilde);
  if (ev.size() < 2) throw InvalidState("augmented_spectrum: need at least two nodes");
  spec.lambda_min_plus_Ltilde = ev[1];
  if (!(ev[1] > 1e-10 * ev[ev.size() - 1]))
    throw InvalidState("augmented_spectrum: zero lambda_min_plus (disconnected augmented graph)");
  const Matrix second = inv.asDiagonal() * aat * inv.asDiagonal();
  const Vector ev2 = jacobi_eigenvalues(second);
  spec.lambda_max_plus_ASigma2A = ev2[ev2.size() - 1];
}

namespace {

void fill_gamma_tilde(const AugmentedGraph& g, SpectralReport& spec) {
  if (g.num_comm_edges() == 0) {
    spec.gamma_tilde = kNaN;
    return;
  }
  double max_r = 0.0;
  for (std::size_t e = 0; e < g.num_comm_edges(); ++e) max_r = std::max(max_r, spec.R[e]);
  const double n = static_cast<double>(g.num_centers());
  const double edges = static_cast<double>(g.num_comm_edges());
  spec.gamma_tilde = spec.lambda_min_plus_L * n * n / (max_r * edges * edges);
}

}  // namespace

SpectralReport configure_smooth(AugmentedGraph& g) {
  SpectralReport spec;
  std::vector<double> mu(g.num_edges(), 1.0);
  assign_comm_half(g, mu);
  g.set_mu_sq(mu);
  fill_comm_spectrum(g, spec);
  assign_mu(g, spec, max_sigma(g), kappas(g));
  spec.R = edge_projection_coeffs(g);
  fill_gamma_tilde(g, spec);
  fill_augmented_spectrum(g, spec);
  return spec;
}

SpectralReport configure_nonsmooth(AugmentedGraph& g) {
  SpectralReport spec;
  std::vector<double> mu(g.num_edges(), 1.0);
  assign_comm_half(g, mu);
  g.set_mu_sq(mu);
  fill_comm_spectrum(g, spec);
  assign_mu_nonsmooth(g, spec);
  spec.R = edge_projection_coeffs(g);
  fill_gamma_tilde(g, spec);
  return spec;
}

double augmented_lemma_bound(const AugmentedGraph& g, const SpectralReport& spec) {
  const double lambda = g.num_centers() == 1 ? 1.0 : spec.lambda_min_plus_L;
  double kappa = 0.0;
  for (std::size_t i = 0; i < g.num_centers(); ++i) kappa = std::max(kappa, g.kappa(i));
  return lambda / (2.0 * max_sigma(g) * (1.0 + kappa));
}

}  // namespace adfs
