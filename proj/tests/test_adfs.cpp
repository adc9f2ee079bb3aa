#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "adfs/adfs.hpp"
#include "helpers.hpp"

using namespace adfs;
using testing::augment;

namespace {

struct Setup {
  ProblemInstance problem;
  AugmentedGraph g;
  SpectralReport spec;
  RunParameters params;
};

Setup make_setup(const CommGraph& base, ProblemInstance problem, std::optional<double> p_comm = std::nullopt) {
  Setup s;
  s.problem = std::move(problem);
  s.g = augment(base, s.problem);
  s.spec = configure_smooth(s.g);
  s.params = derive_parameters(s.g, s.spec, p_comm);
  return s;
}

ProblemInstance unit_quadratics(std::size_t n, std::size_t m, Eigen::Index d, std::uint64_t seed) {
  ProblemInstance p = testing::random_quadratic_instance(n, m, d, 1.0, seed);
  for (auto& node : p.nodes)
    for (auto& f : node.components) f = ComponentFunction::quadratic(1.0, f.data());
  return p;
}

double max_rel_diff(const NodeMatrix& a, const NodeMatrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("single machine has no communication") {
  Setup s = make_setup(CommGraph(1, {}), testing::scaled_logistic(1, 4, 2, 0.5, 1));
  CHECK(s.params.p_comm == 0.0);
  CHECK(s.params.p_comp == 1.0);
  double total = 0.0;
  for (double p : s.params.p) total += p;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("homogeneous components give uniform computation probabilities") {
  Setup s = make_setup(build_grid(2, 2), unit_quadratics(4, 5, 2, 3));
  const double expected = s.params.p_comp / 20.0;
  for (std::size_t leaf = 0; leaf < s.g.num_leaves(); ++leaf)
    CHECK(s.params.p[s.g.leaf_edge(leaf)] == doctest::Approx(expected));
  for (std::size_t e = 0; e < s.g.num_comm_edges(); ++e)
    CHECK(s.params.p[e] == doctest::Approx(s.params.p_comm / 4.0));
}

TEST_CASE("default communication probability on the 2x2 grid") {
  Setup s = make_setup(build_grid(2, 2), unit_quadratics(4, 10, 2, 5));
  CHECK(s.spec.lambda_min_plus_L == doctest::Approx(1.0));
  for (std::size_t e = 0; e < 4; ++e) CHECK(s.spec.R[e] == doctest::Approx(0.75));
  CHECK(s.spec.gamma_tilde == doctest::Approx(4.0 / 3.0));
  CHECK(s.params.report.S_comp == doctest::Approx(10.0 * std::sqrt(2.0)));
  CHECK(s.params.report.kappa_min == doctest::Approx(10.0));
  const double expected = 1.0 / (1.0 + std::sqrt((4.0 / 3.0) / 11.0) * 10.0 * std::sqrt(2.0));
  CHECK(s.params.p_comm == doctest::Approx(expected));
  CHECK(s.params.p_comm_max == doctest::Approx(4.0 * 2.0 * expected / 4.0));

  const RunParameters forced = derive_parameters(s.g, s.spec, 0.3);
  CHECK(forced.p_comm == doctest::Approx(0.3));
  CHECK_THROWS_AS(derive_parameters(s.g, s.spec, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(derive_parameters(s.g, s.spec, 1.0), std::invalid_argument);
}

TEST_CASE("derived parameters are consistent") {
  Setup s = make_setup(build_grid(2, 3), testing::scaled_logistic(6, 4, 3, 0.1, 2));
  const RunParameters& r = s.params;
  CHECK(r.S >= r.report.S_tight);
  CHECK(r.rho == doctest::Approx(std::sqrt(r.sigma_A) / r.S));
  CHECK(r.report.admissibility_violations.empty());
  for (std::size_t leaf = 0; leaf < s.g.num_leaves(); ++leaf)
    CHECK(r.eta_tilde[s.g.leaf_edge(leaf)] <= kMaxStepRatio * s.g.leaf_smoothness(leaf) * (1 + 1e-12));
  const ProblemInstance stronger = [&] {
    ProblemInstance p = s.problem;
    for (auto& node : p.nodes) node.sigma *= 4.0;
    return p;
  }();
  Setup t = make_setup(build_grid(2, 3), stronger);
  CHECK(t.params.rho >= r.rho);
}

TEST_CASE("schedule frequencies follow the probabilities") {
  Setup s = make_setup(build_grid(2, 2), testing::scaled_logistic(4, 2, 2, 0.5, 4));
  Schedule sched = make_schedule(s.params, 17);
  const std::size_t N = 400000;
  std::vector<double> counts(s.g.num_edges(), 0.0);
  for (std::size_t t = 0; t < N; ++t) counts[sched.next()] += 1.0;
  for (std::size_t e = 0; e < counts.size(); ++e) {
    const double p = s.params.p[e];
    CHECK(std::abs(counts[e] / N - p) <= 4.0 * std::sqrt(p * (1 - p) / N));
  }
  Schedule again = make_schedule(s.params, 17);
  Schedule other = make_schedule(s.params, 17);
  for (int k = 0; k < 100; ++k) CHECK(again.next() == other.next());
}

TEST_CASE("one machine with one quadratic converges") {
  ProblemInstance p;
  p.dim = 1;
  p.nodes.resize(1);
  p.nodes[0].sigma = 1.0;
  p.nodes[0].components.push_back(ComponentFunction::quadratic(1.0, Vector::Constant(1, 2.0)));
  Setup s = make_setup(CommGraph(1, {}), p);
  const ReferenceSolution ref = reference_minimizer(s.problem);
  CHECK(ref.theta[0] == doctest::Approx(1.0));
  AdfsRunOptions opt;
  opt.F_star = ref.value;
  const AdfsTrace tr = run_adfs(s.problem, s.g, s.spec, s.params, 200, opt);
  CHECK(tr.checkpoints.back().primal_subopt < 1e-8);
  CHECK(std::abs(tr.theta[0] - 1.0) < 1e-4);
}

TEST_CASE("lazy and dense iterates agree") {
  for (bool scalar : {true, false}) {
    Setup s = make_setup(build_grid(2, 2), testing::scaled_logistic(4, 4, 3, 0.2, 6));
    DenseAdfs dense(s.g, s.problem, s.spec, s.params);
    LazyAdfs lazy(s.g, s.problem, s.spec, s.params, scalar);
    CHECK(lazy.scalar_leaves() == scalar);
    Schedule sched = make_schedule(s.params, 3);
    double worst = 0.0;
    for (std::size_t t = 0; t < 3000; ++t) {
      const std::size_t e = sched.next();
      dense.step(e);
      lazy.step(e);
      if ((t + 1) % 500 == 0) {
        worst = std::max(worst, max_rel_diff(lazy.materialize_x(), dense.x()));
        worst = std::max(worst, max_rel_diff(lazy.materialize_v(), dense.v()));
      }
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("scalar and vector leaf storage agree") {
  Setup s = make_setup(build_grid(1, 3), testing::scaled_logistic(3, 4, 4, 0.2, 8));
  LazyAdfs a(s.g, s.problem, s.spec, s.params, true);
  LazyAdfs b(s.g, s.problem, s.spec, s.params, false);
  Schedule sched = make_schedule(s.params, 5);
  for (std::size_t t = 0; t < 5000; ++t) {
    const std::size_t e = sched.next();
    a.step(e);
    b.step(e);
  }
  CHECK(max_rel_diff(a.materialize_x(), b.materialize_x()) <= 1e-10);
  CHECK(max_rel_diff(a.materialize_v(), b.materialize_v()) <= 1e-10);
}

TEST_CASE("quadratic components fall back to vector storage") {
  Setup s = make_setup(build_grid(1, 2), unit_quadratics(2, 2, 2, 1));
  LazyAdfs lazy(s.g, s.problem, s.spec, s.params, true);
  CHECK_FALSE(lazy.scalar_leaves());
}

TEST_CASE("mixing powers") {
  Setup s = make_setup(build_grid(1, 2), testing::scaled_logistic(2, 2, 2, 0.2, 9));
  LazyAdfs cached(s.g, s.problem, s.spec, s.params, true, 4096);
  LazyAdfs tiny(s.g, s.problem, s.spec, s.params, true, 2);
  const double rho = s.params.rho;
  const double a1 = 1.0 / (1.0 + rho), b1 = rho / (1.0 + rho);
  double a = 1.0, b = 0.0;
  for (std::size_t k = 1; k <= 6000; ++k) {
    const double na = a * a1 + b * b1;
    b = a * b1 + b * a1;
    a = na;
    if (k % 250 == 0 || k < 10) {
      const auto [ca, cb] = cached.mixing_power(k);
      const auto [ta, tb] = tiny.mixing_power(k);
      CHECK(std::abs(ca - a) <= 1e-12);
      CHECK(std::abs(cb - b) <= 1e-12);
      CHECK(std::abs(ta - a) <= 1e-12);
      CHECK(std::abs(tb - b) <= 1e-12);
    }
  }
  // a_k + b_k stays 1 and a_k - b_k = ((1 - rho) / (1 + rho))^k
  const auto [ak, bk] = tiny.mixing_power(100000);
  CHECK(ak + bk == doctest::Approx(1.0));
  CHECK(ak - bk == doctest::Approx(std::pow((1 - rho) / (1 + rho), 100000.0)).epsilon(1e-8));

  Schedule sched = make_schedule(s.params, 2);
  for (std::size_t t = 0; t < 3000; ++t) {
    const std::size_t e = sched.next();
    cached.step(e);
    tiny.step(e);
  }
  CHECK(max_rel_diff(cached.materialize_x(), tiny.materialize_x()) <= 1e-12);
}

TEST_CASE("iterates stay in the range of the incidence matrix") {
  Setup s = make_setup(build_grid(2, 2), testing::scaled_logistic(4, 4, 2, 0.2, 10));
  DenseAdfs dense(s.g, s.problem, s.spec, s.params);
  Schedule sched = make_schedule(s.params, 8);
  for (std::size_t t = 0; t < 2000; ++t) dense.step(sched.next());
  const Vector sx = dense.x().colwise().sum().transpose();
  const Vector sv = dense.v().colwise().sum().transpose();
  CHECK(sx.norm() <= 1e-10 * std::max(1.0, dense.x().norm()));
  CHECK(sv.norm() <= 1e-10 * std::max(1.0, dense.v().norm()));
  for (std::size_t leaf = 0; leaf < s.g.num_leaves(); ++leaf) {
    const Vector X = s.problem.nodes[s.g.leaf_center(leaf)].components[leaf - s.g.leaf_offset(s.g.leaf_center(leaf))].data();
    const Vector row = dense.v().row(static_cast<Eigen::Index>(s.g.leaf_node(leaf))).transpose();
    const Vector perp = row - X * (X.dot(row) / X.squaredNorm());
    CHECK(perp.norm() <= 1e-10 * std::max(1.0, row.norm()));
  }
}

TEST_CASE("dual optimum") {
  Setup s = make_setup(build_grid(1, 3), testing::scaled_logistic(3, 4, 2, 0.3, 11));
  const ReferenceSolution ref = reference_minimizer(s.problem);
  const NodeMatrix vstar = dual_optimum(s.g, s.problem, ref.theta);
  CHECK(vstar.colwise().sum().norm() <= 1e-10);
  CHECK(dual_value(s.g, s.problem, vstar) == doctest::Approx(-ref.value).epsilon(1e-10));
}

TEST_CASE("invalid parameters are rejected") {
  Setup s = make_setup(build_grid(1, 2), testing::scaled_logistic(2, 2, 2, 0.3, 12));
  RunParameters bad = s.params;
  bad.sigma_A = 0.0;
  CHECK_THROWS_AS(DenseAdfs(s.g, s.problem, s.spec, bad), InvalidState);
  CHECK_THROWS_AS(LazyAdfs(s.g, s.problem, s.spec, bad), InvalidState);
  ProblemInstance other = testing::scaled_logistic(2, 4, 2, 0.3, 12);
  CHECK_THROWS_AS(DenseAdfs(s.g, other, s.spec, s.params), std::invalid_argument);
}

TEST_CASE("logistic run converges and is reproducible") {
  Setup s = make_setup(build_grid(2, 2), testing::scaled_logistic(4, 6, 3, 0.5, 13));
  const ReferenceSolution ref = reference_minimizer(s.problem);
  AdfsRunOptions opt;
  opt.F_star = ref.value;
  opt.seed = 4;
  opt.time_model = SimConfig{};
  const AdfsTrace a = run_adfs(s.problem, s.g, s.spec, s.params, 100000, opt);
  const AdfsTrace b = run_adfs(s.problem, s.g, s.spec, s.params, 100000, opt);
  REQUIRE(a.checkpoints.size() == b.checkpoints.size());
  for (std::size_t k = 0; k < a.checkpoints.size(); ++k)
    CHECK(a.checkpoints[k].primal_subopt == b.checkpoints[k].primal_subopt);
  CHECK(a.checkpoints.back().primal_subopt < 1e-3 * a.checkpoints.front().primal_subopt);
  CHECK(a.checkpoints.size() == 1001);
  for (std::size_t k = 1; k < a.checkpoints.size(); ++k)
    CHECK(a.checkpoints[k].idealized_time >= a.checkpoints[k - 1].idealized_time);

  opt.target = 1e-4 * a.checkpoints.front().primal_subopt;
  const AdfsTrace c = run_adfs(s.problem, s.g, s.spec, s.params, 100000, opt);
  CHECK(c.reached_target);
  CHECK(c.iterations < 100000);
}

TEST_CASE("non-smooth variant") {
  ProblemInstance p = testing::scaled_logistic(3, 4, 2, 0.3, 14);
  AugmentedGraph g = augment(build_grid(1, 3), p);
  const SpectralReport spec = configure_nonsmooth(g);
  const NsParameters params = derive_ns_parameters(g, spec);
  double total = 0.0;
  for (double q : params.p) total += q;
  CHECK(total == doctest::Approx(1.0));
  NsAdfs solver(g, p, spec, params);
  CHECK(solver.x().norm() == 0.0);
  CHECK(solver.v().norm() == 0.0);
  CHECK(solver.A() == 0.0);

  NsRunOptions opt;
  opt.seed = 6;
  opt.F_star = reference_minimizer(p).value;
  const auto a = run_ns_adfs(p, g, spec, params, 20000, opt);
  const auto b = run_ns_adfs(p, g, spec, params, 20000, opt);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].dual_subopt == b[k].dual_subopt);
  CHECK(a.back().dual_subopt < a.front().dual_subopt);
}
