#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "adfs/objective.hpp"
#include "adfs/rng.hpp"
#include "helpers.hpp"

using namespace adfs;
using testing::bisect;

namespace {

Vector random_vector(Rng& rng, Eigen::Index d, double scale = 1.0) {
  Vector v(d);
  for (Eigen::Index k = 0; k < d; ++k) v[k] = scale * rng.normal();
  return v;
}

std::vector<ComponentFunction> sample_components(Rng& rng, Eigen::Index d) {
  std::vector<ComponentFunction> out;
  out.push_back(ComponentFunction::quadratic(0.5 + 3.0 * rng.uniform(), random_vector(rng, d)));
  out.push_back(ComponentFunction::logistic(random_vector(rng, d), rng.uniform() < 0.5 ? 1.0 : -1.0));
  out.push_back(ComponentFunction::least_squares(random_vector(rng, d), rng.normal()));
  return out;
}

}  // namespace

TEST_CASE("quadratic prox closed form") {
  const ComponentFunction f = ComponentFunction::quadratic(1.0, Vector::Zero(2));
  const Vector v = f.prox(1.0, Vector((Vector(2) << 2.0, 0.0).finished()));
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(0.0));
}

TEST_CASE("one dimensional logistic prox against bisection") {
  const ComponentFunction f = ComponentFunction::logistic(Vector::Ones(1), 1.0);
  const double v = f.prox(1.0, Vector::Zero(1))[0];
  CHECK(v > 0.0);
  CHECK(v < 0.5);
  const double ref = bisect([](double s) { return s + testing::logistic_dloss(1.0, s); }, -10.0, 10.0);
  CHECK(std::abs(v - ref) < 1e-9);
}

TEST_CASE("prox tends to the identity for tiny steps") {
  Rng rng(1);
  for (const ComponentFunction& f : sample_components(rng, 3)) {
    const Vector x = random_vector(rng, 3);
    CHECK((f.prox(1e-12, x) - x).norm() < 1e-9);
  }
}

TEST_CASE("prox optimality, direction and nonexpansiveness") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    for (const ComponentFunction& f : sample_components(rng, 4)) {
      const double eta = std::exp(rng.uniform() * 8.0 - 4.0);
      const Vector x = random_vector(rng, 4, 3.0);
      const Vector y = random_vector(rng, 4, 3.0);
      const Vector px = f.prox(eta, x);
      const Vector py = f.prox(eta, y);
      CHECK(((x - px) / eta - f.gradient(px)).norm() <= 1e-9);
      CHECK((px - py).norm() <= (x - y).norm() + 1e-12);
      if (f.is_linear()) {
        const Vector disp = x - px;
        const Vector along = f.data() * (f.data().dot(disp) / f.data().squaredNorm());
        CHECK((disp - along).norm() <= 1e-12 * (1.0 + disp.norm()));
      }
    }
  }
}

TEST_CASE("warm start gives the same prox") {
  const ComponentFunction f = ComponentFunction::logistic(Vector::Constant(2, 1.5), -1.0);
  double warm = std::numeric_limits<double>::quiet_NaN();
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    const Vector x = random_vector(rng, 2);
    const Vector a = f.prox(0.7, x, &warm);
    const Vector b = f.prox(0.7, x);
    CHECK((a - b).norm() < 1e-12);
  }
}

TEST_CASE("gradients match central differences") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    for (const ComponentFunction& f : sample_components(rng, 3)) {
      const Vector th = random_vector(rng, 3);
      const Vector g = f.gradient(th);
      for (Eigen::Index k = 0; k < 3; ++k) {
        Vector e = Vector::Zero(3);
        e[k] = 1e-6;
        const double fd = (f.value(th + e) - f.value(th - e)) / 2e-6;
        CHECK(std::abs(fd - g[k]) <= 1e-5 * std::max(1.0, std::abs(g[k])));
      }
    }
  }
}

TEST_CASE("gradient Lipschitz secant test and logistic smoothness") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    for (const ComponentFunction& f : sample_components(rng, 3)) {
      const Vector a = random_vector(rng, 3, 2.0);
      const Vector b = random_vector(rng, 3, 2.0);
      CHECK((f.gradient(a) - f.gradient(b)).norm() <= f.smoothness() * (a - b).norm() * (1 + 1e-12));
      if (f.kind() == LossKind::LogisticLinear)
        CHECK(f.smoothness() == doctest::Approx(f.data().squaredNorm() / 4.0));
    }
  }
}

TEST_CASE("Moreau identity on quadratics") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const double L = 0.2 + 5.0 * rng.uniform();
    const Vector c = random_vector(rng, 3);
    const ComponentFunction f = ComponentFunction::quadratic(L, c);
    const double eta = std::exp(rng.uniform() * 6.0 - 3.0);
    const Vector x = random_vector(rng, 3, 2.0);
    // f*(u) = ||u||^2 / (2L) + <c, u>
    const Vector closed = (x - eta * c) / (1.0 + eta / L);
    const Vector viaprimal = x - eta * f.prox(1.0 / eta, x / eta);
    CHECK((closed - viaprimal).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + x.norm()));
    CHECK((f.prox_conjugate(eta, x) - closed).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + x.norm()));
    CHECK(f.conjugate(x) == doctest::Approx(x.squaredNorm() / (2 * L) + c.dot(x)));
  }
}

TEST_CASE("logistic conjugate and its prox against a numerical oracle") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector X = random_vector(rng, 3);
    const double y = rng.uniform() < 0.5 ? 1.0 : -1.0;
    const ComponentFunction f = ComponentFunction::logistic(X, y);
    const double q = X.squaredNorm();
    const double eta = std::exp(rng.uniform() * 6.0 - 3.0);
    const Vector u = random_vector(rng, 3, 2.0);
    // prox_{eta f*}(u) = k X with k = -y r, r in (0, 1), solving
    // (k q - X.u) / eta + s*(k) = 0 where s*(k) maximizes k s - loss(s).
    auto stationarity = [&](double r) {
      const double k = -y * r;
      return -y * ((k * q - X.dot(u)) / eta + testing::logistic_conjugate_argmax(y, k));
    };
    const double r = bisect(stationarity, 1e-15, 1.0 - 1e-15, 100);
    const Vector oracle = (-y * r) * X;
    CHECK((f.prox_conjugate(eta, u) - oracle).cwiseAbs().maxCoeff() <= 1e-8);
    const double rk = 0.05 + 0.9 * rng.uniform();
    CHECK(f.conjugate((-y * rk) * X) == doctest::Approx(testing::logistic_conjugate_numeric(y, -y * rk)).epsilon(1e-9));
  }
}

TEST_CASE("conjugate-minus-quadratic prox") {
  SUBCASE("vanishes for a centred quadratic") {
    const ComponentFunction f = ComponentFunction::quadratic(2.0, Vector::Zero(1));
    CHECK(f.prox_conjugate_tilde(1.0, Vector::Constant(1, 3.0))[0] == doctest::Approx(3.0));
  }
  SUBCASE("logistic against a numerical oracle") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
      const Vector X = random_vector(rng, 1);
      const double y = rng.uniform() < 0.5 ? 1.0 : -1.0;
      const ComponentFunction f = ComponentFunction::logistic(X, y);
      const double q = X.squaredNorm();
      const double L = f.smoothness();
      const double eta = (0.05 + 0.9 * rng.uniform()) * L;
      const Vector z = random_vector(rng, 1, 2.0);
      auto stationarity = [&](double r) {
        const double k = -y * r;
        return -y * ((k * q - X.dot(z)) / eta + testing::logistic_conjugate_argmax(y, k) - k * q / L);
      };
      const double r = bisect(stationarity, 1e-15, 1.0 - 1e-15, 100);
      CHECK(std::abs(f.prox_conjugate_tilde(eta, z)[0] - (-y * r) * X[0]) <= 1e-8);
      double warm = std::numeric_limits<double>::quiet_NaN();
      const double k = f.prox_conjugate_tilde_coef(eta, X.dot(z), &warm);
      CHECK(std::abs(k - (-y * r)) <= 1e-8);
    }
  }
  SUBCASE("tiny steps and step bound") {
    const ComponentFunction f = ComponentFunction::logistic(Vector::Constant(2, 2.0), 1.0);
    const Vector z = Vector::Constant(2, -0.3);
    CHECK((f.prox_conjugate_tilde(1e-12, z) - z).norm() < 1e-9);
    CHECK_THROWS_AS(f.prox_conjugate_tilde(f.smoothness(), z), std::invalid_argument);
    CHECK_THROWS_AS(f.prox_conjugate_tilde(2.0 * f.smoothness(), z), std::invalid_argument);
  }
}

TEST_CASE("synthetic data") {
  const ProblemInstance p = generate_synthetic(2, 4, 10, 1.0, 7);
  CHECK(p.num_components() == 8);
  double labels = 0.0;
  for (const auto& node : p.nodes)
    for (const auto& f : node.components) labels += f.label();
  CHECK(labels == 0.0);

  const ProblemInstance q = generate_synthetic(2, 4, 10, 1.0, 7);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(p.nodes[i].components[j].data() == q.nodes[i].components[j].data());

  CHECK_THROWS_AS(generate_synthetic(2, 3, 2, 1.0, 0), std::invalid_argument);

  const ProblemInstance big = generate_synthetic(1, 10000, 3, 1.0, 3);
  Vector pos = Vector::Zero(3), neg = Vector::Zero(3);
  for (const auto& f : big.nodes[0].components) (f.label() > 0 ? pos : neg) += f.data();
  pos /= 5000.0;
  neg /= 5000.0;
  const double tol = 3.0 / std::sqrt(5000.0);
  CHECK((pos.array() - 1.0).abs().maxCoeff() <= tol);
  CHECK((neg.array() + 1.0).abs().maxCoeff() <= tol);
}

TEST_CASE("dataset CSV round trip") {
  const ProblemInstance p = generate_synthetic(3, 2, 2, 0.5, 1);
  std::ostringstream out;
  write_dataset(out, p);
  CHECK(out.str().rfind("node_id,label,x_1,x_2\n", 0) == 0);
  std::istringstream in(out.str());
  const ProblemInstance q = read_dataset(in, 0.5);
  REQUIRE(q.num_nodes() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(q.nodes[i].components[j].data() == p.nodes[i].components[j].data());
      CHECK(q.nodes[i].components[j].label() == p.nodes[i].components[j].label());
    }
}

TEST_CASE("reference minimizer") {
  SUBCASE("pure regularizer") {
    ProblemInstance p;
    p.dim = 3;
    p.nodes.resize(2);
    p.nodes[0].sigma = 1.0;
    p.nodes[1].sigma = 2.0;
    const ReferenceSolution r = reference_minimizer(p);
    CHECK(r.theta.norm() < 1e-14);
    CHECK(std::abs(r.value) < 1e-14);
  }
  SUBCASE("ridge normal equations") {
    Rng rng(10);
    ProblemInstance p;
    p.dim = 4;
    Matrix H = Matrix::Zero(4, 4);
    Vector rhs = Vector::Zero(4);
    for (int i = 0; i < 3; ++i) {
      NodeObjective node;
      node.sigma = 0.3 + rng.uniform();
      H.diagonal().array() += node.sigma;
      for (int j = 0; j < 5; ++j) {
        const Vector x = random_vector(rng, 4);
        const double b = rng.normal();
        node.components.push_back(ComponentFunction::least_squares(x, b));
        H += x * x.transpose();
        rhs += b * x;
      }
      p.nodes.push_back(node);
    }
    const Vector oracle = H.ldlt().solve(rhs);
    CHECK((reference_minimizer(p).theta - oracle).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("logistic stopping criterion") {
    const ProblemInstance p = generate_synthetic(3, 20, 3, 0.1, 2);
    const ReferenceSolution r = reference_minimizer(p);
    CHECK(r.grad_norm <= 1e-12);
    CHECK(p.gradient(r.theta).norm() <= 1e-11);
  }
}
