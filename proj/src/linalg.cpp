#include "adfs/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace adfs {

namespace {

template <bool WithVectors>
void jacobi_impl(Matrix a, double tol, int max_sweeps, Vector& values, Matrix* vectors) {
  if (a.rows() != a.cols()) throw std::invalid_argument("jacobi_eigen: matrix must be square");
  const Eigen::Index n = a.rows();
  if constexpr (WithVectors) vectors->setIdentity(n, n);
  const double scale = a.norm();
  if (n <= 1 || scale == 0.0) {
    values = a.diagonal();
    return;
  }
  const double threshold = tol * scale;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= threshold) break;

    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // skip rotations that cannot change the diagonal in floating point
        if (sweep > 3 && std::abs(apq) < 1e-18 * (std::abs(app) + std::abs(aqq))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        if constexpr (WithVectors) {
          for (Eigen::Index k = 0; k < n; ++k) {
            const double vkp = (*vectors)(k, p);
            const double vkq = (*vectors)(k, q);
            (*vectors)(k, p) = c * vkp - s * vkq;
            (*vectors)(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  values.resize(n);
  Matrix sorted_vectors;
  if constexpr (WithVectors) sorted_vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    values[k] = a(order[k], order[k]);
    if constexpr (WithVectors) sorted_vectors.col(k) = vectors->col(order[k]);
  }
  if constexpr (WithVectors) *vectors = std::move(sorted_vectors);
}

}  // namespace

SymmetricEigen jacobi_eigen(const Matrix& a, double tol, int max_sweeps) {
  SymmetricEigen out;
  jacobi_impl<true>(a, tol, max_sweeps, out.values, &out.vectors);
  return out;
}

Vector jacobi_eigenvalues(const Matrix& a, double tol, int max_sweeps) {
  Vector values;
  jacobi_impl<false>(a, tol, max_sweeps, values, nullptr);
  return values;
}

Matrix pseudo_inverse(const Matrix& a, double rcond) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? rcond * s[0] : 0.0;
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s[k] > cutoff) inv[k] = 1.0 / s[k];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::Index numerical_rank(const Matrix& a, double rcond) {
  Eigen::BDCSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  if (s.size() == 0) return 0;
  return (s.array() > rcond * s[0]).count();
}

}  // namespace adfs
