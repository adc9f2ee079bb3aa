#pragma once

#include <Eigen/Dense>

namespace adfs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Node-variable storage: one row per node of the augmented graph.
using NodeMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SymmetricEigen {
  Vector values;   // ascending
  Matrix vectors;  // column k pairs with values[k]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps until the off-diagonal Frobenius norm drops below
/// `tol * ||a||_F`. Quadratic convergence makes 10-15 sweeps typical.
SymmetricEigen jacobi_eigen(const Matrix& a, double tol = 1e-15, int max_sweeps = 60);

/// Eigenvalues only (same algorithm, skips accumulating rotations).
Vector jacobi_eigenvalues(const Matrix& a, double tol = 1e-15, int max_sweeps = 60);

/// Moore-Penrose pseudoinverse by SVD, singular values below
/// `rcond * sigma_max` treated as zero.
Matrix pseudo_inverse(const Matrix& a, double rcond = 1e-10);

/// Numerical rank by SVD with the same cutoff convention.
Eigen::Index numerical_rank(const Matrix& a, double rcond = 1e-10);

}  // namespace adfs
