#pragma once

#include <Eigen/Dense>

namespace hmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Singular values below this are treated as zero:
/// sigma_max * max(rows, cols) * 100 * machine epsilon.
double rank_threshold(const Vector& singular_values, Index rows, Index cols);

Index numerical_rank(const Matrix& a);

/// Moore-Penrose pseudo-inverse with the library rank threshold.
Matrix pseudo_inverse(const Matrix& a);

/// Orthonormal basis of ker(a), one column per null direction.
Matrix null_space(const Matrix& a);

/// Symmetric square root of a positive semidefinite matrix.
Matrix sym_sqrt(const Matrix& a);

Matrix symmetrize(const Matrix& a);

double max_eigenvalue(const Matrix& sym);
double min_eigenvalue(const Matrix& sym);

/// [B, AB, ..., A^{n-1}B]
Matrix controllability_matrix(const Matrix& a, const Matrix& b);

/// Block-diagonal repetition of `block`, `count` times.
Matrix repeat_diagonal(const Matrix& block, Index count);

}  // namespace hmpc
