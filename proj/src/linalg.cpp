#include "hankel_mpc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hmpc {

namespace {

constexpr double kRankSafety = 100.0;

Eigen::BDCSVD<Matrix> full_svd(const Matrix& a) {
  return Eigen::BDCSVD<Matrix>(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
}

}  // namespace

double rank_threshold(const Vector& singular_values, Index rows, Index cols) {
  if (singular_values.size() == 0) return 0.0;
  const double smax = singular_values.maxCoeff();
  return smax * static_cast<double>(std::max(rows, cols)) *
         std::numeric_limits<double>::epsilon() * kRankSafety;
}

Index numerical_rank(const Matrix& a) {
  if (a.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(a);
  const Vector& sv = svd.singularValues();
  const double tol = rank_threshold(sv, a.rows(), a.cols());
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++r;
  }
  return r;
}

Matrix pseudo_inverse(const Matrix& a) {
  if (a.size() == 0) return Matrix::Zero(a.cols(), a.rows());
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double tol = rank_threshold(sv, a.rows(), a.cols());
  Vector inv = Vector::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix null_space(const Matrix& a) {
  if (a.rows() == 0) return Matrix::Identity(a.cols(), a.cols());
  auto svd = full_svd(a);
  const Vector& sv = svd.singularValues();
  const double tol = rank_threshold(sv, a.rows(), a.cols());
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++r;
  }
  return svd.matrixV().rightCols(a.cols() - r);
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Matrix sym_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
  Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double max_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sym), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double min_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sym), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Matrix controllability_matrix(const Matrix& a, const Matrix& b) {
  const Index n = a.rows();
  Matrix ctrb(n, n * b.cols());
  Matrix block = b;
  for (Index i = 0; i < n; ++i) {
    ctrb.middleCols(i * b.cols(), b.cols()) = block;
    block = a * block;
  }
  return ctrb;
}

Matrix repeat_diagonal(const Matrix& block, Index count) {
  Matrix out = Matrix::Zero(block.rows() * count, block.cols() * count);
  for (Index i = 0; i < count; ++i) {
    out.block(i * block.rows(), i * block.cols(), block.rows(), block.cols()) = block;
  }
  return out;
}

}  // namespace hmpc
