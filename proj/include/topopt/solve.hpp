#pragma once

#include <memory>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace topopt {

/// Column-major sparse matrix. Symmetric operators are stored with both
/// triangles; the factorization reads the lower one only.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
///
/// The symbolic analysis is kept, so refactorize() on a matrix with the same
/// sparsity pattern only redoes the numeric phase. Solves are followed by
/// at most two steps of iterative refinement, which keeps
/// ||A x - b|| / ||b|| <= 1e-10 for the matrices met here.
class Factorization {
 public:
  explicit Factorization(const SparseMatrix& a);
  ~Factorization();
  Factorization(Factorization&&) noexcept;
  Factorization& operator=(Factorization&&) noexcept;
  Factorization(const Factorization&) = delete;
  Factorization& operator=(const Factorization&) = delete;

  void refactorize(const SparseMatrix& a);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::Index dimension() const { return dimension_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Eigen::Index dimension_ = 0;
};

Factorization factorize(const SparseMatrix& a);
Eigen::VectorXd solve(const Factorization& factorization, const Eigen::VectorXd& b);

/// ||A x - b|| / ||b|| with A given by its lower triangle (0 when b = 0 and A x = 0).
double relative_residual(const SparseMatrix& a, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& b);

}  // namespace topopt
