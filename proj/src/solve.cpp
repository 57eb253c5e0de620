#include "topopt/solve.hpp"

#include <string>

#include <Eigen/SparseCholesky>

namespace topopt {

namespace {

constexpr double kRefineThreshold = 1e-13;
constexpr int kMaxRefinements = 2;

Eigen::VectorXd lower_product(const SparseMatrix& lower, const Eigen::VectorXd& x) {
  return lower.selfadjointView<Eigen::Lower>() * x;
}

}  // namespace

struct Factorization::Impl {
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower> llt;
  SparseMatrix lower;
};

Factorization::Factorization(const SparseMatrix& a) : impl_(std::make_unique<Impl>()) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("factorize: matrix is not square");
  }
  dimension_ = a.rows();
  impl_->llt.analyzePattern(a);
  refactorize(a);
}

Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

void Factorization::refactorize(const SparseMatrix& a) {
  if (a.rows() != dimension_ || a.cols() != dimension_) {
    throw std::invalid_argument("refactorize: dimension changed");
  }
  impl_->lower = a.triangularView<Eigen::Lower>();
  impl_->llt.factorize(a);
  if (impl_->llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("sparse Cholesky failed: matrix of dimension " +
                              std::to_string(dimension_) + " is not positive definite");
  }
}

Eigen::VectorXd Factorization::solve(const Eigen::VectorXd& b) const {
  if (b.size() != dimension_) {
    throw std::invalid_argument("solve: right-hand side has size " + std::to_string(b.size()) +
                                ", expected " + std::to_string(dimension_));
  }
  Eigen::VectorXd x = impl_->llt.solve(b);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    return x;
  }
  for (int it = 0; it < kMaxRefinements; ++it) {
    const Eigen::VectorXd r = b - lower_product(impl_->lower, x);
    if (r.norm() <= kRefineThreshold * bnorm) {
      break;
    }
    x += impl_->llt.solve(r);
  }
  return x;
}

Factorization factorize(const SparseMatrix& a) { return Factorization(a); }

Eigen::VectorXd solve(const Factorization& factorization, const Eigen::VectorXd& b) {
  return factorization.solve(b);
}

double relative_residual(const SparseMatrix& a, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& b) {
  const SparseMatrix lower = a.triangularView<Eigen::Lower>();
  const double rnorm = (b - lower_product(lower, x)).norm();
  const double bnorm = b.norm();
  return bnorm > 0.0 ? rnorm / bnorm : rnorm;
}

}  // namespace topopt
