#pragma once

// Black-box symmetric operator contract. Callers only see batched applies;
// the base class meters how many operator columns have been applied, which
// is the cost unit every compression report is written in.

#include <atomic>
#include <cstdint>
#include <memory>

#include "hodlr/common.hpp"

namespace hodlr {

class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  index_t size() const { return n_; }

  // Batched apply; increments the counter by x.cols().
  DenseMatrix apply(const DenseMatrix& x) const {
    require(x.rows() == n_, "LinearOperator::apply: row count mismatch");
    count_.fetch_add(std::uint64_t(x.cols()), std::memory_order_relaxed);
    return apply_impl(x);
  }

  Vector apply(const Vector& x) const {
    DenseMatrix y = apply(DenseMatrix(x));
    return Vector(y.col(0));
  }

  std::uint64_t apply_count() const { return count_.load(std::memory_order_relaxed); }
  void reset_apply_count() const { count_.store(0, std::memory_order_relaxed); }

 protected:
  explicit LinearOperator(index_t n) : n_(n) {
    require(n >= 1, "LinearOperator: size must be positive");
  }

  virtual DenseMatrix apply_impl(const DenseMatrix& x) const = 0;

 private:
  index_t n_;
  mutable std::atomic<std::uint64_t> count_{0};
};

// Oracle wrapper around an explicit symmetric matrix.
class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(DenseMatrix a);
  const DenseMatrix& matrix() const { return a_; }

 private:
  DenseMatrix apply_impl(const DenseMatrix& x) const override { return a_ * x; }
  DenseMatrix a_;
};

inline std::unique_ptr<DenseOperator> dense_operator(DenseMatrix a) {
  return std::make_unique<DenseOperator>(std::move(a));
}

class ZeroOperator final : public LinearOperator {
 public:
  explicit ZeroOperator(index_t n) : LinearOperator(n) {}

 private:
  DenseMatrix apply_impl(const DenseMatrix& x) const override {
    return DenseMatrix::Zero(x.rows(), x.cols());
  }
};

// a*lhs + b*rhs of two same-size symmetric operators. Apply counts land on
// the wrapped operators; this adapter keeps its own counter too.
class ScaledSumOperator final : public LinearOperator {
 public:
  ScaledSumOperator(const LinearOperator& lhs, double a, const LinearOperator& rhs, double b)
      : LinearOperator(lhs.size()), lhs_(lhs), rhs_(rhs), a_(a), b_(b) {
    require(lhs.size() == rhs.size(), "ScaledSumOperator: size mismatch");
  }

 private:
  DenseMatrix apply_impl(const DenseMatrix& x) const override {
    return a_ * lhs_.apply(x) + b_ * rhs_.apply(x);
  }
  const LinearOperator& lhs_;
  const LinearOperator& rhs_;
  double a_, b_;
};

}  // namespace hodlr
