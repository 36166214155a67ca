#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "seqtag/error.hpp"

namespace seqtag {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. All training math runs in double
// precision; gradient-check tolerances rely on it.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Deterministic RNG. Built on std::mt19937_64, whose output stream is fixed
// by the standard, with all derived draws computed from raw 64-bit output so
// streams are identical across platforms and standard libraries
// (std::uniform_*_distribution makes no such guarantee).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform on [0, n); rejection sampling keeps it unbiased.
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Deterministically derives an independent sub-seed for a named stream, so
// one run seed can feed several consumers without correlated draws.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// A trainable tensor with its gradient. Gradients are zeroed by sgd_step at
// the end of each update cycle. Bias vectors are stored as n-by-1 matrices.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param(std::string name_, std::size_t rows, std::size_t cols)
      : name(std::move(name_)), value(rows, cols), grad(rows, cols) {}
};

// y = W x + b
Vector affine(const Matrix& w, std::span<const double> x, std::span<const double> b);
// y = W^T x
Vector matvec_transposed(const Matrix& w, std::span<const double> x);
// a += u v^T
void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);

Vector sigmoid(std::span<const double> x);
Vector tanh_vec(std::span<const double> x);

// Max-subtracted softmax: nonnegative, sums to 1, shift-invariant.
Vector softmax(std::span<const double> z);
double log_sum_exp(std::span<const double> z);

// Inverted-dropout mask of {0, 1/(1-rate)}; expectation of each entry is 1.
Vector dropout_mask(std::size_t len, double rate, Rng& rng);

// value -= lr * grad for every parameter, then grads are zeroed. A non-finite
// gradient aborts before any value is touched.
void sgd_step(std::span<Param* const> params, double lr);

double global_grad_norm(std::span<Param* const> params);

// Scales all gradients so the global norm is at most max_norm.
void clip_gradients(std::span<Param* const> params, double max_norm);

// Central-difference gradient check. loss_fn must recompute the loss from the
// params' current values and be deterministic (dropout disabled or replayed).
// Analytic gradients must already be populated. Returns the max over sampled
// coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(const std::function<double()>& loss_fn,
                         std::span<Param* const> params, double epsilon,
                         std::size_t samples, Rng& rng);

}  // namespace seqtag
