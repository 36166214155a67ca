#include "seqtag/nncore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace seqtag {

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw config_error("Rng::below requires n > 0");
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<std::size_t>(x % n);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 finalizer over master advanced by the stream id.
  std::uint64_t z = master + (stream + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Vector affine(const Matrix& w, std::span<const double> x, std::span<const double> b) {
  if (w.cols() != x.size() || w.rows() != b.size()) {
    throw dimension_error("affine: W is " + std::to_string(w.rows()) + "x" +
                          std::to_string(w.cols()) + ", x has " +
                          std::to_string(x.size()) + ", b has " +
                          std::to_string(b.size()));
  }
  Vector y(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    y[r] = dot(w.row(r), x) + b[r];
  }
  return y;
}

Vector matvec_transposed(const Matrix& w, std::span<const double> x) {
  if (w.rows() != x.size()) {
    throw dimension_error("matvec_transposed: W has " + std::to_string(w.rows()) +
                          " rows, x has " + std::to_string(x.size()));
  }
  Vector y(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double xr = x[r];
    auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) y[c] += row[c] * xr;
  }
  return y;
}

void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v) {
  if (a.rows() != u.size() || a.cols() != v.size()) {
    throw dimension_error("add_outer: shapes do not conform");
  }
  for (std::size_t r = 0; r < u.size(); ++r) {
    const double ur = u[r];
    auto row = a.row(r);
    for (std::size_t c = 0; c < v.size(); ++c) row[c] += ur * v[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

static double sigmoid_scalar(double x) {
  // Evaluate through exp of a non-positive argument only; no overflow for any
  // finite input.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid(std::span<const double> x) {
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid_scalar(x[i]);
  return y;
}

Vector tanh_vec(std::span<const double> x) {
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

Vector softmax(std::span<const double> z) {
  Vector y(z.size());
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    y[i] = std::exp(z[i] - m);
    sum += y[i];
  }
  for (double& v : y) v /= sum;
  return y;
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  return m + std::log(sum);
}

Vector dropout_mask(std::size_t len, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw config_error("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (rate == 0.0) return Vector(len, 1.0);
  const double keep = 1.0 / (1.0 - rate);
  Vector mask(len);
  for (std::size_t i = 0; i < len; ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep;
  }
  return mask;
}

void sgd_step(std::span<Param* const> params, double lr) {
  for (Param* p : params) {
    if (!p->grad.all_finite()) {
      throw training_error("non-finite gradient in parameter '" + p->name + "'");
    }
  }
  for (Param* p : params) {
    auto value = p->value.data();
    auto grad = p->grad.data();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * grad[i];
    p->grad.fill(0.0);
  }
}

double global_grad_norm(std::span<Param* const> params) {
  double sq = 0.0;
  for (const Param* p : params) {
    for (double g : p->grad.data()) sq += g * g;
  }
  return std::sqrt(sq);
}

void clip_gradients(std::span<Param* const> params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (Param* p : params) {
    for (double& g : p->grad.data()) g *= scale;
  }
}

double finite_diff_check(const std::function<double()>& loss_fn,
                         std::span<Param* const> params, double epsilon,
                         std::size_t samples, Rng& rng) {
  std::vector<Param*> nonempty;
  for (Param* p : params) {
    if (p->value.size() > 0) nonempty.push_back(p);
  }
  if (nonempty.empty()) return 0.0;

  double max_rel = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    Param* p = nonempty[rng.below(nonempty.size())];
    const std::size_t i = rng.below(p->value.size());
    double& theta = p->value.data()[i];
    const double saved = theta;
    theta = saved + epsilon;
    const double loss_plus = loss_fn();
    theta = saved - epsilon;
    const double loss_minus = loss_fn();
    theta = saved;
    const double numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
    const double analytic = p->grad.data()[i];
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::fabs(analytic - numeric) / denom);
  }
  return max_rel;
}

}  // namespace seqtag
