#include "seqtag/crf.hpp"

#include <cmath>

namespace seqtag {

Crf::Crf(std::size_t num_tags)
    : num_tags_(num_tags),
      transitions_("crf.transitions", num_tags + 2, num_tags + 2),
      masked_((num_tags + 2) * (num_tags + 2), 0) {
  if (num_tags == 0) throw config_error("CRF requires at least one tag");
  const std::size_t n = num_tags_ + 2;
  // Nothing may enter START or leave STOP.
  for (std::size_t i = 0; i < n; ++i) {
    transitions_.value(i, start_state()) = kImpossible;
    masked_[i * n + start_state()] = 1;
    transitions_.value(stop_state(), i) = kImpossible;
    masked_[stop_state() * n + i] = 1;
  }
}

void Crf::apply_iob_constraints(const TagSet& tags) {
  if (tags.num_tags() != num_tags_) {
    throw dimension_error("tag set size does not match CRF");
  }
  const std::size_t n = num_tags_ + 2;
  for (std::size_t to = 0; to < num_tags_; ++to) {
    if (tags.kind(static_cast<int>(to)) != TagSet::Kind::inside) continue;
    const int cls = tags.class_index(static_cast<int>(to));
    for (std::size_t from = 0; from < num_tags_ + 1; ++from) {  // tags + START
      const bool legal = from < num_tags_ &&
                         tags.kind(static_cast<int>(from)) != TagSet::Kind::outside &&
                         tags.class_index(static_cast<int>(from)) == cls;
      if (!legal) {
        transitions_.value(from, to) = kImpossible;
        masked_[from * n + to] = 1;
      }
    }
  }
}

void Crf::check_emissions(const Matrix& emissions) const {
  if (emissions.rows() == 0) throw input_error("empty emission sequence");
  if (emissions.cols() != num_tags_) {
    throw dimension_error("emissions have " + std::to_string(emissions.cols()) +
                          " columns, CRF has " + std::to_string(num_tags_) + " tags");
  }
}

double Crf::score_sequence(const Matrix& emissions, std::span<const int> tags) const {
  check_emissions(emissions);
  if (tags.size() != emissions.rows()) {
    throw dimension_error("tag sequence length " + std::to_string(tags.size()) +
                          " does not match emission rows " + std::to_string(emissions.rows()));
  }
  for (int t : tags) {
    if (t < 0 || static_cast<std::size_t>(t) >= num_tags_) {
      throw dimension_error("tag index " + std::to_string(t) + " out of range");
    }
  }
  // Accumulation order matches the Viterbi recursion so the decoded path's
  // score reproduces bitwise.
  double score = transitions_.value(start_state(), tags[0]) + emissions(0, tags[0]);
  for (std::size_t t = 1; t < tags.size(); ++t) {
    score += transitions_.value(tags[t - 1], tags[t]);
    score += emissions(t, tags[t]);
  }
  score += transitions_.value(tags[tags.size() - 1], stop_state());
  return score;
}

Matrix Crf::forward_lattice(const Matrix& emissions) const {
  const std::size_t len = emissions.rows();
  Matrix alpha(len, num_tags_);
  for (std::size_t j = 0; j < num_tags_; ++j) {
    alpha(0, j) = transitions_.value(start_state(), j) + emissions(0, j);
  }
  Vector scores(num_tags_);
  for (std::size_t t = 1; t < len; ++t) {
    for (std::size_t j = 0; j < num_tags_; ++j) {
      for (std::size_t i = 0; i < num_tags_; ++i) {
        scores[i] = alpha(t - 1, i) + transitions_.value(i, j);
      }
      alpha(t, j) = log_sum_exp(scores) + emissions(t, j);
    }
  }
  return alpha;
}

double Crf::log_partition(const Matrix& emissions) const {
  check_emissions(emissions);
  const Matrix alpha = forward_lattice(emissions);
  const std::size_t last = emissions.rows() - 1;
  Vector finals(num_tags_);
  for (std::size_t j = 0; j < num_tags_; ++j) {
    finals[j] = alpha(last, j) + transitions_.value(j, stop_state());
  }
  return log_sum_exp(finals);
}

double Crf::nll_and_gradient(const Matrix& emissions, std::span<const int> gold,
                             Matrix& d_emissions) {
  const double gold_score = score_sequence(emissions, gold);
  const std::size_t len = emissions.rows();
  const std::size_t n = num_tags_ + 2;

  const Matrix alpha = forward_lattice(emissions);

  // Backward lattice: beta[t][i] = log sum over path suffixes from tag i at t.
  Matrix beta(len, num_tags_);
  for (std::size_t i = 0; i < num_tags_; ++i) {
    beta(len - 1, i) = transitions_.value(i, stop_state());
  }
  Vector scores(num_tags_);
  for (std::size_t t = len - 1; t-- > 0;) {
    for (std::size_t i = 0; i < num_tags_; ++i) {
      for (std::size_t j = 0; j < num_tags_; ++j) {
        scores[j] = transitions_.value(i, j) + emissions(t + 1, j) + beta(t + 1, j);
      }
      beta(t, i) = log_sum_exp(scores);
    }
  }

  Vector finals(num_tags_);
  const std::size_t last = len - 1;
  for (std::size_t j = 0; j < num_tags_; ++j) {
    finals[j] = alpha(last, j) + transitions_.value(j, stop_state());
  }
  const double log_z = log_sum_exp(finals);

  // d_emissions = per-position marginals minus the gold one-hot.
  d_emissions = Matrix(len, num_tags_);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t j = 0; j < num_tags_; ++j) {
      d_emissions(t, j) = std::exp(alpha(t, j) + beta(t, j) - log_z);
    }
    d_emissions(t, gold[t]) -= 1.0;
  }

  // Transition gradient: expected minus observed counts.
  Matrix& t_grad = transitions_.grad;
  for (std::size_t j = 0; j < num_tags_; ++j) {
    t_grad(start_state(), j) += std::exp(alpha(0, j) + beta(0, j) - log_z);
    t_grad(j, stop_state()) += std::exp(alpha(last, j) + beta(last, j) - log_z);
  }
  t_grad(start_state(), gold[0]) -= 1.0;
  t_grad(gold[last], stop_state()) -= 1.0;
  for (std::size_t t = 0; t + 1 < len; ++t) {
    for (std::size_t i = 0; i < num_tags_; ++i) {
      for (std::size_t j = 0; j < num_tags_; ++j) {
        t_grad(i, j) += std::exp(alpha(t, i) + transitions_.value(i, j) +
                                 emissions(t + 1, j) + beta(t + 1, j) - log_z);
      }
    }
    t_grad(gold[t], gold[t + 1]) -= 1.0;
  }
  // Masked entries never move.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (masked_[i * n + j]) t_grad(i, j) = 0.0;
    }
  }

  return log_z - gold_score;
}

std::pair<std::vector<int>, double> Crf::viterbi_decode(const Matrix& emissions) const {
  check_emissions(emissions);
  const std::size_t len = emissions.rows();

  Matrix delta(len, num_tags_);
  std::vector<std::vector<int>> backptr(len, std::vector<int>(num_tags_, 0));
  for (std::size_t j = 0; j < num_tags_; ++j) {
    delta(0, j) = transitions_.value(start_state(), j) + emissions(0, j);
  }
  for (std::size_t t = 1; t < len; ++t) {
    for (std::size_t j = 0; j < num_tags_; ++j) {
      double best = delta(t - 1, 0) + transitions_.value(0, j) + emissions(t, j);
      int best_i = 0;
      for (std::size_t i = 1; i < num_tags_; ++i) {
        const double cand = delta(t - 1, i) + transitions_.value(i, j) + emissions(t, j);
        if (cand > best) {
          best = cand;
          best_i = static_cast<int>(i);
        }
      }
      delta(t, j) = best;
      backptr[t][j] = best_i;
    }
  }

  double best_score = delta(len - 1, 0) + transitions_.value(0, stop_state());
  int best_last = 0;
  for (std::size_t j = 1; j < num_tags_; ++j) {
    const double cand = delta(len - 1, j) + transitions_.value(j, stop_state());
    if (cand > best_score) {
      best_score = cand;
      best_last = static_cast<int>(j);
    }
  }

  std::vector<int> path(len);
  path[len - 1] = best_last;
  for (std::size_t t = len - 1; t-- > 0;) {
    path[t] = backptr[t + 1][path[t + 1]];
  }
  return {std::move(path), best_score};
}

}  // namespace seqtag
