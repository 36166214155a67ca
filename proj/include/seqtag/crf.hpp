#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "seqtag/corpus.hpp"
#include "seqtag/nncore.hpp"

namespace seqtag {

// Linear-chain CRF output layer. The transition matrix is (K+2)x(K+2) with
// synthetic START (index K) and STOP (index K+1) states; rows are from-tags.
// A path over tags y_1..y_T scores
//   sum_t emissions[t][y_t] + T(START, y_1) + sum_t T(y_t, y_{t+1}) + T(y_T, STOP).
// Forbidden transitions hold the large negative sentinel kImpossible instead
// of -inf so log-sum-exp never produces NaN; masked entries are never updated.
class Crf {
 public:
  static constexpr double kImpossible = -1e4;

  explicit Crf(std::size_t num_tags);

  std::size_t num_tags() const { return num_tags_; }
  std::size_t start_state() const { return num_tags_; }
  std::size_t stop_state() const { return num_tags_ + 1; }

  double transition(std::size_t from, std::size_t to) const {
    return transitions_.value(from, to);
  }
  Param& transitions() { return transitions_; }
  const Param& transitions() const { return transitions_; }
  bool masked(std::size_t from, std::size_t to) const {
    return masked_[from * (num_tags_ + 2) + to] != 0;
  }

  // Forbids IOB-invalid transitions (anything -> I-X except from B-X or I-X)
  // by masking them at kImpossible.
  void apply_iob_constraints(const TagSet& tags);

  double score_sequence(const Matrix& emissions, std::span<const int> tags) const;

  // log sum over all K^T paths of exp(path score); forward algorithm in log
  // space, always >= the best path score.
  double log_partition(const Matrix& emissions) const;

  // Negative log-likelihood of the gold path and its exact gradients.
  // d_emissions is overwritten with (marginals - gold one-hot); the
  // transition gradient (expected minus observed counts) accumulates into
  // transitions().grad with masked entries forced to zero.
  double nll_and_gradient(const Matrix& emissions, std::span<const int> gold,
                          Matrix& d_emissions);

  // Best path and its score. Ties break toward the lowest tag index at every
  // backtrack step, so decoding is deterministic.
  std::pair<std::vector<int>, double> viterbi_decode(const Matrix& emissions) const;

 private:
  void check_emissions(const Matrix& emissions) const;
  Matrix forward_lattice(const Matrix& emissions) const;

  std::size_t num_tags_;
  Param transitions_;
  std::vector<std::uint8_t> masked_;
};

}  // namespace seqtag
