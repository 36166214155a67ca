#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "seqtag/corpus.hpp"
#include "seqtag/crf.hpp"
#include "seqtag/embeddings.hpp"
#include "seqtag/encoder.hpp"
#include "seqtag/eval.hpp"

namespace seqtag {

enum class OutputLayer { crf, softmax };

std::string to_string(CellKind kind);
std::string to_string(OutputLayer layer);
CellKind cell_kind_from_string(const std::string& s);
OutputLayer output_layer_from_string(const std::string& s);

struct TrainConfig {
  std::size_t dim = 100;        // embedding dimension, grid {50, 100, 300, 500}
  double learning_rate = 0.05;  // [0.05, 0.1]
  double dropout = 0.05;        // [0.05, 0.1]
  std::size_t hidden = 100;
  std::size_t max_epochs = 50;
  double dev_fraction = 0.3;
  std::uint64_t seed = 42;
  CellKind cell = CellKind::lstm;
  OutputLayer output_layer = OutputLayer::crf;
  std::string embeddings_path;  // empty: random initialization
  double clip_norm = 5.0;       // 0 disables gradient clipping
  bool constrain_transitions = false;
  bool contiguous_split = false;

  // Enforces the documented ranges; the CLI calls this after flag parsing.
  void validate() const;

  // Single-line key=value rendering; embeddings= comes last so the path may
  // contain spaces. Doubles print with full precision and parse back exactly.
  std::string echo() const;
  static TrainConfig from_echo(const std::string& line);
};

// A trained tagger: everything needed to decode new text.
struct Model {
  TagSet tag_set;
  EmbeddingTable embeddings;
  Encoder encoder;
  std::optional<Crf> crf;
  TrainConfig config;

  Model(TagSet tag_set_, EmbeddingTable embeddings_, Encoder encoder_, std::optional<Crf> crf_,
        TrainConfig config_);

  OutputLayer output_layer() const { return config.output_layer; }
  // Viterbi path under the CRF, or per-token argmax in softmax mode.
  std::vector<int> predict_tags(const std::vector<std::string>& tokens) const;
  std::vector<Param*> params();
};

struct EpochStats {
  double train_nll = 0.0;  // mean per-sentence negative log-likelihood
  double dev_f1 = 0.0;     // micro-averaged exact-match F1, percent
  double seconds = 0.0;
};

struct RunLog {
  std::string config_echo;
  std::string embedding_stats;
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based

  double best_dev_f1() const;
  void write(std::ostream& out) const;
  // Equality of everything deterministic; wall times are excluded.
  bool same_trajectory(const RunLog& other) const;
};

struct TrainResult {
  Model model;
  RunLog log;
};

// Full training protocol: deterministic seeded split, per-epoch shuffled SGD
// with dropout and clipping, per-epoch dev decoding, and retention of the
// parameters from the best dev epoch.
TrainResult train(const TrainConfig& config, const Dataset& data);
TrainResult train_file(const TrainConfig& config, const std::string& train_path);

// Core loop on an explicit split. Vocabulary and tag set must cover both
// parts (they normally come from the unsplit dataset).
TrainResult train_on_split(const TrainConfig& config, const TagSet& tag_set,
                           const std::vector<std::string>& vocab,
                           const std::vector<Sentence>& train_part,
                           const std::vector<Sentence>& dev_part);

// Tags every sentence; tokens pass through unchanged and the returned tag ids
// index the model's tag set.
std::vector<Sentence> predict_sentences(const Model& model, const std::vector<Sentence>& input);

// Predict, then score the predictions against the file's gold tags.
EvalReport evaluate_dataset(const Model& model, const Dataset& labeled);

struct TuneTrial {
  std::size_t index = 0;
  TrainConfig config;
  double dev_f1 = 0.0;
  bool failed = false;
  std::string error;
};

struct TuneResult {
  TrainConfig best;
  std::size_t best_index = 0;
  std::vector<TuneTrial> trials;

  void write_table(std::ostream& out) const;
};

// Random search: lr and dropout sampled uniformly from [0.05, 0.1],
// dimension uniformly from {50, 100, 300, 500}. All trials share
// one train/dev split whose seed derives from `seed` alone, so they stay
// comparable. When an embeddings file is configured the dimension is pinned
// to it and excluded from the search.
TuneResult tune(const TrainConfig& base, const Dataset& data, std::size_t trials,
                std::uint64_t seed);

struct GradCheckReport {
  struct Entry {
    std::string name;
    double max_rel_error = 0.0;
  };
  std::vector<Entry> entries;

  double worst() const;
  bool passed(double threshold = 1e-4) const { return worst() < threshold; }
};

// Finite-difference sweep over every parameter group of a small random model
// (both cell kinds, CRF loss, dropout disabled), embedding rows and CRF
// transitions included.
GradCheckReport run_gradient_checks(std::uint64_t seed);

}  // namespace seqtag
