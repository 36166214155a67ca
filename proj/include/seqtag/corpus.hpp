#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seqtag/error.hpp"

namespace seqtag {

// A typed, inclusive token interval: the unit of evaluation.
struct Span {
  std::string class_name;
  std::size_t start = 0;  // 0-based, inclusive
  std::size_t end = 0;    // 0-based, inclusive

  auto operator<=>(const Span&) const = default;
};

// Ordered concept classes and the IOB tag list derived from them:
// tags[0] is O, then B-<class>, I-<class> per class, so K = 1 + 2*|classes|.
// Tag indices are a pure function of the ordered class list and stay stable
// for the lifetime of a model.
class TagSet {
 public:
  enum class Kind { outside, begin, inside };

  TagSet();
  explicit TagSet(std::vector<std::string> classes);

  std::size_t num_tags() const { return tags_.size(); }  // K
  std::size_t num_classes() const { return classes_.size(); }

  const std::vector<std::string>& class_names() const { return classes_; }
  const std::vector<std::string>& tag_names() const { return tags_; }
  const std::string& tag_name(int tag_id) const { return tags_.at(tag_id); }

  // -1 when the tag string is not part of this set.
  int tag_index(const std::string& tag) const;

  Kind kind(int tag_id) const;
  // Class index of a B-/I- tag, -1 for O.
  int class_index(int tag_id) const;
  int begin_tag(std::size_t class_idx) const { return static_cast<int>(1 + 2 * class_idx); }
  int inside_tag(std::size_t class_idx) const { return static_cast<int>(2 + 2 * class_idx); }

  bool operator==(const TagSet& o) const { return classes_ == o.classes_; }

 private:
  std::vector<std::string> classes_;
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> index_;
};

// One tokenized sentence; tag_ids is empty for unlabeled input and otherwise
// parallel to tokens.
struct Sentence {
  std::vector<std::string> tokens;
  std::vector<int> tag_ids;

  bool labeled() const { return !tag_ids.empty(); }
  std::size_t size() const { return tokens.size(); }
};

struct Dataset {
  std::vector<Sentence> sentences;
  TagSet tag_set;
  std::vector<std::string> token_vocab;  // distinct tokens, first-occurrence order

  bool fully_labeled() const;
};

// Column format: one token per line as "token<TAB>tag" (labeled) or "token"
// (unlabeled); sentences separated by one blank line; '#'-prefixed lines at
// the top of the file are comments. Classes observed in the tags are sorted
// lexicographically to fix the tag indices. A file must be uniformly labeled
// or uniformly unlabeled.
Dataset parse_column_file(std::istream& in);

// Emits the same column format: labeled sentences as token<TAB>tag lines,
// one blank line between sentences.
void write_column_file(const std::vector<Sentence>& sentences, const TagSet& tags,
                       std::ostream& out);
void write_column_file(const Dataset& data, std::ostream& out);

// Maximal same-class runs become spans. A B- tag always opens a new span; an
// I-X without a same-class predecessor also opens one (repair rule), so the
// function is total over arbitrary tag sequences.
std::vector<Span> spans_from_iob(std::span<const int> tag_ids, const TagSet& tags);

// Inverse of spans_from_iob for valid non-overlapping span sets.
std::vector<int> iob_from_spans(const std::vector<Span>& spans, std::size_t length,
                                const TagSet& tags);

// Deterministic seeded sentence-level partition; |dev| = round(fraction * N).
std::pair<Dataset, Dataset> split_train_dev(const Dataset& data, double dev_fraction,
                                            std::uint64_t seed);

// Contiguous variant: first part trains, the trailing block is dev.
std::pair<Dataset, Dataset> split_contiguous(const Dataset& data, double dev_fraction);

}  // namespace seqtag
