#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "seqtag/corpus.hpp"

namespace seqtag {

struct MatchCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
};

// Percentages; zero-denominator metrics report 0 so the report stays total.
double precision_pct(const MatchCounts& c);
double recall_pct(const MatchCounts& c);
double f1_pct(const MatchCounts& c);

// Exact-match span scoring: a predicted (class, start, end) triple is a true
// positive iff the same sentence's gold list contains it. Overall counts are
// sums over classes (micro-averaging); overall F1 always derives from the
// summed counts, never from averaging per-class F1.
struct EvalReport {
  std::map<std::string, MatchCounts> per_class;
  MatchCounts overall;

  // "overall P=<p> R=<r> F1=<f>" with two decimals.
  std::string summary_line() const;
  // Aligned plain-text table with a row per class plus the overall row.
  void render(std::ostream& out) const;
};

// Span lists are treated as sets per sentence; gold and predicted must have
// the same number of sentences.
EvalReport score_spans(const std::vector<std::vector<Span>>& gold,
                       const std::vector<std::vector<Span>>& predicted);

// File-level wrapper: parses both column files, requires identical token
// sequences, extracts spans (the IOB repair rule applies) and scores them.
EvalReport score_tag_files(std::istream& gold, std::istream& predicted);

}  // namespace seqtag
