#include "seqtag/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>

namespace seqtag {

double precision_pct(const MatchCounts& c) {
  const long long denom = c.tp + c.fp;
  return denom == 0 ? 0.0 : 100.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double recall_pct(const MatchCounts& c) {
  const long long denom = c.tp + c.fn;
  return denom == 0 ? 0.0 : 100.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double f1_pct(const MatchCounts& c) {
  const double p = precision_pct(c);
  const double r = recall_pct(c);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

std::string EvalReport::summary_line() const {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "overall P=%.2f R=%.2f F1=%.2f", precision_pct(overall),
                recall_pct(overall), f1_pct(overall));
  return buf;
}

void EvalReport::render(std::ostream& out) const {
  std::size_t width = 7;  // "overall"
  for (const auto& [name, counts] : per_class) width = std::max(width, name.size());

  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %8s %8s %8s %8s %8s %8s\n", static_cast<int>(width),
                "class", "P", "R", "F1", "tp", "fp", "fn");
  out << buf;
  auto line = [&](const std::string& name, const MatchCounts& c) {
    std::snprintf(buf, sizeof(buf), "%-*s %8.2f %8.2f %8.2f %8lld %8lld %8lld\n",
                  static_cast<int>(width), name.c_str(), precision_pct(c), recall_pct(c),
                  f1_pct(c), c.tp, c.fp, c.fn);
    out << buf;
  };
  for (const auto& [name, counts] : per_class) line(name, counts);
  line("overall", overall);
}

EvalReport score_spans(const std::vector<std::vector<Span>>& gold,
                       const std::vector<std::vector<Span>>& predicted) {
  if (gold.size() != predicted.size()) {
    throw input_error("gold has " + std::to_string(gold.size()) + " sentences, predictions have " +
                      std::to_string(predicted.size()));
  }
  EvalReport report;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const std::set<Span> gold_set(gold[s].begin(), gold[s].end());
    const std::set<Span> pred_set(predicted[s].begin(), predicted[s].end());
    for (const Span& sp : pred_set) {
      if (gold_set.count(sp)) {
        ++report.per_class[sp.class_name].tp;
      } else {
        ++report.per_class[sp.class_name].fp;
      }
    }
    for (const Span& sp : gold_set) {
      if (!pred_set.count(sp)) ++report.per_class[sp.class_name].fn;
    }
  }
  for (const auto& [name, counts] : report.per_class) {
    report.overall.tp += counts.tp;
    report.overall.fp += counts.fp;
    report.overall.fn += counts.fn;
  }
  return report;
}

EvalReport score_tag_files(std::istream& gold, std::istream& predicted) {
  const Dataset gold_data = parse_column_file(gold);
  const Dataset pred_data = parse_column_file(predicted);
  if (!gold_data.fully_labeled() || !pred_data.fully_labeled()) {
    throw input_error("both files must carry tags");
  }
  if (gold_data.sentences.size() != pred_data.sentences.size()) {
    throw alignment_error("gold has " + std::to_string(gold_data.sentences.size()) +
                          " sentences, predictions have " +
                          std::to_string(pred_data.sentences.size()));
  }
  std::vector<std::vector<Span>> gold_spans, pred_spans;
  for (std::size_t s = 0; s < gold_data.sentences.size(); ++s) {
    const Sentence& g = gold_data.sentences[s];
    const Sentence& p = pred_data.sentences[s];
    const std::size_t common = std::min(g.tokens.size(), p.tokens.size());
    for (std::size_t t = 0; t < common; ++t) {
      if (g.tokens[t] != p.tokens[t]) {
        throw alignment_error("token mismatch at sentence " + std::to_string(s) + " token " +
                              std::to_string(t) + ": '" + g.tokens[t] + "' vs '" + p.tokens[t] +
                              "'");
      }
    }
    if (g.tokens.size() != p.tokens.size()) {
      throw alignment_error("length mismatch at sentence " + std::to_string(s) + " token " +
                            std::to_string(common));
    }
    gold_spans.push_back(spans_from_iob(g.tag_ids, gold_data.tag_set));
    pred_spans.push_back(spans_from_iob(p.tag_ids, pred_data.tag_set));
  }
  return score_spans(gold_spans, pred_spans);
}

}  // namespace seqtag
