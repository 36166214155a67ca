#include "seqtag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include "seqtag/nncore.hpp"

namespace seqtag {

TagSet::TagSet() : TagSet(std::vector<std::string>{}) {}

TagSet::TagSet(std::vector<std::string> classes) : classes_(std::move(classes)) {
  for (const auto& c : classes_) {
    if (c.empty()) throw validation_error("empty concept-class name");
  }
  if (std::set<std::string>(classes_.begin(), classes_.end()).size() != classes_.size()) {
    throw validation_error("duplicate concept-class name");
  }
  tags_.reserve(1 + 2 * classes_.size());
  tags_.push_back("O");
  for (const auto& c : classes_) {
    tags_.push_back("B-" + c);
    tags_.push_back("I-" + c);
  }
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    index_[tags_[i]] = static_cast<int>(i);
  }
}

int TagSet::tag_index(const std::string& tag) const {
  auto it = index_.find(tag);
  return it == index_.end() ? -1 : it->second;
}

TagSet::Kind TagSet::kind(int tag_id) const {
  if (tag_id == 0) return Kind::outside;
  return tag_id % 2 == 1 ? Kind::begin : Kind::inside;
}

int TagSet::class_index(int tag_id) const {
  if (tag_id == 0) return -1;
  return (tag_id - 1) / 2;
}

bool Dataset::fully_labeled() const {
  for (const auto& s : sentences) {
    if (!s.labeled()) return false;
  }
  return true;
}

namespace {

// "O" or B-/I- with a nonempty class; anything else is rejected.
bool well_formed_tag(const std::string& tag, std::string* class_name) {
  if (tag == "O") {
    class_name->clear();
    return true;
  }
  if (tag.size() >= 3 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
    *class_name = tag.substr(2);
    return true;
  }
  return false;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dataset part;
  part.tag_set = data.tag_set;
  std::set<std::string> seen;
  for (std::size_t idx : indices) {
    part.sentences.push_back(data.sentences[idx]);
    for (const auto& tok : data.sentences[idx].tokens) {
      if (seen.insert(tok).second) part.token_vocab.push_back(tok);
    }
  }
  return part;
}

}  // namespace

Dataset parse_column_file(std::istream& in) {
  struct RawSentence {
    std::vector<std::string> tokens;
    std::vector<std::string> tags;
  };
  std::vector<RawSentence> raw;
  RawSentence current;
  std::set<std::string> classes;
  bool past_header = false;
  // -1 unknown, 0 unlabeled, 1 labeled; fixed by the first token line.
  int file_labeled = -1;
  std::size_t lineno = 0;

  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!past_header && !line.empty() && line[0] == '#') continue;

    if (line.empty()) {
      past_header = true;
      if (!current.tokens.empty()) {
        raw.push_back(std::move(current));
        current = RawSentence{};
      }
      continue;
    }
    past_header = true;

    auto fields = split_tabs(line);
    if (fields.size() > 2) {
      throw seqtag::parse_error("line " + std::to_string(lineno) + ": expected 1 or 2 columns, got " +
                                std::to_string(fields.size()));
    }
    if (fields[0].empty()) {
      throw seqtag::parse_error("line " + std::to_string(lineno) + ": empty token");
    }
    const bool labeled = fields.size() == 2;
    if (file_labeled == -1) {
      file_labeled = labeled ? 1 : 0;
    } else if (file_labeled != (labeled ? 1 : 0)) {
      throw seqtag::parse_error("line " + std::to_string(lineno) +
                                ": file mixes labeled and unlabeled tokens");
    }
    current.tokens.push_back(fields[0]);
    if (labeled) {
      std::string class_name;
      if (!well_formed_tag(fields[1], &class_name)) {
        throw seqtag::parse_error("line " + std::to_string(lineno) + ": unknown tag '" + fields[1] +
                                  "' (expected O, B-<class> or I-<class>)");
      }
      if (!class_name.empty()) classes.insert(class_name);
      current.tags.push_back(fields[1]);
    }
  }
  if (!current.tokens.empty()) raw.push_back(std::move(current));

  Dataset data;
  data.tag_set = TagSet(std::vector<std::string>(classes.begin(), classes.end()));
  std::set<std::string> seen;
  for (auto& rs : raw) {
    Sentence s;
    s.tokens = std::move(rs.tokens);
    for (const auto& tag : rs.tags) {
      s.tag_ids.push_back(data.tag_set.tag_index(tag));
    }
    for (const auto& tok : s.tokens) {
      if (seen.insert(tok).second) data.token_vocab.push_back(tok);
    }
    data.sentences.push_back(std::move(s));
  }
  return data;
}

void write_column_file(const std::vector<Sentence>& sentences, const TagSet& tags,
                       std::ostream& out) {
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i > 0) out << '\n';
    const Sentence& s = sentences[i];
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      out << s.tokens[t];
      if (s.labeled()) out << '\t' << tags.tag_name(s.tag_ids[t]);
      out << '\n';
    }
  }
}

void write_column_file(const Dataset& data, std::ostream& out) {
  write_column_file(data.sentences, data.tag_set, out);
}

std::vector<Span> spans_from_iob(std::span<const int> tag_ids, const TagSet& tags) {
  std::vector<Span> spans;
  int open_class = -1;
  std::size_t open_start = 0;
  auto close = [&](std::size_t end) {
    if (open_class >= 0) {
      spans.push_back(Span{tags.class_names()[open_class], open_start, end});
      open_class = -1;
    }
  };
  for (std::size_t t = 0; t < tag_ids.size(); ++t) {
    const int id = tag_ids[t];
    switch (tags.kind(id)) {
      case TagSet::Kind::outside:
        close(t - 1);
        break;
      case TagSet::Kind::begin:
        close(t - 1);
        open_class = tags.class_index(id);
        open_start = t;
        break;
      case TagSet::Kind::inside: {
        const int cls = tags.class_index(id);
        if (cls != open_class) {
          // Repair: an I-X with no same-class predecessor opens a span.
          close(t - 1);
          open_class = cls;
          open_start = t;
        }
        break;
      }
    }
  }
  close(tag_ids.size() - 1);
  return spans;
}

std::vector<int> iob_from_spans(const std::vector<Span>& spans, std::size_t length,
                                const TagSet& tags) {
  std::vector<Span> sorted = spans;
  std::sort(sorted.begin(), sorted.end(),
            [](const Span& a, const Span& b) { return a.start < b.start; });
  std::vector<int> ids(length, 0);
  std::size_t next_free = 0;
  for (const Span& sp : sorted) {
    if (sp.start > sp.end || sp.end >= length) {
      throw validation_error("span [" + std::to_string(sp.start) + ", " +
                             std::to_string(sp.end) + "] out of range for length " +
                             std::to_string(length));
    }
    if (sp.start < next_free) {
      throw validation_error("overlapping spans at token " + std::to_string(sp.start));
    }
    auto cls_it = std::find(tags.class_names().begin(), tags.class_names().end(), sp.class_name);
    if (cls_it == tags.class_names().end()) {
      throw validation_error("unknown concept class '" + sp.class_name + "'");
    }
    const std::size_t cls = cls_it - tags.class_names().begin();
    ids[sp.start] = tags.begin_tag(cls);
    for (std::size_t t = sp.start + 1; t <= sp.end; ++t) ids[t] = tags.inside_tag(cls);
    next_free = sp.end + 1;
  }
  return ids;
}

std::pair<Dataset, Dataset> split_train_dev(const Dataset& data, double dev_fraction,
                                            std::uint64_t seed) {
  if (dev_fraction <= 0.0 || dev_fraction >= 1.0) {
    throw config_error("dev fraction must lie in (0, 1), got " + std::to_string(dev_fraction));
  }
  const std::size_t n = data.sentences.size();
  if (n < 2) {
    throw input_error("cannot split a dataset with fewer than 2 sentences");
  }
  const std::size_t dev_n =
      static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::size_t> dev_idx(order.begin(), order.begin() + dev_n);
  std::vector<std::size_t> train_idx(order.begin() + dev_n, order.end());
  // Keep the original sentence order inside each part.
  std::sort(dev_idx.begin(), dev_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  return {subset(data, train_idx), subset(data, dev_idx)};
}

std::pair<Dataset, Dataset> split_contiguous(const Dataset& data, double dev_fraction) {
  if (dev_fraction <= 0.0 || dev_fraction >= 1.0) {
    throw config_error("dev fraction must lie in (0, 1), got " + std::to_string(dev_fraction));
  }
  const std::size_t n = data.sentences.size();
  if (n < 2) {
    throw input_error("cannot split a dataset with fewer than 2 sentences");
  }
  const std::size_t dev_n =
      static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(n)));
  std::vector<std::size_t> train_idx, dev_idx;
  for (std::size_t i = 0; i < n - dev_n; ++i) train_idx.push_back(i);
  for (std::size_t i = n - dev_n; i < n; ++i) dev_idx.push_back(i);
  return {subset(data, train_idx), subset(data, dev_idx)};
}

}  // namespace seqtag
