#include "seqtag/embeddings.hpp"

#include <cctype>
#include <cstdlib>
#include <istream>
#include <sstream>
#include <unordered_set>

namespace seqtag {

namespace {

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void fill_random_row(std::span<double> row, Rng& rng) {
  for (double& v : row) v = rng.uniform(-1.0, 1.0);
}

bool parse_double(const std::string& s, double* out) {
  const char* begin = s.c_str();
  char* end = nullptr;
  *out = std::strtod(begin, &end);
  return end == begin + s.size() && !s.empty();
}

bool parse_count(const std::string& s, std::size_t* out) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  *out = static_cast<std::size_t>(std::strtoull(s.c_str(), nullptr, 10));
  return true;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream iss(line);
  std::string f;
  while (iss >> f) fields.push_back(f);
  return fields;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::vector<std::string> vocab, std::size_t dim, bool with_unk)
    : vocab_(std::move(vocab)),
      dim_(dim),
      has_unk_(with_unk),
      rows_("embeddings", vocab_.size() + (with_unk ? 1 : 0), dim) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_[vocab_[i]] = i;
  if (index_.size() != vocab_.size()) throw config_error("duplicate token in vocabulary");
  origins_.assign(vocab_.size(), RowOrigin::random);
}

std::size_t EmbeddingTable::unk_index() const {
  if (!has_unk_) throw lookup_error("table has no UNK row");
  return vocab_.size();
}

std::size_t EmbeddingTable::row_index(const std::string& token) const {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  if (!has_unk_) {
    throw lookup_error("unknown token '" + token + "' and table has no UNK row");
  }
  return vocab_.size();
}

double EmbeddingTable::oov_fraction() const {
  if (vocab_.empty()) return 0.0;
  std::size_t random_rows = 0;
  for (RowOrigin o : origins_) {
    if (o == RowOrigin::random) ++random_rows;
  }
  return static_cast<double>(random_rows) / static_cast<double>(vocab_.size());
}

bool EmbeddingTable::any_pretrained() const {
  for (RowOrigin o : origins_) {
    if (o == RowOrigin::pretrained) return true;
  }
  return false;
}

EmbeddingTable EmbeddingTable::random_init(const std::vector<std::string>& vocab, std::size_t dim,
                                           std::uint64_t seed, bool with_unk) {
  if (dim == 0) throw config_error("embedding dimension must be at least 1");
  EmbeddingTable table(vocab, dim, with_unk);
  Rng rng(seed);
  for (std::size_t r = 0; r < table.rows_.value.rows(); ++r) {
    fill_random_row(table.rows_.value.row(r), rng);
  }
  return table;
}

EmbeddingTable EmbeddingTable::load_pretrained(std::istream& in,
                                               const std::vector<std::string>& vocab,
                                               std::optional<std::size_t> dim_hint,
                                               std::uint64_t seed, bool with_unk) {
  if (vocab.empty()) throw config_error("vocabulary must be non-empty");

  // Keep only rows that can serve this vocabulary; pretrained files are
  // often orders of magnitude larger than the corpus vocabulary.
  std::unordered_set<std::string> wanted_exact(vocab.begin(), vocab.end());
  std::unordered_set<std::string> wanted_lower;
  for (const auto& tok : vocab) wanted_lower.insert(ascii_lower(tok));

  std::unordered_map<std::string, Vector> exact;
  std::unordered_map<std::string, Vector> lowered;
  std::optional<std::size_t> dim;

  std::string line;
  std::size_t lineno = 0;
  bool first_line = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (first_line) {
      first_line = false;
      // word2vec-style "<count> <dim>" header.
      std::size_t count = 0, header_dim = 0;
      if (fields.size() == 2 && parse_count(fields[0], &count) &&
          parse_count(fields[1], &header_dim)) {
        if (header_dim == 0) throw format_error("embedding header declares dimension 0");
        dim = header_dim;
        continue;
      }
    }
    if (fields.size() < 2) {
      throw format_error("embedding line " + std::to_string(lineno) + ": token without vector");
    }
    const std::size_t line_dim = fields.size() - 1;
    if (!dim) {
      dim = line_dim;
    } else if (line_dim != *dim) {
      throw format_error("embedding line " + std::to_string(lineno) + ": expected " +
                         std::to_string(*dim) + " components, got " + std::to_string(line_dim));
    }
    const bool keep_exact = wanted_exact.count(fields[0]) > 0;
    const std::string lower = ascii_lower(fields[0]);
    const bool keep_lower = wanted_lower.count(lower) > 0;
    if (!keep_exact && !keep_lower) continue;

    Vector vec(line_dim);
    for (std::size_t i = 0; i < line_dim; ++i) {
      if (!parse_double(fields[i + 1], &vec[i])) {
        throw format_error("embedding line " + std::to_string(lineno) + ": bad float '" +
                           fields[i + 1] + "'");
      }
    }
    // First occurrence of a token wins.
    if (keep_lower) lowered.emplace(lower, vec);
    if (keep_exact) exact.emplace(fields[0], std::move(vec));
  }

  if (!dim) dim = dim_hint;
  if (!dim) {
    throw format_error("embedding file declares no dimension and contains no vectors");
  }
  if (dim_hint && *dim != *dim_hint) {
    throw config_error("embedding dimension " + std::to_string(*dim) +
                       " does not match configured dimension " + std::to_string(*dim_hint));
  }

  EmbeddingTable table(vocab, *dim, with_unk);
  Rng rng(seed);
  for (std::size_t i = 0; i < table.vocab_.size(); ++i) {
    const std::string& token = table.vocab_[i];
    const Vector* vec = nullptr;
    auto e = exact.find(token);
    if (e != exact.end()) {
      vec = &e->second;
    } else {
      auto l = lowered.find(ascii_lower(token));
      if (l != lowered.end()) vec = &l->second;
    }
    if (vec) {
      auto row = table.rows_.value.row(i);
      for (std::size_t c = 0; c < *dim; ++c) row[c] = (*vec)[c];
      table.origins_[i] = RowOrigin::pretrained;
    } else {
      fill_random_row(table.rows_.value.row(i), rng);
    }
  }
  if (with_unk) fill_random_row(table.rows_.value.row(table.vocab_.size()), rng);
  return table;
}

EmbeddingTable EmbeddingTable::from_parts(std::vector<std::string> vocab, std::size_t dim,
                                          Matrix row_values, std::vector<RowOrigin> origins,
                                          bool with_unk) {
  EmbeddingTable table(std::move(vocab), dim, with_unk);
  if (!row_values.same_shape(table.rows_.value)) {
    throw load_error("embedding matrix shape does not match vocabulary");
  }
  if (origins.size() != table.vocab_.size()) {
    throw load_error("embedding origin flags do not match vocabulary");
  }
  table.rows_.value = std::move(row_values);
  table.origins_ = std::move(origins);
  return table;
}

}  // namespace seqtag
