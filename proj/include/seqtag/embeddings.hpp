#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqtag/nncore.hpp"

namespace seqtag {

enum class RowOrigin : std::uint8_t { pretrained, random };

// Per-token input vectors. Rows are trainable (fine-tuned during training);
// a reserved UNK row, always randomly initialized, serves prediction-time
// out-of-vocabulary tokens. The UNK row is not counted in oov_fraction.
class EmbeddingTable {
 public:
  // Every component i.i.d. uniform on [-1, 1], drawn in vocab order (then the
  // UNK row), so the table is a pure function of (vocab, dim, seed).
  static EmbeddingTable random_init(const std::vector<std::string>& vocab, std::size_t dim,
                                    std::uint64_t seed, bool with_unk = true);

  // Text format: optional first line "<count> <dim>", then lines
  // "<token> <v1> ... <vd>". Vocab tokens found in the stream keep the file's
  // vector (exact match first, lowercased fallback second); all others get a
  // fresh random vector from the same [-1, 1] rule.
  static EmbeddingTable load_pretrained(std::istream& in, const std::vector<std::string>& vocab,
                                        std::optional<std::size_t> dim_hint, std::uint64_t seed,
                                        bool with_unk = true);

  // Reassembles a table from archived parts.
  static EmbeddingTable from_parts(std::vector<std::string> vocab, std::size_t dim,
                                   Matrix row_values, std::vector<RowOrigin> origins,
                                   bool with_unk);

  std::size_t dim() const { return dim_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }
  bool has_unk() const { return has_unk_; }
  std::size_t unk_index() const;

  // Row index for a token; unknown tokens route to the UNK row.
  std::size_t row_index(const std::string& token) const;
  std::span<const double> row(std::size_t index) const { return rows_.value.row(index); }
  std::span<const double> lookup(const std::string& token) const { return row(row_index(token)); }

  RowOrigin origin(std::size_t vocab_index) const { return origins_.at(vocab_index); }
  const std::vector<RowOrigin>& origins() const { return origins_; }
  // (#random vocab rows) / (#vocab rows).
  double oov_fraction() const;
  bool any_pretrained() const;

  // Trainable storage: vocab rows plus the UNK row when present.
  Param& rows() { return rows_; }
  const Param& rows() const { return rows_; }

 private:
  EmbeddingTable(std::vector<std::string> vocab, std::size_t dim, bool with_unk);

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
  bool has_unk_ = true;
  Param rows_;
  std::vector<RowOrigin> origins_;
};

}  // namespace seqtag
