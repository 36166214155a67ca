#include "support/synthetic.hpp"

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace seqtag::testsupport {

namespace {

const std::vector<std::string> kClasses = {"problem", "test", "treatment"};
constexpr std::size_t kFillerCount = 20;
constexpr std::size_t kHeadsPerClass = 4;
constexpr std::size_t kInsidePerClass = 6;

std::string filler_token(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "filler%02zu", i);
  return buf;
}

std::string head_token(std::size_t cls, std::size_t i) {
  return kClasses[cls] + "_hd" + std::to_string(i);
}

std::string inside_token(std::size_t cls, std::size_t i) {
  return kClasses[cls] + "_in" + std::to_string(i);
}

}  // namespace

const std::vector<std::string>& synthetic_vocab() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < kFillerCount; ++i) v.push_back(filler_token(i));
    for (std::size_t cls = 0; cls < kClasses.size(); ++cls) {
      for (std::size_t i = 0; i < kHeadsPerClass; ++i) v.push_back(head_token(cls, i));
      for (std::size_t i = 0; i < kInsidePerClass; ++i) v.push_back(inside_token(cls, i));
    }
    return v;
  }();
  return vocab;
}

std::string synthetic_corpus_text(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  std::ostringstream out;
  for (std::size_t s = 0; s < spec.sentences; ++s) {
    if (s > 0) out << '\n';
    const std::size_t target = 5 + rng.below(11);  // 5..15 tokens
    std::size_t len = 0;
    while (len < target) {
      const std::size_t remaining = target - len;
      if (rng.uniform() < 0.45) {
        const std::size_t cls = rng.below(kClasses.size());
        const std::size_t span_len = 1 + rng.below(std::min<std::size_t>(3, remaining));
        out << head_token(cls, rng.below(kHeadsPerClass)) << '\t' << "B-" << kClasses[cls]
            << '\n';
        for (std::size_t i = 1; i < span_len; ++i) {
          out << inside_token(cls, rng.below(kInsidePerClass)) << '\t' << "I-" << kClasses[cls]
              << '\n';
        }
        len += span_len;
      } else {
        out << filler_token(rng.below(kFillerCount)) << "\tO\n";
        ++len;
      }
    }
  }
  return out.str();
}

Dataset synthetic_corpus(const SyntheticSpec& spec) {
  std::istringstream in(synthetic_corpus_text(spec));
  return parse_column_file(in);
}

std::string clustered_embeddings_text(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream out;
  const std::size_t block = dim / 4;
  auto write_vector = [&](const std::string& token, std::size_t block_index, double magnitude) {
    out << token;
    char buf[32];
    for (std::size_t k = 0; k < dim; ++k) {
      const bool in_block = k >= block_index * block && k < (block_index + 1) * block;
      const double base = in_block ? magnitude : 0.0;
      std::snprintf(buf, sizeof(buf), " %.6f", base + rng.uniform(-0.05, 0.05));
      out << buf;
    }
    out << '\n';
  };
  for (std::size_t i = 0; i < kFillerCount; ++i) write_vector(filler_token(i), 3, 0.75);
  for (std::size_t cls = 0; cls < kClasses.size(); ++cls) {
    for (std::size_t i = 0; i < kHeadsPerClass; ++i) write_vector(head_token(cls, i), cls, 0.75);
    for (std::size_t i = 0; i < kInsidePerClass; ++i) {
      write_vector(inside_token(cls, i), cls, 0.35);
    }
  }
  return out.str();
}

std::vector<Span> random_valid_spans(Rng& rng, std::size_t length, const TagSet& tags) {
  std::vector<Span> spans;
  std::size_t t = 0;
  while (t < length) {
    if (rng.uniform() < 0.35 && !tags.class_names().empty()) {
      const std::size_t cls = rng.below(tags.class_names().size());
      const std::size_t max_len = std::min<std::size_t>(3, length - t);
      const std::size_t span_len = 1 + rng.below(max_len);
      spans.push_back(Span{tags.class_names()[cls], t, t + span_len - 1});
      t += span_len + rng.below(2);  // optionally leave a gap
    } else {
      ++t;
    }
  }
  return spans;
}

std::vector<int> random_tag_ids(Rng& rng, std::size_t length, const TagSet& tags) {
  std::vector<int> ids(length);
  for (auto& id : ids) id = static_cast<int>(rng.below(tags.num_tags()));
  return ids;
}

Dataset random_dataset(Rng& rng, std::size_t max_sentences) {
  static const std::vector<std::string> pool = {"alpha", "beta",  "gamma", "delta",
                                                "eps",   "zeta",  "eta",   "theta"};
  const TagSet tags({"x", "y"});
  std::ostringstream out;
  const std::size_t n = 2 + rng.below(max_sentences);
  for (std::size_t s = 0; s < n; ++s) {
    if (s > 0) out << '\n';
    const std::size_t len = 1 + rng.below(8);
    const auto spans = random_valid_spans(rng, len, tags);
    std::vector<int> ids = iob_from_spans(spans, len, tags);
    for (std::size_t t = 0; t < len; ++t) {
      out << pool[rng.below(pool.size())] << '\t' << tags.tag_name(ids[t]) << '\n';
    }
  }
  std::istringstream in(out.str());
  return parse_column_file(in);
}

std::string write_temp_file(const std::string& stem, const std::string& contents) {
  static std::size_t counter = 0;
  const auto dir = std::filesystem::temp_directory_path() / "seqtag_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / (stem + "." + std::to_string(::getpid()) + "." +
                           std::to_string(counter++));
  std::ofstream out(path);
  out << contents;
  return path.string();
}

}  // namespace seqtag::testsupport
