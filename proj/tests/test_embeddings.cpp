#include <cmath>
#include <sstream>

#include "doctest.h"
#include "seqtag/embeddings.hpp"

using namespace seqtag;

namespace {

EmbeddingTable load_text(const std::string& text, const std::vector<std::string>& vocab,
                         std::optional<std::size_t> dim_hint = std::nullopt,
                         std::uint64_t seed = 1) {
  std::istringstream in(text);
  return EmbeddingTable::load_pretrained(in, vocab, dim_hint, seed);
}

}  // namespace

TEST_SUITE_BEGIN("embeddings");

TEST_CASE("random_init") {
  const std::vector<std::string> vocab = {"a", "b", "c"};
  SUBCASE("components stay within [-1, 1]") {
    const EmbeddingTable table = EmbeddingTable::random_init(vocab, 40, 9);
    for (double v : table.rows().value.data()) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
    CHECK(table.oov_fraction() == 1.0);
    CHECK(table.rows().value.rows() == 4);  // vocab + UNK
  }
  SUBCASE("deterministic given the seed") {
    const EmbeddingTable a = EmbeddingTable::random_init(vocab, 16, 123);
    const EmbeddingTable b = EmbeddingTable::random_init(vocab, 16, 123);
    const auto da = a.rows().value.data();
    const auto db = b.rows().value.data();
    for (std::size_t i = 0; i < da.size(); ++i) CHECK(da[i] == db[i]);
    const EmbeddingTable c = EmbeddingTable::random_init(vocab, 16, 124);
    bool any_diff = false;
    const auto dc = c.rows().value.data();
    for (std::size_t i = 0; i < da.size(); ++i) any_diff |= da[i] != dc[i];
    CHECK(any_diff);
  }
  SUBCASE("empirical mean of 1e5 components is near zero") {
    std::vector<std::string> big;
    for (int i = 0; i < 1000; ++i) big.push_back("w" + std::to_string(i));
    const EmbeddingTable table = EmbeddingTable::random_init(big, 100, 2026);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < 1000; ++r) {
      for (double v : table.row(r)) {
        sum += v;
        ++count;
      }
    }
    const double mean = sum / static_cast<double>(count);
    CHECK(count == 100000);
    CHECK(mean >= -0.02);
    CHECK(mean <= 0.02);
  }
  SUBCASE("zero dimension is a config error") {
    CHECK_THROWS_AS(EmbeddingTable::random_init(vocab, 0, 1), Error);
  }
}

TEST_CASE("load_pretrained") {
  SUBCASE("found token keeps the file vector, missing token goes random") {
    const EmbeddingTable table = load_text("a 0.1 0.2\n", {"a", "b"});
    CHECK(table.dim() == 2);
    CHECK(table.lookup("a")[0] == 0.1);
    CHECK(table.lookup("a")[1] == 0.2);
    CHECK(table.origin(0) == RowOrigin::pretrained);
    CHECK(table.origin(1) == RowOrigin::random);
    CHECK(table.oov_fraction() == doctest::Approx(0.5));
  }
  SUBCASE("word2vec header fixes the dimension") {
    const EmbeddingTable table = load_text("2 3\nx 1 2 3\ny 4 5 6\n", {"x", "y"});
    CHECK(table.dim() == 3);
    CHECK(table.oov_fraction() == 0.0);
    CHECK(table.lookup("y")[2] == 6.0);
  }
  SUBCASE("one of four vocab tokens present reports 0.75") {
    const EmbeddingTable table = load_text("c 1.0 -1.0\n", {"a", "b", "c", "d"});
    CHECK(table.oov_fraction() == doctest::Approx(0.75));
  }
  SUBCASE("inconsistent vector lengths are a format error") {
    CHECK_THROWS_AS(load_text("a 1 2\nb 1 2 3\n", {"a"}), Error);
    CHECK_THROWS_AS(load_text("3 2\na 1 2 3\n", {"a"}), Error);
  }
  SUBCASE("dimension hint mismatch is a config error") {
    try {
      load_text("a 1 2 3\n", {"a"}, 5);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.kind() == "config error");
    }
  }
  SUBCASE("no token found leaves the table all-random") {
    const EmbeddingTable table = load_text("other 1 2\n", {"a", "b"});
    CHECK(table.oov_fraction() == 1.0);
    CHECK_FALSE(table.any_pretrained());
  }
  SUBCASE("lowercase fallback, exact match first") {
    const EmbeddingTable fallback = load_text("cat 1 1\n", {"Cat"});
    CHECK(fallback.origin(0) == RowOrigin::pretrained);
    CHECK(fallback.lookup("Cat")[0] == 1.0);

    const EmbeddingTable exact = load_text("Cat 2 2\ncat 1 1\n", {"Cat"});
    CHECK(exact.lookup("Cat")[0] == 2.0);
  }
  SUBCASE("file values round-trip bitwise") {
    const double value = 0.12345678901234567;
    char line[128];
    std::snprintf(line, sizeof(line), "a %.17g 1.0\n", value);
    const EmbeddingTable table = load_text(line, {"a"});
    CHECK(table.lookup("a")[0] == value);
  }
  SUBCASE("empty vocabulary is rejected") {
    CHECK_THROWS_AS(load_text("a 1 2\n", {}), Error);
  }
  SUBCASE("a file with no vectors needs a dimension hint") {
    CHECK_THROWS_AS(load_text("", {"a"}), Error);
    const EmbeddingTable table = load_text("", {"a"}, 4);
    CHECK(table.dim() == 4);
    CHECK(table.oov_fraction() == 1.0);
  }
}

TEST_CASE("lookup") {
  const std::vector<std::string> vocab = {"known"};
  const EmbeddingTable table = EmbeddingTable::random_init(vocab, 8, 3);
  SUBCASE("present token returns its stored row bitwise") {
    const auto direct = table.row(0);
    const auto looked = table.lookup("known");
    for (std::size_t i = 0; i < direct.size(); ++i) CHECK(direct[i] == looked[i]);
    // Pure between updates.
    const auto again = table.lookup("known");
    for (std::size_t i = 0; i < direct.size(); ++i) CHECK(again[i] == looked[i]);
  }
  SUBCASE("unseen token routes to the UNK row") {
    const auto unk = table.row(table.unk_index());
    const auto looked = table.lookup("never-seen");
    for (std::size_t i = 0; i < unk.size(); ++i) CHECK(unk[i] == looked[i]);
  }
  SUBCASE("no UNK row is a lookup error") {
    const EmbeddingTable bare = EmbeddingTable::random_init(vocab, 8, 3, /*with_unk=*/false);
    CHECK(bare.lookup("known").size() == 8);
    CHECK_THROWS_AS(bare.lookup("never-seen"), Error);
  }
  SUBCASE("a gradient step moves the looked-up row") {
    EmbeddingTable tuned = EmbeddingTable::random_init(vocab, 2, 3);
    const double before0 = tuned.lookup("known")[0];
    const double before1 = tuned.lookup("known")[1];
    tuned.rows().grad(0, 0) = 0.5;
    tuned.rows().grad(0, 1) = -2.0;
    Param* params[1] = {&tuned.rows()};
    sgd_step(params, 0.1);
    CHECK(tuned.lookup("known")[0] == doctest::Approx(before0 - 0.05));
    CHECK(tuned.lookup("known")[1] == doctest::Approx(before1 + 0.2));
  }
}

TEST_CASE("oov_fraction matches the count invariant") {
  Rng rng(55);
  for (int it = 0; it < 30; ++it) {
    const std::size_t vocab_size = 1 + rng.below(12);
    std::vector<std::string> vocab;
    for (std::size_t i = 0; i < vocab_size; ++i) vocab.push_back("t" + std::to_string(i));
    // A file covering a random subset of the vocabulary.
    std::ostringstream file;
    std::size_t covered = 0;
    for (const auto& tok : vocab) {
      if (rng.uniform() < 0.5) {
        file << tok << " 1.0 2.0\n";
        ++covered;
      }
    }
    if (covered == 0) {
      file << "unrelated 1.0 2.0\n";
    }
    const EmbeddingTable table = load_text(file.str(), vocab);
    std::size_t random_rows = 0;
    for (std::size_t i = 0; i < vocab_size; ++i) {
      random_rows += table.origin(i) == RowOrigin::random;
    }
    CHECK(table.oov_fraction() ==
          doctest::Approx(static_cast<double>(random_rows) / vocab_size));
    CHECK(random_rows == vocab_size - covered);
  }
}

TEST_SUITE_END();
