#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "textspot/error.hpp"
#include "textspot/phoc.hpp"

using namespace textspot;

namespace {

std::size_t offset_of(const PhocConfig& cfg, int level_index, int region) {
  std::size_t off = 0;
  for (int i = 0; i < level_index; ++i) off += cfg.unigram_levels[i] * cfg.alphabet.size();
  return off + region * cfg.alphabet.size();
}

std::string region_symbols(const PhocVector& v, const PhocConfig& cfg, int level_index,
                           int region) {
  std::string out;
  const std::size_t base = offset_of(cfg, level_index, region);
  for (std::size_t s = 0; s < cfg.alphabet.size(); ++s) {
    if (v.values[base + s] == 1.0f) out += cfg.alphabet[s];
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t set_bits(const PhocVector& v) {
  return static_cast<std::size_t>(std::count(v.values.begin(), v.values.end(), 1.0f));
}

}  // namespace

TEST_CASE("default layout has 604 dimensions") {
  const PhocConfig cfg;
  CHECK(cfg.alphabet.size() == 36);
  CHECK(cfg.bigrams.size() == 50);
  CHECK(cfg.dimension() == 604);
  CHECK(encode(normalize_word("beyond", cfg), cfg).size() == 604);
}

TEST_CASE("normalization") {
  const PhocConfig cfg;
  CHECK(normalize_word("Tea", cfg).chars == "tea");
  CHECK(normalize_word("ibm", cfg).chars == "ibm");
  CHECK(normalize_word("caf\xc3\xa9-24", cfg).chars == "caf24");
  CHECK(normalize_word("Tea", cfg).source == "Tea");
  try {
    normalize_word("--!", cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyAfterNormalization);
  }
  CHECK(normalize_or_empty("?!", cfg).empty());
}

TEST_CASE("occupancy intervals") {
  auto i = occupancy(0, 1);
  CHECK(i.lo == 0.0);
  CHECK(i.hi == 1.0);
  i = occupancy(3, 6);
  CHECK(i.lo == doctest::Approx(0.5));
  CHECK(i.hi == doctest::Approx(0.6667).epsilon(1e-4));
  i = occupancy(5, 6);
  CHECK(i.lo == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(i.hi == 1.0);
}

TEST_CASE("beyond splits as in the reference figure") {
  const PhocConfig cfg;
  const auto v = encode(normalize_word("beyond", cfg), cfg);
  CHECK(region_symbols(v, cfg, 0, 0) == "bey");
  CHECK(region_symbols(v, cfg, 0, 1) == "dno");
  CHECK(region_symbols(v, cfg, 1, 0) == "be");
  CHECK(region_symbols(v, cfg, 1, 1) == "oy");
  CHECK(region_symbols(v, cfg, 1, 2) == "dn");
}

TEST_CASE("single character sets both level-2 halves only") {
  const PhocConfig cfg;
  const auto v = encode(normalize_word("a", cfg), cfg);
  CHECK(set_bits(v) == 2);
  CHECK(v.values[0] == 1.0f);
  CHECK(v.values[36] == 1.0f);
}

TEST_CASE("word order matters") {
  const PhocConfig cfg;
  CHECK(encode(normalize_word("tea", cfg), cfg) != encode(normalize_word("ate", cfg), cfg));
}

TEST_CASE("encoder matches brute-force oracle on random words") {
  const PhocConfig cfg;
  const PhocEncoder enc(cfg);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    const std::string w = oracle::random_word(rng, cfg.alphabet, 1, 20);
    REQUIRE(enc.encode(w).values == oracle::phoc(w, cfg));
  }
  // Bigram-heavy words exercise the bigram blocks.
  const std::string letters = "thaeinrso";
  for (int i = 0; i < 300; ++i) {
    const std::string w = oracle::random_word(rng, letters, 2, 12);
    REQUIRE(enc.encode(w).values == oracle::phoc(w, cfg));
  }
}

TEST_CASE("other thresholds and levels agree with the oracle") {
  PhocConfig cfg;
  cfg.unigram_levels = {1, 2, 3, 7};
  cfg.bigram_levels = {1, 3};
  cfg.overlap_threshold = 0.3;
  cfg.validate();
  const PhocEncoder enc(cfg);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    const std::string w = oracle::random_word(rng, "abcdefghijklmnopqrstuvwxyz", 1, 15);
    REQUIRE(enc.encode(w).values == oracle::phoc(w, cfg));
  }
}

TEST_CASE("level 1 lists exactly the distinct characters") {
  PhocConfig cfg;
  cfg.unigram_levels = {1, 2};
  const PhocEncoder enc(cfg);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const std::string w = oracle::random_word(rng, cfg.alphabet, 1, 20);
    const auto v = enc.encode(w);
    for (std::size_t s = 0; s < cfg.alphabet.size(); ++s) {
      const bool present = w.find(cfg.alphabet[s]) != std::string::npos;
      CHECK((v.values[s] == 1.0f) == present);
    }
  }
}

TEST_CASE("set bits only for symbols present in the word") {
  const PhocConfig cfg;
  const PhocEncoder enc(cfg);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const std::string w = oracle::random_word(rng, cfg.alphabet, 1, 20);
    const auto v = enc.encode(w);
    std::size_t pos = 0;
    for (int level : cfg.unigram_levels) {
      for (int r = 0; r < level; ++r) {
        for (char s : cfg.alphabet) {
          if (v.values[pos++] == 1.0f) CHECK(w.find(s) != std::string::npos);
        }
      }
    }
    for (int level : cfg.bigram_levels) {
      for (int r = 0; r < level; ++r) {
        for (const auto& bg : cfg.bigrams) {
          if (v.values[pos++] == 1.0f) CHECK(w.find(bg) != std::string::npos);
        }
      }
    }
  }
}

TEST_CASE("anagrams differ when the oracle says regions differ") {
  const PhocConfig cfg;
  const PhocEncoder enc(cfg);
  std::mt19937_64 rng(13);
  int compared = 0;
  for (int i = 0; i < 300; ++i) {
    std::string w = oracle::random_word(rng, "abcdef", 2, 10);
    std::string p = w;
    std::shuffle(p.begin(), p.end(), rng);
    const bool oracle_differs = oracle::phoc(w, cfg) != oracle::phoc(p, cfg);
    CHECK((enc.encode(w) != enc.encode(p)) == oracle_differs);
    compared += oracle_differs ? 1 : 0;
  }
  CHECK(compared > 0);
}

TEST_CASE("encoding is deterministic and encode_into checks length") {
  const PhocConfig cfg;
  const PhocEncoder enc(cfg);
  CHECK(enc.encode("castrol") == enc.encode("castrol"));
  std::vector<float> small(10);
  CHECK_THROWS_AS(enc.encode_into("abc", small), Error);
}

TEST_CASE("bigram derivation") {
  const PhocConfig cfg;
  std::vector<std::string> lex{"aa", "aa", "ab"};
  CHECK(derive_bigrams(lex, 2, cfg) == std::vector<std::string>{"aa", "ab"});
  lex = {"ab", "ba"};
  CHECK(derive_bigrams(lex, 2, cfg) == std::vector<std::string>{"ab", "ba"});
  lex = {"ab"};
  try {
    derive_bigrams(lex, 2, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientBigrams);
  }

  std::mt19937_64 rng(1);
  std::vector<std::string> words;
  for (int i = 0; i < 2000; ++i) words.push_back(oracle::random_word(rng, "etaoinshr", 2, 9));
  const auto first = derive_bigrams(words, 50, cfg);
  std::shuffle(words.begin(), words.end(), rng);
  const auto second = derive_bigrams(words, 50, cfg);
  CHECK(first == second);
  CHECK(std::set<std::string>(first.begin(), first.end()).size() == 50);
}

TEST_CASE("configuration text round trip and validation") {
  PhocConfig cfg;
  cfg.unigram_levels = {1, 3};
  cfg.overlap_threshold = 0.25;
  const auto parsed = PhocConfig::from_text(cfg.to_text());
  CHECK(parsed == cfg);
  CHECK(parsed.hash() == cfg.hash());
  CHECK(PhocConfig{}.hash() != cfg.hash());

  PhocConfig bad;
  bad.alphabet = "aab";
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = PhocConfig{};
  bad.bigrams.push_back("a!");
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = PhocConfig{};
  bad.overlap_threshold = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(PhocConfig::from_text("nonsense 1"), Error);
}
