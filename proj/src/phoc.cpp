#include "textspot/phoc.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

#include "textspot/error.hpp"

namespace textspot {

namespace {

std::uint16_t pair_key(unsigned char a, unsigned char b) {
  return static_cast<std::uint16_t>((a << 8) | b);
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<int> parse_levels(const std::vector<std::string>& tokens) {
  std::vector<int> levels;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(tokens[i].data(),
                                     tokens[i].data() + tokens[i].size(), v);
    if (ec != std::errc() || ptr != tokens[i].data() + tokens[i].size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bad level value '" + tokens[i] + "'");
    }
    levels.push_back(v);
  }
  return levels;
}

}  // namespace

const std::vector<std::string>& default_bigrams() {
  static const std::vector<std::string> kBigrams = {
      "th", "he", "in", "er", "an", "re", "on", "at", "en", "nd",
      "ti", "es", "or", "te", "of", "ed", "is", "it", "al", "ar",
      "st", "to", "nt", "ng", "se", "ha", "as", "ou", "io", "le",
      "ve", "co", "me", "de", "hi", "ri", "ro", "ic", "ne", "ea",
      "ra", "ce", "li", "ch", "ll", "be", "ma", "si", "om", "ur"};
  return kBigrams;
}

std::size_t PhocConfig::dimension() const {
  std::size_t dim = 0;
  for (int level : unigram_levels) dim += static_cast<std::size_t>(level) * alphabet.size();
  for (int level : bigram_levels) dim += static_cast<std::size_t>(level) * bigrams.size();
  return dim;
}

void PhocConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidArgument, msg);
  };
  if (alphabet.empty()) fail("alphabet is empty");
  std::set<char> seen;
  for (char c : alphabet) {
    auto uc = static_cast<unsigned char>(c);
    if (uc <= 0x20 || uc >= 0x7f) fail("alphabet symbols must be printable ASCII");
    if (c >= 'A' && c <= 'Z') fail("alphabet symbols must be lowercase");
    if (!seen.insert(c).second) fail(std::string("duplicate alphabet symbol '") + c + "'");
  }
  for (int level : unigram_levels) {
    if (level < 1) fail("unigram levels must be positive");
  }
  for (int level : bigram_levels) {
    if (level < 1) fail("bigram levels must be positive");
  }
  std::set<std::string> seen_bigrams;
  for (const auto& bigram : bigrams) {
    if (bigram.size() != 2 || !seen.count(bigram[0]) || !seen.count(bigram[1])) {
      fail("bigram '" + bigram + "' is not a pair of alphabet symbols");
    }
    if (!seen_bigrams.insert(bigram).second) fail("duplicate bigram '" + bigram + "'");
  }
  if (!(overlap_threshold > 0.0 && overlap_threshold <= 1.0)) {
    fail("overlap_threshold must lie in (0, 1]");
  }
  if (dimension() == 0) fail("configuration has zero dimension");
}

std::string PhocConfig::to_text() const {
  std::ostringstream out;
  out << "phoc_config 1\n";
  out << "alphabet " << alphabet << "\n";
  out << "unigram_levels";
  for (int level : unigram_levels) out << ' ' << level;
  out << "\nbigram_levels";
  for (int level : bigram_levels) out << ' ' << level;
  out << "\nbigrams";
  for (const auto& bigram : bigrams) out << ' ' << bigram;
  out << "\noverlap_threshold " << format_double(overlap_threshold) << "\n";
  return out.str();
}

PhocConfig PhocConfig::from_text(std::string_view text) {
  PhocConfig config;
  bool have_header = false;
  std::set<std::string> keys;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0][0] == '#') continue;
    const std::string& key = tokens[0];
    if (!keys.insert(key).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate key '" + key + "'");
    }
    if (key == "phoc_config") {
      if (tokens.size() != 2 || tokens[1] != "1") {
        throw Error(ErrorCode::kVersionMismatch, "unsupported phoc_config version");
      }
      have_header = true;
    } else if (key == "alphabet") {
      if (tokens.size() != 2) throw Error(ErrorCode::kInvalidArgument, "alphabet takes one token");
      config.alphabet = tokens[1];
    } else if (key == "unigram_levels") {
      config.unigram_levels = parse_levels(tokens);
    } else if (key == "bigram_levels") {
      config.bigram_levels = parse_levels(tokens);
    } else if (key == "bigrams") {
      config.bigrams.assign(tokens.begin() + 1, tokens.end());
    } else if (key == "overlap_threshold") {
      if (tokens.size() != 2) {
        throw Error(ErrorCode::kInvalidArgument, "overlap_threshold takes one value");
      }
      double v = 0;
      auto [ptr, ec] = std::from_chars(tokens[1].data(),
                                       tokens[1].data() + tokens[1].size(), v);
      if (ec != std::errc() || ptr != tokens[1].data() + tokens[1].size()) {
        throw Error(ErrorCode::kInvalidArgument, "bad overlap_threshold");
      }
      config.overlap_threshold = v;
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown key '" + key + "'");
    }
  }
  if (!have_header) {
    throw Error(ErrorCode::kInvalidArgument, "missing 'phoc_config 1' header");
  }
  config.validate();
  return config;
}

std::uint32_t PhocConfig::hash() const {
  const std::string text = to_text();
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(text.data()),
              static_cast<uInt>(text.size()));
  return static_cast<std::uint32_t>(crc);
}

Interval occupancy(std::size_t position, std::size_t length) {
  const double n = static_cast<double>(length);
  return {static_cast<double>(position) / n, static_cast<double>(position + 1) / n};
}

std::string normalize_or_empty(std::string_view raw, const PhocConfig& config) {
  std::array<bool, 256> allowed{};
  for (char c : config.alphabet) allowed[static_cast<unsigned char>(c)] = true;
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    auto uc = static_cast<unsigned char>(c);
    if (uc >= 'A' && uc <= 'Z') uc = static_cast<unsigned char>(uc - 'A' + 'a');
    if (allowed[uc]) out.push_back(static_cast<char>(uc));
  }
  return out;
}

NormalizedWord normalize_word(std::string_view raw, const PhocConfig& config) {
  NormalizedWord word{normalize_or_empty(raw, config), std::string(raw)};
  if (word.chars.empty()) {
    throw Error(ErrorCode::kEmptyAfterNormalization,
                "'" + std::string(raw) + "' has no alphabet characters");
  }
  return word;
}

PhocEncoder::PhocEncoder(PhocConfig config)
    : config_(std::move(config)), dimension_(0) {
  config_.validate();
  dimension_ = config_.dimension();
  symbol_index_.fill(-1);
  for (std::size_t i = 0; i < config_.alphabet.size(); ++i) {
    symbol_index_[static_cast<unsigned char>(config_.alphabet[i])] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < config_.bigrams.size(); ++i) {
    const auto& b = config_.bigrams[i];
    bigram_index_.emplace(pair_key(static_cast<unsigned char>(b[0]),
                                   static_cast<unsigned char>(b[1])),
                          static_cast<int>(i));
  }
}

NormalizedWord PhocEncoder::normalize(std::string_view raw) const {
  return normalize_word(raw, config_);
}

void PhocEncoder::encode_into(std::string_view word, std::span<float> out) const {
  if (word.empty()) {
    throw Error(ErrorCode::kEmptyAfterNormalization, "cannot encode an empty word");
  }
  if (out.size() != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch, "output buffer has wrong length");
  }
  std::fill(out.begin(), out.end(), 0.0f);

  const auto n = static_cast<std::int64_t>(word.size());
  // The threshold is read as a decimal fraction with nine places so that
  // values such as 0.3 or 0.1 compare exactly against small rationals.
  constexpr std::int64_t kDen = 1000000000;
  const auto threshold_num =
      static_cast<std::int64_t>(std::llround(config_.overlap_threshold * kDen));
  const std::size_t n_symbols = config_.alphabet.size();
  const std::size_t n_bigrams = config_.bigrams.size();

  std::vector<int> symbols(word.size());
  for (std::size_t k = 0; k < word.size(); ++k) {
    symbols[k] = symbol_index_[static_cast<unsigned char>(word[k])];
    if (symbols[k] < 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "word contains a symbol outside the alphabet");
    }
  }

  // Returns true when [lo, lo + width) covers at least `threshold` of itself
  // inside region [r*n, (r+1)*n].
  auto assigned = [&](std::int64_t lo, std::int64_t width, std::int64_t r) {
    const std::int64_t region_lo = r * n;
    const std::int64_t region_hi = (r + 1) * n;
    const std::int64_t overlap =
        std::min(lo + width, region_hi) - std::max(lo, region_lo);
    return overlap > 0 && overlap * kDen >= threshold_num * width;
  };

  std::size_t offset = 0;
  for (int level : config_.unigram_levels) {
    const std::int64_t L = level;
    for (std::int64_t r = 0; r < L; ++r) {
      float* block = out.data() + offset + static_cast<std::size_t>(r) * n_symbols;
      for (std::int64_t k = 0; k < n; ++k) {
        if (assigned(k * L, L, r)) block[symbols[static_cast<std::size_t>(k)]] = 1.0f;
      }
    }
    offset += static_cast<std::size_t>(L) * n_symbols;
  }

  std::vector<int> pairs;
  pairs.reserve(word.size());
  for (std::size_t k = 0; k + 1 < word.size(); ++k) {
    auto it = bigram_index_.find(pair_key(static_cast<unsigned char>(word[k]),
                                          static_cast<unsigned char>(word[k + 1])));
    pairs.push_back(it == bigram_index_.end() ? -1 : it->second);
  }
  for (int level : config_.bigram_levels) {
    const std::int64_t L = level;
    for (std::int64_t r = 0; r < L; ++r) {
      float* block = out.data() + offset + static_cast<std::size_t>(r) * n_bigrams;
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (pairs[k] < 0) continue;
        if (assigned(static_cast<std::int64_t>(k) * L, 2 * L, r)) block[pairs[k]] = 1.0f;
      }
    }
    offset += static_cast<std::size_t>(L) * n_bigrams;
  }
}

PhocVector PhocEncoder::encode(const NormalizedWord& word) const {
  PhocVector vec;
  vec.kind = PhocKind::kTarget;
  vec.values.resize(dimension_);
  encode_into(word.chars, vec.values);
  return vec;
}

PhocVector encode(const NormalizedWord& word, const PhocConfig& config) {
  return PhocEncoder(config).encode(word);
}

std::vector<std::string> derive_bigrams(std::span<const std::string> lexicon,
                                        std::size_t count,
                                        const PhocConfig& config) {
  if (lexicon.empty()) throw Error(ErrorCode::kEmptyLexicon, "lexicon is empty");
  if (count == 0) throw Error(ErrorCode::kInvalidArgument, "bigram count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& raw : lexicon) {
    const std::string word = normalize_or_empty(raw, config);
    for (std::size_t k = 0; k + 1 < word.size(); ++k) ++counts[word.substr(k, 2)];
  }
  if (counts.size() < count) {
    throw Error(ErrorCode::kInsufficientBigrams,
                "lexicon has " + std::to_string(counts.size()) +
                    " distinct bigrams, " + std::to_string(count) + " requested");
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(ranked[i].first);
  return out;
}

}  // namespace textspot
