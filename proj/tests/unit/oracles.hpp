// Straight-line reference implementations used as test oracles. They share
// no code with the library beyond plain data types.
#ifndef TEXTSPOT_TEST_ORACLES_HPP
#define TEXTSPOT_TEST_ORACLES_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "textspot/phoc.hpp"

namespace oracle {

struct Fraction {
  long long num;
  long long den;
};

inline Fraction make(long long num, long long den) {
  const long long g = std::gcd(num, den);
  return {num / g, den / g};
}
inline bool less(Fraction a, Fraction b) { return a.num * b.den < b.num * a.den; }
inline Fraction fmin(Fraction a, Fraction b) { return less(a, b) ? a : b; }
inline Fraction fmax(Fraction a, Fraction b) { return less(a, b) ? b : a; }
inline Fraction sub(Fraction a, Fraction b) {
  return make(a.num * b.den - b.num * a.den, a.den * b.den);
}

// Ratio of [a_lo, a_hi] covered by region [r/L, (r+1)/L], compared to a
// threshold given as a fraction.
inline bool covered(Fraction lo, Fraction hi, int r, int level, Fraction threshold) {
  const Fraction rlo = make(r, level);
  const Fraction rhi = make(r + 1, level);
  const Fraction a = fmax(lo, rlo);
  const Fraction b = fmin(hi, rhi);
  if (!less(a, b)) return false;
  const Fraction overlap = sub(b, a);
  const Fraction width = sub(hi, lo);
  // overlap / width >= threshold
  return overlap.num * width.den * threshold.den >= threshold.num * overlap.den * width.num;
}

inline Fraction threshold_fraction(double t) {
  // Thresholds used in tests are multiples of 1/1000.
  return make(static_cast<long long>(std::llround(t * 1000.0)), 1000);
}

inline std::string normalize(const std::string& raw, const std::string& alphabet) {
  std::string out;
  for (char ch : raw) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (alphabet.find(c) != std::string::npos) out += c;
  }
  return out;
}

inline std::vector<float> phoc(const std::string& word, const textspot::PhocConfig& cfg) {
  const long long n = static_cast<long long>(word.size());
  const Fraction t = threshold_fraction(cfg.overlap_threshold);
  std::vector<float> out;
  for (int level : cfg.unigram_levels) {
    for (int r = 0; r < level; ++r) {
      for (char s : cfg.alphabet) {
        bool bit = false;
        for (long long k = 0; k < n; ++k) {
          if (word[k] == s && covered(make(k, n), make(k + 1, n), r, level, t)) bit = true;
        }
        out.push_back(bit ? 1.0f : 0.0f);
      }
    }
  }
  for (int level : cfg.bigram_levels) {
    for (int r = 0; r < level; ++r) {
      for (const auto& bg : cfg.bigrams) {
        bool bit = false;
        for (long long k = 0; k + 1 < n; ++k) {
          if (word[k] == bg[0] && word[k + 1] == bg[1] &&
              covered(make(k, n), make(k + 2, n), r, level, t)) {
            bit = true;
          }
        }
        out.push_back(bit ? 1.0f : 0.0f);
      }
    }
  }
  return out;
}

inline double euclid(const std::vector<float>& a, const float* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

inline std::string random_word(std::mt19937_64& rng, const std::string& alphabet,
                               std::size_t min_len, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string w(len(rng), 'a');
  for (auto& c : w) c = alphabet[pick(rng)];
  return w;
}

// Non-interpolated average precision written from the definition.
inline double average_precision(const std::vector<std::string>& ranking,
                                const std::set<std::string>& relevant) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (relevant.count(ranking[i])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

}  // namespace oracle

#endif  // TEXTSPOT_TEST_ORACLES_HPP
