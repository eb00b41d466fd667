#include "textspot/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "textspot/error.hpp"

namespace textspot {

namespace {

// Floats parse with strtof, so written shortest representations round-trip.
using RecordJson = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t,
                                        std::uint64_t, float>;

constexpr const char* kDetectionFormat = "textspot-detections";
constexpr int kDetectionVersion = 1;

void append_float(std::string& out, float value) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", v);
  return buf;
}

std::string image_name(std::size_t i, std::size_t count) {
  const std::size_t width = std::max<std::size_t>(6, std::to_string(count).size());
  std::string digits = std::to_string(i);
  return "img_" + std::string(width - digits.size(), '0') + digits;
}

Detection parse_record(const std::string& line, std::size_t line_no, std::size_t dimension) {
  RecordJson j;
  try {
    j = RecordJson::parse(line);
  } catch (const std::exception& e) {
    throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
  }
  try {
    Detection det;
    det.image_id = j.at("image_id").get<std::string>();
    const auto& box = j.at("box");
    if (!box.is_array() || box.size() != 4) throw ParseError(line_no, "box must have 4 numbers");
    det.box = {box[0].get<float>(), box[1].get<float>(), box[2].get<float>(),
               box[3].get<float>()};
    det.objectness = j.at("objectness").get<float>();
    if (!(det.objectness >= 0.0f && det.objectness <= 1.0f)) {
      throw ParseError(line_no, "objectness outside [0, 1]");
    }
    const auto& phoc = j.at("phoc");
    if (!phoc.is_array() || phoc.size() != dimension) {
      throw ParseError(line_no, "descriptor has " + std::to_string(phoc.size()) +
                                    " values, expected " + std::to_string(dimension));
    }
    det.phoc.kind = PhocKind::kPrediction;
    det.phoc.values.reserve(dimension);
    for (const auto& v : phoc) {
      const float f = v.get<float>();
      if (!(f >= 0.0f && f <= 1.0f)) throw ParseError(line_no, "descriptor value outside [0, 1]");
      det.phoc.values.push_back(f);
    }
    return det;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(line_no, std::string("bad record: ") + e.what());
  }
}

}  // namespace

std::vector<std::string> load_lexicon(const std::string& path, const PhocConfig& config) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open '" + path + "'");
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    std::string word = normalize_or_empty(line, config);
    if (word.empty()) continue;
    if (seen.insert(word).second) words.push_back(std::move(word));
  }
  if (words.empty()) throw Error(ErrorCode::kEmptyLexicon, "'" + path + "' has no words");
  return words;
}

std::vector<std::string> synthetic_lexicon(std::size_t count, std::uint64_t seed) {
  static const char* kOnsets[] = {"b",  "c",  "d",  "f",  "g",  "h",  "j",  "k",  "l",
                                  "m",  "n",  "p",  "r",  "s",  "t",  "v",  "w",  "z",
                                  "br", "ch", "cl", "cr", "dr", "fl", "gr", "pl", "pr",
                                  "sh", "sl", "sp", "st", "th", "tr", "qu", ""};
  static const char* kVowels[] = {"a", "e", "i", "o", "u", "y", "ai", "ea", "ee", "oo", "ou", "io"};
  static const char* kCodas[] = {"",  "",   "",   "n",  "r",  "s",  "t",  "l",  "m",
                                 "nd", "ng", "st", "rt", "ck", "x",  "ll", "ss", "nt"};
  std::mt19937_64 rng(seed);
  auto pick = [&rng](const auto& arr) {
    std::uniform_int_distribution<std::size_t> d(0, std::size(arr) - 1);
    return arr[d(rng)];
  };
  std::uniform_int_distribution<int> syllables(1, 4);
  std::bernoulli_distribution digit_suffix(0.03);
  std::uniform_int_distribution<int> digit(0, 9);

  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  std::size_t attempts = 0;
  while (words.size() < count) {
    if (++attempts > count * 100 + 1000) {
      throw Error(ErrorCode::kLexiconTooSmall, "cannot generate enough distinct words");
    }
    std::string word;
    const int n = syllables(rng);
    for (int s = 0; s < n; ++s) {
      word += pick(kOnsets);
      word += pick(kVowels);
      word += pick(kCodas);
    }
    if (digit_suffix(rng)) word += static_cast<char>('0' + digit(rng));
    if (word.size() < 2 || word.size() > 16) continue;
    if (seen.insert(word).second) words.push_back(std::move(word));
  }
  return words;
}

BoxShape sample_text_shape(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> log_h(std::log(10.0), std::log(40.0));
  std::uniform_real_distribution<double> log_aspect(std::log(2.0), std::log(12.0));
  const double h = std::exp(log_h(rng));
  const double w = h * std::exp(log_aspect(rng));
  // Quarter-pixel grid keeps values exact in single precision.
  return {std::round(w * 4.0) / 4.0, std::round(h * 4.0) / 4.0};
}

std::vector<BoxShape> synthetic_text_shapes(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<BoxShape> shapes;
  shapes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) shapes.push_back(sample_text_shape(rng));
  return shapes;
}

DetectionWriter::DetectionWriter(const std::string& path, const PhocConfig& config)
    : out_(path, std::ios::trunc), path_(path), dimension_(config.dimension()) {
  if (!out_) throw Error(ErrorCode::kIoFailure, "cannot open '" + path + "' for writing");
  nlohmann::json header;
  header["format"] = kDetectionFormat;
  header["version"] = kDetectionVersion;
  header["config_hash"] = hex32(config.hash());
  header["phoc_config"] = config.to_text();
  out_ << header.dump() << '\n';
}

void DetectionWriter::write(const Detection& det) {
  if (det.phoc.size() != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch, "descriptor length does not match the file");
  }
  std::string line;
  line.reserve(64 + det.phoc.size() * 4);
  line += "{\"image_id\":";
  line += nlohmann::json(det.image_id).dump();
  line += ",\"box\":[";
  const double box[4] = {det.box.x, det.box.y, det.box.w, det.box.h};
  for (int i = 0; i < 4; ++i) {
    if (i) line += ',';
    append_float(line, static_cast<float>(box[i]));
  }
  line += "],\"objectness\":";
  append_float(line, det.objectness);
  line += ",\"phoc\":[";
  for (std::size_t i = 0; i < det.phoc.values.size(); ++i) {
    if (i) line += ',';
    append_float(line, det.phoc.values[i]);
  }
  line += "]}\n";
  out_ << line;
  if (!out_) throw Error(ErrorCode::kIoFailure, "write to '" + path_ + "' failed");
  ++written_;
}

void DetectionWriter::close() {
  out_.close();
  if (out_.fail()) throw Error(ErrorCode::kIoFailure, "closing '" + path_ + "' failed");
}

void for_each_detection(const std::string& path, const PhocConfig& config,
                        const std::function<void(Detection&&)>& visit) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  const std::size_t dimension = config.dimension();
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      nlohmann::json header;
      try {
        header = nlohmann::json::parse(line);
      } catch (const std::exception&) {
        throw ParseError(line_no, "missing detection file header");
      }
      if (!header.is_object() || header.value("format", "") != kDetectionFormat) {
        throw ParseError(line_no, "missing detection file header");
      }
      if (header.value("version", 0) != kDetectionVersion) {
        throw Error(ErrorCode::kVersionMismatch, "unsupported detection file version");
      }
      if (header.value("config_hash", "") != hex32(config.hash())) {
        throw Error(ErrorCode::kConfigMismatch,
                    "'" + path + "' was written with a different descriptor configuration");
      }
      have_header = true;
      continue;
    }
    visit(parse_record(line, line_no, dimension));
  }
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "read from '" + path + "' failed");
  if (!have_header) throw ParseError(line_no, "empty detection file");
}

std::vector<std::vector<Detection>> load_detections(const std::string& path,
                                                    const PhocConfig& config) {
  std::vector<std::vector<Detection>> groups;
  std::unordered_map<std::string, std::size_t> slot;
  for_each_detection(path, config, [&](Detection&& det) {
    auto [it, inserted] = slot.try_emplace(det.image_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(std::move(det));
  });
  return groups;
}

std::vector<BoxShape> load_box_shapes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open '" + path + "'");
  std::vector<BoxShape> shapes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    BoxShape shape;
    if (line[first] == '{') {
      RecordJson j;
      try {
        j = RecordJson::parse(line);
      } catch (const std::exception&) {
        throw ParseError(line_no, "malformed JSON");
      }
      if (j.contains("format")) continue;  // detection file header
      if (!j.contains("box") || !j["box"].is_array() || j["box"].size() != 4) {
        throw ParseError(line_no, "record has no 4-element box");
      }
      shape = {j["box"][2].get<float>(), j["box"][3].get<float>()};
    } else {
      std::istringstream fields(line);
      std::string extra;
      if (!(fields >> shape.w >> shape.h) || (fields >> extra)) {
        throw ParseError(line_no, "expected 'w h'");
      }
    }
    if (!(shape.w > 0.0 && shape.h > 0.0)) throw ParseError(line_no, "box sides must be positive");
    shapes.push_back(shape);
  }
  if (shapes.empty()) throw Error(ErrorCode::kInvalidArgument, "'" + path + "' has no boxes");
  return shapes;
}

std::vector<std::string> load_queries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open '" + path + "'");
  std::vector<std::string> queries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    queries.push_back(line.substr(0, line.find('\t')));
  }
  return queries;
}

void write_queries(const std::vector<SyntheticQuery>& queries, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open '" + path + "' for writing");
  for (const auto& q : queries) out << q.word << (q.unseen ? "\tunseen" : "\tseen") << '\n';
  if (!out) throw Error(ErrorCode::kIoFailure, "write to '" + path + "' failed");
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (image_count == 0) fail("image_count must be >= 1");
  if (min_words_per_image > max_words_per_image) fail("min words per image exceeds max");
  if (descriptors_per_image < max_words_per_image || descriptors_per_image == 0) {
    fail("descriptors_per_image must cover the maximum words per image");
  }
  if (phoc_noise < 0.0) fail("phoc_noise must be >= 0");
  for (double rate : {bit_flip_rate, distractor_rate, unseen_fraction, empty_image_fraction}) {
    if (!(rate >= 0.0 && rate <= 1.0)) fail("rates must lie in [0, 1]");
  }
  if (query_count == 0) fail("query_count must be >= 1");
  if (min_relevant == 0 || min_relevant > max_relevant) fail("bad relevant-image range");
}

SyntheticCorpus generate(const SyntheticSpec& spec, const PhocConfig& config,
                         const DetectionSink& sink) {
  spec.validate();
  const PhocEncoder encoder(config);
  const std::size_t dim = encoder.dimension();
  std::mt19937_64 rng(spec.seed);
  SyntheticCorpus corpus;

  // Distinct words with pairwise distinct descriptors; first occurrence wins.
  std::vector<std::string> pool;
  std::vector<std::vector<float>> codes;
  {
    std::unordered_set<std::string> seen_words;
    std::unordered_set<std::string> seen_codes;
    std::vector<float> code(dim);
    for (const auto& raw : spec.lexicon) {
      std::string word = normalize_or_empty(raw, config);
      if (word.empty() || !seen_words.insert(word).second) continue;
      encoder.encode_into(word, code);
      std::string key(reinterpret_cast<const char*>(code.data()), dim * sizeof(float));
      if (!seen_codes.insert(std::move(key)).second) {
        ++corpus.collisions_dropped;
        continue;
      }
      pool.push_back(std::move(word));
      codes.push_back(code);
    }
  }
  constexpr std::size_t kMinOtherWords = 10;
  if (pool.size() < spec.query_count + kMinOtherWords) {
    throw Error(ErrorCode::kLexiconTooSmall,
                "lexicon yields " + std::to_string(pool.size()) +
                    " collision-free words; need at least " +
                    std::to_string(spec.query_count + kMinOtherWords));
  }

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto split = order.begin() + static_cast<std::ptrdiff_t>(spec.query_count);
  const std::vector<std::size_t> query_words(order.begin(), split);
  const std::vector<std::size_t> other_words(split, order.end());

  const auto n_unseen = static_cast<std::size_t>(
      std::llround(spec.unseen_fraction * static_cast<double>(spec.query_count)));
  std::unordered_set<std::size_t> unseen;
  for (std::size_t i = 0; i < query_words.size(); ++i) {
    const bool is_unseen = i < n_unseen;
    if (is_unseen) unseen.insert(query_words[i]);
    corpus.queries.push_back({pool[query_words[i]], is_unseen});
  }
  for (std::size_t w = 0; w < pool.size(); ++w) {
    if (!unseen.count(w)) corpus.training_words.push_back(pool[w]);
  }

  // Text-bearing images receive planted words.
  std::bernoulli_distribution empty_image(spec.empty_image_fraction);
  std::vector<bool> has_text(spec.image_count);
  std::vector<std::size_t> text_images;
  for (std::size_t i = 0; i < spec.image_count; ++i) {
    has_text[i] = !empty_image(rng);
    if (has_text[i]) text_images.push_back(i);
  }
  if (text_images.empty()) {
    throw Error(ErrorCode::kLexiconTooSmall, "no text-bearing images to plant queries into");
  }

  std::vector<std::vector<std::size_t>> image_words(spec.image_count);
  for (std::size_t q = 0; q < query_words.size(); ++q) {
    std::uniform_int_distribution<std::size_t> count_dist(spec.min_relevant, spec.max_relevant);
    const std::size_t count = std::min(count_dist(rng), text_images.size());
    // Partial Fisher-Yates over a copy keeps the selection uniform.
    std::vector<std::size_t> candidates = text_images;
    auto& relevant = corpus.ground_truth.relevant[pool[query_words[q]]];
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
      std::swap(candidates[i], candidates[pick(rng)]);
      image_words[candidates[i]].push_back(query_words[q]);
      relevant.insert(image_name(candidates[i], spec.image_count));
    }
  }

  std::normal_distribution<double> noise(0.0, spec.phoc_noise > 0.0 ? spec.phoc_noise : 1.0);
  std::bernoulli_distribution flip(spec.bit_flip_rate);
  std::bernoulli_distribution distractor(spec.distractor_rate);
  std::uniform_int_distribution<std::size_t> other_pick(0, other_words.size() - 1);
  std::uniform_int_distribution<std::size_t> words_dist(spec.min_words_per_image,
                                                        spec.max_words_per_image);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> position(0.0, 560.0);

  auto word_descriptor = [&](std::size_t word, std::vector<float>& out) {
    out = codes[word];
    if (spec.phoc_noise > 0.0) {
      for (auto& v : out) v = static_cast<float>(std::clamp(v + noise(rng), 0.0, 1.0));
    }
    if (spec.bit_flip_rate > 0.0) {
      for (auto& v : out) {
        if (flip(rng)) v = 1.0f - v;
      }
    }
  };

  corpus.image_ids.reserve(spec.image_count);
  Detection det;
  det.phoc.kind = PhocKind::kPrediction;
  for (std::size_t i = 0; i < spec.image_count; ++i) {
    const std::string id = image_name(i, spec.image_count);
    corpus.image_ids.push_back(id);

    struct Slot {
      int kind;  // 0 word, 1 distractor word, 2 background
      std::size_t word;
    };
    std::vector<Slot> slots;
    for (std::size_t w : image_words[i]) slots.push_back({0, w});
    if (has_text[i]) {
      const std::size_t target = words_dist(rng);
      while (slots.size() < target) slots.push_back({0, other_words[other_pick(rng)]});
    }
    const std::size_t total = std::max(spec.descriptors_per_image, slots.size());
    while (slots.size() < total) {
      if (!has_text[i] || distractor(rng)) {
        slots.push_back({1, other_words[other_pick(rng)]});
      } else {
        slots.push_back({2, 0});
      }
    }
    std::shuffle(slots.begin(), slots.end(), rng);

    for (const auto& slot : slots) {
      det.image_id = id;
      const BoxShape shape = sample_text_shape(rng);
      det.box = {std::round(position(rng) * 4.0) / 4.0, std::round(position(rng) * 4.0) / 4.0,
                 shape.w, shape.h};
      if (slot.kind == 2) {
        det.phoc.values.resize(dim);
        for (auto& v : det.phoc.values) {
          const double u = unit(rng);
          v = static_cast<float>(u * u * u * u);
        }
        det.objectness = static_cast<float>(0.0025 + 0.0475 * unit(rng));
      } else {
        word_descriptor(slot.word, det.phoc.values);
        const double lo = slot.kind == 0 && has_text[i] ? 0.5 : 0.05;
        const double hi = slot.kind == 0 && has_text[i] ? 1.0 : 0.5;
        det.objectness = static_cast<float>(lo + (hi - lo) * unit(rng));
      }
      sink(det);
      ++corpus.descriptor_count;
    }
  }
  return corpus;
}

SyntheticData generate(const SyntheticSpec& spec, const PhocConfig& config) {
  SyntheticData data;
  std::unordered_map<std::string, std::size_t> slot;
  data.corpus = generate(spec, config, [&](const Detection& det) {
    auto [it, inserted] = slot.try_emplace(det.image_id, data.images.size());
    if (inserted) data.images.emplace_back();
    data.images[it->second].push_back(det);
  });
  return data;
}

}  // namespace textspot
