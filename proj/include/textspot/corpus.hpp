#ifndef TEXTSPOT_CORPUS_HPP
#define TEXTSPOT_CORPUS_HPP

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "textspot/evalkit.hpp"
#include "textspot/geometry.hpp"
#include "textspot/phoc.hpp"

namespace textspot {

/// One word per line; normalized, deduplicated, first occurrence kept.
/// Lines with no alphabet characters are skipped. Throws kEmptyLexicon.
std::vector<std::string> load_lexicon(const std::string& path, const PhocConfig& config);

/// Deterministic pronounceable pseudo-words, all distinct.
std::vector<std::string> synthetic_lexicon(std::size_t count, std::uint64_t seed);

/// Word-box sizes resembling scene text: height log-uniform in [10, 40] px,
/// aspect ratio log-uniform in [2, 12].
BoxShape sample_text_shape(std::mt19937_64& rng);
std::vector<BoxShape> synthetic_text_shapes(std::size_t count, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Detection files (JSON lines). The first line is a header carrying the
// descriptor configuration and its hash; each further line is one record:
//   {"image_id":"...","box":[x,y,w,h],"objectness":c,"phoc":[...]}

class DetectionWriter {
 public:
  DetectionWriter(const std::string& path, const PhocConfig& config);

  void write(const Detection& detection);
  void close();
  std::size_t written() const { return written_; }

 private:
  std::ofstream out_;
  std::string path_;
  std::size_t dimension_;
  std::size_t written_ = 0;
};

/// Streams records in file order without buffering the file. Throws
/// kIoFailure, kConfigMismatch, ParseError.
void for_each_detection(const std::string& path, const PhocConfig& config,
                        const std::function<void(Detection&&)>& visit);

/// Records grouped by image in order of first appearance; record order is
/// preserved within an image.
std::vector<std::vector<Detection>> load_detections(const std::string& path,
                                                    const PhocConfig& config);

/// Box sizes from either `w h` lines or a detection file (header optional).
std::vector<BoxShape> load_box_shapes(const std::string& path);

/// One query per line; only the first tab-separated field is used.
std::vector<std::string> load_queries(const std::string& path);

// ---------------------------------------------------------------------------
// Synthetic benchmark corpora standing in for model output.

struct SyntheticSpec {
  std::size_t image_count = 1000;
  std::vector<std::string> lexicon;
  std::size_t min_words_per_image = 1;
  std::size_t max_words_per_image = 5;
  std::size_t descriptors_per_image = 60;
  double phoc_noise = 0.0;
  double bit_flip_rate = 0.0;
  // Share of the non-word slots filled with descriptors of other lexicon
  // words; the rest are unstructured background responses.
  double distractor_rate = 0.5;
  std::size_t query_count = 50;
  std::size_t min_relevant = 10;
  std::size_t max_relevant = 50;
  double unseen_fraction = 0.12;
  // Images without text: every descriptor is a low-objectness distractor.
  double empty_image_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticQuery {
  std::string word;
  bool unseen = false;
};

struct SyntheticCorpus {
  GroundTruth ground_truth;
  std::vector<SyntheticQuery> queries;
  // Lexicon words minus the unseen queries.
  std::vector<std::string> training_words;
  std::vector<std::string> image_ids;
  std::size_t descriptor_count = 0;
  // Lexicon entries dropped because their descriptor equals an earlier word's.
  std::size_t collisions_dropped = 0;
};

using DetectionSink = std::function<void(const Detection&)>;

/**
 * Plants each query into 10-50 images (bounded by the image count) and
 * fills images with other words, distractor words and background responses.
 * Ground truth is exactly the planted images. Query words never appear as
 * distractors. Deterministic for a given seed. Throws kLexiconTooSmall.
 */
SyntheticCorpus generate(const SyntheticSpec& spec, const PhocConfig& config,
                         const DetectionSink& sink);

struct SyntheticData {
  std::vector<std::vector<Detection>> images;
  SyntheticCorpus corpus;
};

SyntheticData generate(const SyntheticSpec& spec, const PhocConfig& config);

void write_queries(const std::vector<SyntheticQuery>& queries, const std::string& path);

}  // namespace textspot

#endif  // TEXTSPOT_CORPUS_HPP
