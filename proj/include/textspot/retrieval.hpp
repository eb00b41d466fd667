#ifndef TEXTSPOT_RETRIEVAL_HPP
#define TEXTSPOT_RETRIEVAL_HPP

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "textspot/geometry.hpp"
#include "textspot/phoc.hpp"
#include "textspot/store_index.hpp"

namespace textspot {

struct ImageScore {
  std::string image_id;
  double score = 0.0;

  bool operator==(const ImageScore&) const = default;
};

struct RankedList {
  std::string query;
  std::vector<ImageScore> items;
  bool exhaustive = false;
};

struct RetrievalParams {
  // 0 selects default_pool_size(image_count). Ignored by the exact backend.
  std::size_t k_pool = 0;
  // 0 uses the index's own search beam.
  std::size_t ef_search = 0;
  // Full scan even when the index carries a graph.
  bool exhaustive = false;
};

/// max(1000, ceil(10 * sqrt(image_count))).
std::size_t default_pool_size(std::size_t image_count);

struct QueryTiming {
  double encode_seconds = 0.0;
  double search_seconds = 0.0;
  double aggregate_seconds = 0.0;
};

/**
 * Ranks images for a free-text query.
 *
 * An image's score is the smallest distance between the query descriptor
 * and any of its descriptors; ties are ordered by image id. The exact
 * backend scores every indexed image. Throws kEmptyAfterNormalization and
 * kConfigMismatch.
 */
RankedList query(std::string_view text, const Index& index, const PhocConfig& config,
                 const RetrievalParams& params = {}, QueryTiming* timing = nullptr);

/// Keeps the first (smallest) hit per image; `hits` must be sorted ascending.
std::vector<ImageScore> aggregate_by_image(std::span<const NeighborHit> hits,
                                           std::span<const std::string> image_ids);

/// Union of detections from several input resolutions; no deduplication.
std::vector<Detection> merge_multiresolution(std::span<const std::vector<Detection>> sets);

}  // namespace textspot

#endif  // TEXTSPOT_RETRIEVAL_HPP
