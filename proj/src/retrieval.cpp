#include "textspot/retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "textspot/error.hpp"

namespace textspot {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void sort_scores(std::vector<ImageScore>& scores) {
  std::sort(scores.begin(), scores.end(), [](const ImageScore& a, const ImageScore& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.image_id < b.image_id;
  });
}

}  // namespace

std::size_t default_pool_size(std::size_t image_count) {
  const auto scaled =
      static_cast<std::size_t>(std::ceil(10.0 * std::sqrt(static_cast<double>(image_count))));
  return std::max<std::size_t>(1000, scaled);
}

std::vector<ImageScore> aggregate_by_image(std::span<const NeighborHit> hits,
                                           std::span<const std::string> image_ids) {
  std::vector<ImageScore> out;
  std::unordered_set<std::uint32_t> seen;
  for (const auto& hit : hits) {
    if (hit.image >= image_ids.size()) {
      throw Error(ErrorCode::kInvalidArgument, "hit refers to unknown image");
    }
    if (seen.insert(hit.image).second) out.push_back({image_ids[hit.image], hit.distance});
  }
  sort_scores(out);
  return out;
}

RankedList query(std::string_view text, const Index& index, const PhocConfig& config,
                 const RetrievalParams& params, QueryTiming* timing) {
  if (config.hash() != index.config_hash()) {
    throw Error(ErrorCode::kConfigMismatch,
                "query-side descriptor configuration differs from the index");
  }
  auto t0 = Clock::now();
  const PhocEncoder encoder(config);
  const PhocVector descriptor = encoder.encode(text);
  RankedList ranked;
  ranked.query = std::string(text);
  QueryTiming local;
  local.encode_seconds = seconds_since(t0);

  if (index.backend() == Backend::kExact || params.exhaustive) {
    t0 = Clock::now();
    std::vector<float> squared(index.size());
    index.scan(descriptor.values, squared);
    local.search_seconds = seconds_since(t0);

    t0 = Clock::now();
    std::vector<float> best(index.image_count(), std::numeric_limits<float>::infinity());
    for (std::size_t i = 0; i < squared.size(); ++i) {
      float& slot = best[index.image_of(i)];
      slot = std::min(slot, squared[i]);
    }
    ranked.items.reserve(best.size());
    for (std::uint32_t image = 0; image < best.size(); ++image) {
      ranked.items.push_back({index.image_id(image), std::sqrt(static_cast<double>(best[image]))});
    }
    sort_scores(ranked.items);
    ranked.exhaustive = true;
    local.aggregate_seconds = seconds_since(t0);
  } else {
    const std::size_t pool =
        params.k_pool > 0 ? params.k_pool : default_pool_size(index.image_count());
    const std::size_t ef = params.ef_search > 0 ? params.ef_search : index.params().ef_search;
    t0 = Clock::now();
    const auto hits = index.knn(descriptor.values, pool, std::max(ef, pool));
    local.search_seconds = seconds_since(t0);

    t0 = Clock::now();
    ranked.items = aggregate_by_image(hits, index.image_ids());
    ranked.exhaustive = ranked.items.size() == index.image_count();
    local.aggregate_seconds = seconds_since(t0);
  }
  if (timing) *timing = local;
  return ranked;
}

std::vector<Detection> merge_multiresolution(std::span<const std::vector<Detection>> sets) {
  std::vector<Detection> merged;
  std::size_t dim = 0;
  bool have_dim = false;
  for (const auto& set : sets) {
    for (const auto& det : set) {
      if (!have_dim) {
        dim = det.phoc.size();
        have_dim = true;
      } else if (det.phoc.size() != dim) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "detections from different resolutions disagree on descriptor length");
      }
      merged.push_back(det);
    }
  }
  return merged;
}

}  // namespace textspot
