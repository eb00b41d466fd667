#ifndef TEXTSPOT_STORE_INDEX_HPP
#define TEXTSPOT_STORE_INDEX_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "textspot/geometry.hpp"
#include "textspot/phoc.hpp"

namespace textspot {

namespace detail {
class HnswGraph;
}

enum class Backend : std::uint8_t { kExact = 0, kGraph = 1 };

const char* backend_name(Backend backend);
Backend parse_backend(std::string_view name);

struct AnnParams {
  std::uint32_t m = 16;
  std::uint32_t ef_construction = 200;
  std::uint32_t ef_search = 100;
  std::uint64_t seed = 42;

  void validate() const;
};

struct NeighborHit {
  std::size_t entry = 0;
  std::uint32_t image = 0;  // dense image number, see Index::image_id
  double distance = 0.0;

  bool operator==(const NeighborHit&) const = default;
};

class Index;

/// Append-only collection of descriptors; becomes immutable once sealed.
class DescriptorStore {
 public:
  explicit DescriptorStore(PhocConfig config);

  void reserve(std::size_t entries);

  /// Throws kSealedStore or kDimensionMismatch.
  void add(const Detection& detection);
  void add(std::string_view image_id, std::span<const float> phoc, float objectness);

  std::size_t size() const { return objectness_.size(); }
  std::size_t dimension() const { return dimension_; }
  std::size_t image_count() const { return image_ids_.size(); }
  bool sealed() const { return sealed_; }
  const PhocConfig& config() const { return config_; }

  /// Moves the contents into a searchable index. Throws kEmptyStore, and
  /// kSealedStore on a second call.
  Index seal(Backend backend, const AnnParams& params = {});

 private:
  PhocConfig config_;
  std::size_t dimension_;
  std::vector<float> vectors_;
  std::vector<float> objectness_;
  std::vector<std::uint32_t> image_of_;
  std::vector<std::string> image_ids_;
  std::unordered_map<std::string, std::uint32_t> image_lookup_;
  bool sealed_ = false;
};

/**
 * Immutable nearest-neighbour index over sealed descriptors.
 *
 * Distances are Euclidean over the raw stored values. Hits are ordered by
 * distance, ties by lower entry index. All query methods are const and safe
 * to call from many threads.
 */
class Index {
 public:
  Index(Index&&) noexcept;
  Index& operator=(Index&&) noexcept;
  ~Index();

  Backend backend() const { return backend_; }
  const AnnParams& params() const { return params_; }
  const PhocConfig& config() const { return config_; }
  std::uint32_t config_hash() const { return config_hash_; }
  std::size_t size() const { return objectness_.size(); }
  std::size_t dimension() const { return dimension_; }
  std::size_t image_count() const { return image_ids_.size(); }

  const std::string& image_id(std::uint32_t image) const { return image_ids_[image]; }
  std::span<const std::string> image_ids() const { return image_ids_; }
  std::uint32_t image_of(std::size_t entry) const { return image_of_[entry]; }
  float objectness(std::size_t entry) const { return objectness_[entry]; }
  std::span<const float> vector(std::size_t entry) const {
    return {vectors_.data() + entry * dimension_, dimension_};
  }

  /// Backend-dispatched search; returns min(k, size()) hits.
  std::vector<NeighborHit> knn(std::span<const float> query, std::size_t k) const;
  std::vector<NeighborHit> knn(std::span<const float> query, std::size_t k,
                               std::size_t ef_search) const;

  /// Exhaustive search regardless of backend.
  std::vector<NeighborHit> exact_knn(std::span<const float> query, std::size_t k) const;

  /// Squared distance from `query` to every entry, in entry order.
  void scan(std::span<const float> query, std::span<float> squared_out) const;

  /// Binary "SSTR" file; see README for the layout.
  void save(const std::string& path) const;

  /// Throws kIoFailure, kCorruptIndex, or kVersionMismatch (format version,
  /// or layout hash differing from `expected_config` when given).
  static Index load(const std::string& path, const PhocConfig* expected_config = nullptr);

  static constexpr std::uint16_t kFormatVersion = 1;

 private:
  friend class DescriptorStore;
  Index();

  void check_query(std::span<const float> query) const;

  Backend backend_ = Backend::kExact;
  AnnParams params_;
  PhocConfig config_;
  std::uint32_t config_hash_ = 0;
  std::size_t dimension_ = 0;
  std::vector<float> vectors_;
  std::vector<float> objectness_;
  std::vector<std::uint32_t> image_of_;
  std::vector<std::string> image_ids_;
  std::unique_ptr<detail::HnswGraph> graph_;
};

}  // namespace textspot

#endif  // TEXTSPOT_STORE_INDEX_HPP
