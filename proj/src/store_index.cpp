#include "textspot/store_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "binary_io.hpp"
#include "hnsw.hpp"
#include "textspot/distance.hpp"
#include "textspot/error.hpp"

namespace textspot {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'T', 'R'};

std::vector<NeighborHit> to_hits(const std::vector<detail::Candidate>& found,
                                 const std::vector<std::uint32_t>& image_of) {
  std::vector<NeighborHit> hits;
  hits.reserve(found.size());
  for (const auto& c : found) {
    hits.push_back({c.id, image_of[c.id], std::sqrt(static_cast<double>(c.distance))});
  }
  return hits;
}

}  // namespace

const char* backend_name(Backend backend) {
  return backend == Backend::kExact ? "exact" : "graph";
}

Backend parse_backend(std::string_view name) {
  if (name == "exact") return Backend::kExact;
  if (name == "graph" || name == "hnsw") return Backend::kGraph;
  throw Error(ErrorCode::kInvalidArgument, "unknown backend '" + std::string(name) + "'");
}

void AnnParams::validate() const {
  if (m < 2 || ef_construction < 1 || ef_search < 1) {
    throw Error(ErrorCode::kInvalidArgument, "graph degree must be >= 2 and beams >= 1");
  }
}

DescriptorStore::DescriptorStore(PhocConfig config) : config_(std::move(config)) {
  config_.validate();
  dimension_ = config_.dimension();
}

void DescriptorStore::reserve(std::size_t entries) {
  vectors_.reserve(entries * dimension_);
  objectness_.reserve(entries);
  image_of_.reserve(entries);
}

void DescriptorStore::add(const Detection& detection) {
  add(detection.image_id, detection.phoc.values, detection.objectness);
}

void DescriptorStore::add(std::string_view image_id, std::span<const float> phoc,
                          float objectness) {
  if (sealed_) throw Error(ErrorCode::kSealedStore, "store is sealed");
  if (phoc.size() != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "descriptor has " + std::to_string(phoc.size()) + " values, store expects " +
                    std::to_string(dimension_));
  }
  if (objectness_.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "store is full");
  }
  std::string key(image_id);
  auto [it, inserted] =
      image_lookup_.try_emplace(key, static_cast<std::uint32_t>(image_ids_.size()));
  if (inserted) image_ids_.push_back(std::move(key));
  vectors_.insert(vectors_.end(), phoc.begin(), phoc.end());
  objectness_.push_back(objectness);
  image_of_.push_back(it->second);
}

Index DescriptorStore::seal(Backend backend, const AnnParams& params) {
  if (sealed_) throw Error(ErrorCode::kSealedStore, "store was already sealed");
  if (objectness_.empty()) throw Error(ErrorCode::kEmptyStore, "cannot seal an empty store");
  if (backend == Backend::kGraph) params.validate();
  sealed_ = true;

  Index index;
  index.backend_ = backend;
  index.params_ = params;
  index.config_ = config_;
  index.config_hash_ = config_.hash();
  index.dimension_ = dimension_;
  index.vectors_ = std::move(vectors_);
  index.objectness_ = std::move(objectness_);
  index.image_of_ = std::move(image_of_);
  index.image_ids_ = std::move(image_ids_);
  image_lookup_.clear();
  vectors_.clear();
  objectness_.clear();
  image_of_.clear();
  image_ids_.clear();

  if (backend == Backend::kGraph) {
    index.graph_ = std::make_unique<detail::HnswGraph>(index.dimension_, params.m,
                                                       params.ef_construction, params.seed);
    index.graph_->build(index.vectors_.data(), index.size());
  }
  return index;
}

Index::Index() = default;
Index::Index(Index&&) noexcept = default;
Index& Index::operator=(Index&&) noexcept = default;
Index::~Index() = default;

void Index::check_query(std::span<const float> query) const {
  if (query.size() != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query has " + std::to_string(query.size()) + " values, index expects " +
                    std::to_string(dimension_));
  }
}

void Index::scan(std::span<const float> query, std::span<float> squared_out) const {
  check_query(query);
  if (squared_out.size() != size()) {
    throw Error(ErrorCode::kDimensionMismatch, "scan output has wrong length");
  }
  const float* data = vectors_.data();
  for (std::size_t i = 0; i < size(); ++i) {
    squared_out[i] = squared_l2(query.data(), data + i * dimension_, dimension_);
  }
}

std::vector<NeighborHit> Index::exact_knn(std::span<const float> query, std::size_t k) const {
  check_query(query);
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  std::vector<detail::Candidate> all(size());
  const float* data = vectors_.data();
  for (std::size_t i = 0; i < size(); ++i) {
    all[i] = {squared_l2(query.data(), data + i * dimension_, dimension_),
              static_cast<std::uint32_t>(i)};
  }
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end());
  all.resize(take);
  return to_hits(all, image_of_);
}

std::vector<NeighborHit> Index::knn(std::span<const float> query, std::size_t k) const {
  return knn(query, k, params_.ef_search);
}

std::vector<NeighborHit> Index::knn(std::span<const float> query, std::size_t k,
                                    std::size_t ef_search) const {
  if (backend_ == Backend::kExact) return exact_knn(query, k);
  check_query(query);
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  return to_hits(graph_->search(vectors_.data(), query.data(), k, ef_search), image_of_);
}

void Index::save(const std::string& path) const {
  detail::ByteWriter out(path);
  out.bytes(kMagic, sizeof(kMagic));
  out.scalar(kFormatVersion);
  out.string(config_.to_text());
  out.scalar(config_hash_);
  out.scalar(static_cast<std::uint8_t>(backend_));
  out.scalar(static_cast<std::uint64_t>(size()));
  out.scalar(static_cast<std::uint32_t>(dimension_));
  out.array(vectors_);
  out.array(objectness_);
  out.scalar(static_cast<std::uint32_t>(image_ids_.size()));
  for (const auto& id : image_ids_) out.string(id);
  out.array(image_of_);
  if (backend_ == Backend::kGraph) {
    out.scalar(params_.m);
    out.scalar(params_.ef_construction);
    out.scalar(params_.ef_search);
    out.scalar(params_.seed);
    graph_->write(out);
  }
  out.finish();
}

Index Index::load(const std::string& path, const PhocConfig* expected_config) {
  detail::ByteReader in(path);
  char magic[4];
  in.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) in.corrupt("not an SSTR index file");
  const auto version = in.scalar<std::uint16_t>();
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "index format version " + std::to_string(version) + ", expected " +
                    std::to_string(kFormatVersion));
  }

  Index index;
  const std::string config_text = in.string();
  try {
    index.config_ = PhocConfig::from_text(config_text);
  } catch (const Error&) {
    in.corrupt("embedded descriptor configuration is invalid");
  }
  index.config_hash_ = in.scalar<std::uint32_t>();
  if (index.config_hash_ != index.config_.hash()) in.corrupt("configuration hash mismatch");
  if (expected_config != nullptr && expected_config->hash() != index.config_hash_) {
    throw Error(ErrorCode::kVersionMismatch,
                "index was built with a different descriptor configuration");
  }

  const auto tag = in.scalar<std::uint8_t>();
  if (tag > static_cast<std::uint8_t>(Backend::kGraph)) in.corrupt("unknown backend tag");
  index.backend_ = static_cast<Backend>(tag);
  const auto count = in.scalar<std::uint64_t>();
  index.dimension_ = in.scalar<std::uint32_t>();
  if (index.dimension_ != index.config_.dimension()) in.corrupt("dimension mismatch");
  if (count == 0 || count > in.remaining() / (index.dimension_ * sizeof(float))) {
    in.corrupt("entry count exceeds file size");
  }
  index.vectors_ = in.array<float>(count * index.dimension_);
  index.objectness_ = in.array<float>(count);
  const auto n_images = in.scalar<std::uint32_t>();
  if (n_images > in.remaining() / sizeof(std::uint32_t)) in.corrupt("image table too large");
  index.image_ids_.reserve(n_images);
  for (std::uint32_t i = 0; i < n_images; ++i) index.image_ids_.push_back(in.string());
  index.image_of_ = in.array<std::uint32_t>(count);
  for (auto image : index.image_of_) {
    if (image >= n_images) in.corrupt("entry refers to unknown image");
  }
  if (index.backend_ == Backend::kGraph) {
    index.params_.m = in.scalar<std::uint32_t>();
    index.params_.ef_construction = in.scalar<std::uint32_t>();
    index.params_.ef_search = in.scalar<std::uint32_t>();
    index.params_.seed = in.scalar<std::uint64_t>();
    try {
      index.params_.validate();
    } catch (const Error&) {
      in.corrupt("invalid graph parameters");
    }
    if (index.params_.m > 4096) in.corrupt("invalid graph parameters");
    index.graph_ = detail::HnswGraph::read(in, index.vectors_.data(), index.dimension_, count,
                                           index.params_.m, index.params_.ef_construction,
                                           index.params_.seed);
  }
  in.verify_trailer();
  return index;
}

}  // namespace textspot
