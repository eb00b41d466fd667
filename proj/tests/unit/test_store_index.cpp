#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "oracles.hpp"
#include "textspot/corpus.hpp"
#include "textspot/distance.hpp"
#include "textspot/error.hpp"
#include "textspot/store_index.hpp"

using namespace textspot;

namespace {

PhocConfig small_config() {
  PhocConfig cfg;
  cfg.alphabet = "abcdefgh";
  cfg.unigram_levels = {2};
  cfg.bigram_levels = {};
  cfg.bigrams = {};
  return cfg;  // 16 dimensions
}

struct Dataset {
  std::vector<std::vector<float>> vectors;
  std::vector<std::string> images;
};

Dataset random_dataset(std::size_t n, std::size_t dim, std::size_t images, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(dim);
    for (auto& x : v) x = g(rng);
    d.vectors.push_back(std::move(v));
    d.images.push_back("img" + std::to_string(i % images));
  }
  return d;
}

DescriptorStore fill(const PhocConfig& cfg, const Dataset& d) {
  DescriptorStore store(cfg);
  for (std::size_t i = 0; i < d.vectors.size(); ++i) store.add(d.images[i], d.vectors[i], 0.9f);
  return store;
}

// (distance, entry) pairs sorted the way hits must be.
std::vector<std::size_t> brute_knn(const Dataset& d, const std::vector<float>& q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < d.vectors.size(); ++i) {
    all.emplace_back(oracle::euclid(q, d.vectors[i].data()), i);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("textspot_" + name)).string();
}

std::vector<char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("distance properties") {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (int t = 0; t < 100; ++t) {
    std::vector<float> a(37), b(37), c(37);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
      c[i] = g(rng);
    }
    CHECK(squared_l2(a.data(), a.data(), a.size()) == 0.0f);
    CHECK(squared_l2(a.data(), b.data(), a.size()) == squared_l2(b.data(), a.data(), a.size()));
    const double ab = std::sqrt(squared_l2(a.data(), b.data(), a.size()));
    const double bc = std::sqrt(squared_l2(b.data(), c.data(), a.size()));
    const double ac = std::sqrt(squared_l2(a.data(), c.data(), a.size()));
    CHECK(ac <= ab + bc + 1e-5);
    CHECK(ab == doctest::Approx(oracle::euclid(a, b.data())).epsilon(1e-5));
  }
}

TEST_CASE("exact search matches a brute-force oracle") {
  const auto cfg = small_config();
  const auto d = random_dataset(3000, cfg.dimension(), 300, 5);
  auto store = fill(cfg, d);
  CHECK(store.size() == 3000);
  CHECK(store.image_count() == 300);
  const Index index = store.seal(Backend::kExact);
  CHECK(store.sealed());
  const auto queries = random_dataset(100, cfg.dimension(), 1, 77);
  for (const auto& q : queries.vectors) {
    const auto hits = index.knn(q, 10);
    REQUIRE(hits.size() == 10);
    const auto expected = brute_knn(d, q, 10);
    for (std::size_t i = 0; i < hits.size(); ++i) {
      CHECK(hits[i].entry == expected[i]);
      CHECK(hits[i].distance == doctest::Approx(oracle::euclid(q, d.vectors[expected[i]].data()))
                                    .epsilon(1e-5));
      CHECK(index.image_id(hits[i].image) == d.images[hits[i].entry]);
    }
  }
}

TEST_CASE("ties go to the lower entry and k is clamped") {
  const auto cfg = small_config();
  DescriptorStore store(cfg);
  std::vector<float> v(cfg.dimension(), 0.0f);
  std::vector<float> far(cfg.dimension(), 3.0f);
  store.add("a", far, 1.0f);
  store.add("b", v, 1.0f);
  store.add("c", v, 1.0f);
  const Index index = store.seal(Backend::kExact);
  const auto hits = index.knn(v, 10);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].entry == 1);
  CHECK(hits[1].entry == 2);
  CHECK(hits[2].entry == 0);
  CHECK(hits[0].distance == 0.0);
}

TEST_CASE("store errors") {
  const auto cfg = small_config();
  DescriptorStore store(cfg);
  std::vector<float> wrong(cfg.dimension() + 1, 0.0f);
  CHECK(code_of([&] { store.add("x", wrong, 1.0f); }) == ErrorCode::kDimensionMismatch);
  CHECK(code_of([&] { store.seal(Backend::kExact); }) == ErrorCode::kEmptyStore);

  std::vector<float> ok(cfg.dimension(), 0.5f);
  store.add("x", ok, 1.0f);
  const Index index = store.seal(Backend::kExact);
  CHECK(code_of([&] { store.seal(Backend::kExact); }) == ErrorCode::kSealedStore);
  CHECK(code_of([&] { store.add("y", ok, 1.0f); }) == ErrorCode::kSealedStore);
  CHECK(code_of([&] { index.knn(wrong, 1); }) == ErrorCode::kDimensionMismatch);

  AnnParams bad;
  bad.m = 1;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kInvalidArgument);
  CHECK(parse_backend("hnsw") == Backend::kGraph);
  CHECK(code_of([&] { parse_backend("tree"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("graph backend recall") {
  // Noisy copies of word descriptors, as a detector would emit them.
  const PhocConfig cfg;
  const PhocEncoder enc(cfg);
  const auto words = synthetic_lexicon(2500, 4);
  std::mt19937_64 rng(9);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  Dataset d;
  for (std::size_t i = 0; i < 10000; ++i) {
    auto v = enc.encode(words[i % words.size()]).values;
    for (auto& x : v) x = std::clamp(x + noise(rng), 0.0f, 1.0f);
    d.vectors.push_back(std::move(v));
    d.images.push_back("img" + std::to_string(i / 40));
  }
  auto store = fill(cfg, d);
  const Index index = store.seal(Backend::kGraph);
  CHECK(index.backend() == Backend::kGraph);
  std::size_t found = 0;
  std::size_t total = 0;
  for (int q = 0; q < 100; ++q) {
    auto query = d.vectors[static_cast<std::size_t>(q) * 71];
    for (auto& x : query) x += noise(rng);
    const auto truth = brute_knn(d, query, 10);
    const auto hits = index.knn(query, 10);
    REQUIRE(hits.size() == 10);
    std::set<std::size_t> got;
    for (const auto& h : hits) got.insert(h.entry);
    for (auto e : truth) found += got.count(e);
    total += truth.size();
    for (std::size_t i = 1; i < hits.size(); ++i) CHECK(hits[i - 1].distance <= hits[i].distance);
  }
  CHECK(static_cast<double>(found) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("graph backend returns every copy of duplicated vectors") {
  const auto cfg = small_config();
  auto d = random_dataset(500, cfg.dimension(), 50, 3);
  for (int c = 0; c < 60; ++c) {
    d.vectors.push_back(d.vectors[7]);
    d.images.push_back("dup" + std::to_string(c));
  }
  auto store = fill(cfg, d);
  const Index index = store.seal(Backend::kGraph);
  const auto hits = index.knn(d.vectors[7], 61, 200);
  REQUIRE(hits.size() == 61);
  std::vector<std::size_t> entries;
  for (const auto& h : hits) {
    CHECK(h.distance == 0.0);
    entries.push_back(h.entry);
  }
  std::vector<std::size_t> expected{7};
  for (std::size_t e = 500; e < 560; ++e) expected.push_back(e);
  CHECK(entries == expected);
}

TEST_CASE("save and load round trip") {
  const auto cfg = small_config();
  const auto d = random_dataset(2000, cfg.dimension(), 100, 21);
  const auto queries = random_dataset(50, cfg.dimension(), 1, 22);
  for (Backend backend : {Backend::kExact, Backend::kGraph}) {
    CAPTURE(backend_name(backend));
    auto store = fill(cfg, d);
    const Index index = store.seal(backend);
    const std::string path = temp_path(std::string("roundtrip_") + backend_name(backend));
    index.save(path);
    const Index loaded = Index::load(path, &cfg);
    CHECK(loaded.backend() == backend);
    CHECK(loaded.size() == index.size());
    CHECK(loaded.config() == cfg);
    CHECK(loaded.params().m == index.params().m);
    for (std::size_t i = 0; i < index.image_count(); ++i) {
      CHECK(loaded.image_id(static_cast<std::uint32_t>(i)) ==
            index.image_id(static_cast<std::uint32_t>(i)));
    }
    for (const auto& q : queries.vectors) CHECK(loaded.knn(q, 10) == index.knn(q, 10));

    const auto bytes = read_all(path);
    auto truncated = bytes;
    truncated.resize(bytes.size() / 2);
    write_all(path, truncated);
    CHECK(code_of([&] { Index::load(path); }) == ErrorCode::kCorruptIndex);

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      auto flipped = bytes;
      std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
      flipped[pos(rng)] ^= 0x10;
      write_all(path, flipped);
      const auto code = code_of([&] { Index::load(path); });
      CHECK((code == ErrorCode::kCorruptIndex || code == ErrorCode::kVersionMismatch));
    }

    write_all(path, bytes);
    PhocConfig other = cfg;
    other.overlap_threshold = 0.4;
    CHECK(code_of([&] { Index::load(path, &other); }) == ErrorCode::kVersionMismatch);
    std::filesystem::remove(path);
  }
  CHECK(code_of([] { Index::load(temp_path("does_not_exist")); }) == ErrorCode::kIoFailure);
}

TEST_CASE("concurrent queries agree with sequential ones") {
  const auto cfg = small_config();
  const auto d = random_dataset(3000, cfg.dimension(), 100, 31);
  const auto queries = random_dataset(64, cfg.dimension(), 1, 32);
  for (Backend backend : {Backend::kExact, Backend::kGraph}) {
    auto store = fill(cfg, d);
    const Index index = store.seal(backend);
    std::vector<std::vector<NeighborHit>> expected;
    for (const auto& q : queries.vectors) expected.push_back(index.knn(q, 5));
    std::vector<std::vector<NeighborHit>> got(queries.vectors.size());
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < 4; ++t) {
      workers.emplace_back([&, t] {
        for (std::size_t i = t; i < queries.vectors.size(); i += 4) {
          got[i] = index.knn(queries.vectors[i], 5);
        }
      });
    }
    for (auto& w : workers) w.join();
    CHECK(got == expected);
  }
}
