#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "textspot/textspot.h"

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("textspot_capi_" + name)).string();
}

std::string take(char* s) {
  std::string out = s ? s : "";
  ts_free_string(s);
  return out;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(ts_version()) == "1.0.0");
  CHECK(std::string(ts_status_name(TS_OK)) == "Ok");
  CHECK(std::string(ts_status_name(TS_ERR_CORRUPT_INDEX)) == "CorruptIndex");
}

TEST_CASE("config and encoding") {
  ts_config* cfg = nullptr;
  REQUIRE(ts_config_default(&cfg) == TS_OK);
  CHECK(ts_config_dimension(cfg) == 604);

  char* text = nullptr;
  REQUIRE(ts_config_to_text(cfg, &text) == TS_OK);
  ts_config* parsed = nullptr;
  REQUIRE(ts_config_parse(text, &parsed) == TS_OK);
  ts_free_string(text);
  CHECK(ts_config_hash(parsed) == ts_config_hash(cfg));
  ts_config_free(parsed);

  char* norm = nullptr;
  REQUIRE(ts_normalize(cfg, "Caf\xc3\xa9-24", &norm) == TS_OK);
  CHECK(take(norm) == "caf24");

  std::vector<float> v(604);
  REQUIRE(ts_encode(cfg, "beyond", v.data(), v.size()) == TS_OK);
  float sum = 0.0f;
  for (float x : v) sum += x;
  CHECK(sum > 0.0f);
  CHECK(ts_encode(cfg, "beyond", v.data(), 10) == TS_ERR_DIMENSION_MISMATCH);
  CHECK(ts_encode(cfg, "!!", v.data(), v.size()) == TS_ERR_EMPTY_AFTER_NORMALIZATION);
  CHECK(std::strlen(ts_last_error()) > 0);
  CHECK(ts_encode(nullptr, "a", v.data(), v.size()) == TS_ERR_INVALID_ARGUMENT);

  char* bigrams = nullptr;
  REQUIRE(ts_derive_bigrams(cfg, "aa\nab\naa", 2, &bigrams) == TS_OK);
  CHECK(take(bigrams) == "aa\nab");
  CHECK(ts_derive_bigrams(cfg, "ab", 2, &bigrams) == TS_ERR_INSUFFICIENT_BIGRAMS);

  ts_config_free(cfg);
  ts_config_free(nullptr);
}

TEST_CASE("geometry and loss") {
  CHECK(ts_iou({0, 0, 2, 2}, {1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0));
  CHECK(ts_shape_iou({2, 2}, {4, 4}) == doctest::Approx(0.25));

  ts_shape* shapes = nullptr;
  REQUIRE(ts_synthetic_text_shapes(500, 3, &shapes) == TS_OK);
  ts_shape* anchors = nullptr;
  size_t k = 0;
  REQUIRE(ts_select_anchors(shapes, 500, 0.6, 32, 0, &anchors, &k) == TS_OK);
  double cov = 0.0;
  REQUIRE(ts_coverage(shapes, 500, anchors, k, 0.6, &cov) == TS_OK);
  CHECK(cov == 1.0);
  CHECK(ts_select_anchors(shapes, 500, 0.6, 1, 0, &anchors, &k) == TS_ERR_COVERAGE_UNREACHABLE);
  ts_free_shapes(anchors);
  ts_free_shapes(shapes);

  const float t[2] = {1, 0};
  const float p[2] = {0.9f, 0.2f};
  double loss = 0.0;
  REQUIRE(ts_l_cls(t, p, 2, 1e-7, &loss) == TS_OK);
  CHECK(loss == doctest::Approx(0.164252).epsilon(1e-5));
  double err = 1.0;
  REQUIRE(ts_loss_check(10, 604, 1, &err) == TS_OK);
  CHECK(err <= 1e-5);
  const ts_loss_config lc = ts_loss_config_default();
  CHECK(lc.lambda_cls > 0.0);
}

TEST_CASE("store, index and query lifecycle") {
  ts_config* cfg = nullptr;
  REQUIRE(ts_config_default(&cfg) == TS_OK);
  ts_store* store = nullptr;
  REQUIRE(ts_store_new(cfg, &store) == TS_OK);

  ts_index* index = nullptr;
  CHECK(ts_store_seal(store, TS_BACKEND_EXACT, nullptr, &index) == TS_ERR_EMPTY_STORE);

  const char* words[] = {"tea", "shop", "coffee", "teas"};
  std::vector<float> v(604);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(ts_encode(cfg, words[i], v.data(), v.size()) == TS_OK);
    const std::string id = "img" + std::to_string(i);
    REQUIRE(ts_store_add(store, id.c_str(), v.data(), v.size(), 0.9f) == TS_OK);
  }
  CHECK(ts_store_add(store, "x", v.data(), 5, 0.9f) == TS_ERR_DIMENSION_MISMATCH);
  CHECK(ts_store_size(store) == 4);

  REQUIRE(ts_store_seal(store, TS_BACKEND_EXACT, nullptr, &index) == TS_OK);
  ts_index* again = nullptr;
  CHECK(ts_store_seal(store, TS_BACKEND_EXACT, nullptr, &again) == TS_ERR_SEALED_STORE);
  CHECK(ts_index_size(index) == 4);
  CHECK(ts_index_image_count(index) == 4);
  CHECK(ts_index_backend(index) == TS_BACKEND_EXACT);

  ts_neighbor hits[8];
  size_t found = 0;
  REQUIRE(ts_encode(cfg, "tea", v.data(), v.size()) == TS_OK);
  REQUIRE(ts_index_knn(index, v.data(), v.size(), 8, hits, &found) == TS_OK);
  CHECK(found == 4);
  CHECK(hits[0].entry == 0);
  CHECK(hits[0].distance == 0.0);
  CHECK(std::string(ts_index_image_id(index, hits[0].image)) == "img0");

  ts_ranked_list* list = nullptr;
  REQUIRE(ts_query(index, nullptr, "TEA", 0, &list) == TS_OK);
  CHECK(ts_ranked_list_size(list) == 4);
  CHECK(ts_ranked_list_exhaustive(list) == 1);
  CHECK(std::string(ts_ranked_list_image_id(list, 0)) == "img0");
  CHECK(ts_ranked_list_score(list, 0) == 0.0);
  ts_ranked_list_free(list);
  CHECK(ts_query(index, nullptr, "??", 0, &list) == TS_ERR_EMPTY_AFTER_NORMALIZATION);

  const std::string path = temp_path("index.sstr");
  REQUIRE(ts_index_save(index, path.c_str()) == TS_OK);
  ts_index* loaded = nullptr;
  REQUIRE(ts_index_load(path.c_str(), cfg, &loaded) == TS_OK);
  CHECK(ts_index_size(loaded) == 4);
  ts_index_free(loaded);

  ts_config* other = nullptr;
  REQUIRE(ts_config_default(&other) == TS_OK);
  REQUIRE(ts_config_set_bigrams(other, "th\nhe") == TS_OK);
  CHECK(ts_index_load(path.c_str(), other, &loaded) == TS_ERR_VERSION_MISMATCH);
  CHECK(ts_query(index, other, "tea", 0, &list) == TS_ERR_CONFIG_MISMATCH);
  ts_config_free(other);

  std::filesystem::resize_file(path, 100);
  CHECK(ts_index_load(path.c_str(), nullptr, &loaded) == TS_ERR_CORRUPT_INDEX);
  CHECK(ts_index_load(temp_path("missing").c_str(), nullptr, &loaded) == TS_ERR_IO);
  std::filesystem::remove(path);

  char* json = nullptr;
  char* tsv = nullptr;
  CHECK(ts_bench(index, nullptr, "", 1, 0, &json, &tsv) == TS_ERR_EMPTY_QUERY_LIST);
  REQUIRE(ts_bench(index, nullptr, "tea\nshop", 2, 0, &json, &tsv) == TS_OK);
  CHECK(take(json).find("textspot.bench") != std::string::npos);
  CHECK(take(tsv).rfind("metric", 0) == 0);

  ts_index_free(index);
  ts_store_free(store);
  ts_config_free(cfg);
}

TEST_CASE("synthetic corpus through files") {
  ts_config* cfg = nullptr;
  REQUIRE(ts_config_default(&cfg) == TS_OK);
  char* lexicon = nullptr;
  REQUIRE(ts_synthetic_lexicon(500, 2, &lexicon) == TS_OK);

  ts_synth_spec spec = ts_synth_spec_default();
  spec.image_count = 100;
  spec.descriptors_per_image = 10;
  spec.query_count = 10;
  const std::string dets = temp_path("dets.jsonl");
  const std::string gt = temp_path("gt.tsv");
  const std::string queries = temp_path("queries.txt");
  char* summary = nullptr;
  REQUIRE(ts_synth_write(cfg, &spec, lexicon, dets.c_str(), gt.c_str(), queries.c_str(),
                         &summary) == TS_OK);
  CHECK(take(summary).find("\"descriptors\": 1000") != std::string::npos);
  ts_free_string(lexicon);

  ts_store* store = nullptr;
  REQUIRE(ts_store_new(cfg, &store) == TS_OK);
  size_t added = 0;
  REQUIRE(ts_store_add_detections_file(store, dets.c_str(), &added) == TS_OK);
  CHECK(added == 1000);
  ts_index* index = nullptr;
  REQUIRE(ts_store_seal(store, TS_BACKEND_EXACT, nullptr, &index) == TS_OK);

  char* qlist = nullptr;
  REQUIRE(ts_load_queries(queries.c_str(), &qlist) == TS_OK);
  char* report = nullptr;
  REQUIRE(ts_evaluate(index, nullptr, qlist, gt.c_str(), 0, 1, &report) == TS_OK);
  const std::string r = take(report);
  CHECK(r.find("\"mAP\": 1.0") != std::string::npos);
  CHECK(ts_evaluate(index, nullptr, "", gt.c_str(), 0, 1, &report) == TS_ERR_EMPTY_QUERY_LIST);
  ts_free_string(qlist);

  ts_index_free(index);
  ts_store_free(store);
  ts_config_free(cfg);
  for (const auto& p : {dets, gt, queries}) std::filesystem::remove(p);
}
