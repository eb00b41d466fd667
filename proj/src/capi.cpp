#include "textspot/textspot.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "textspot/corpus.hpp"
#include "textspot/error.hpp"
#include "textspot/evalkit.hpp"
#include "textspot/geometry.hpp"
#include "textspot/loss.hpp"
#include "textspot/phoc.hpp"
#include "textspot/retrieval.hpp"
#include "textspot/store_index.hpp"

struct ts_config {
  textspot::PhocConfig config;
};

struct ts_store {
  explicit ts_store(textspot::PhocConfig c) : store(std::move(c)) {}
  textspot::DescriptorStore store;
};

struct ts_index {
  explicit ts_index(textspot::Index i) : index(std::move(i)) {}
  textspot::Index index;
};

struct ts_ranked_list {
  textspot::RankedList list;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
ts_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return TS_OK;
  } catch (const textspot::Error& e) {
    g_last_error = e.what();
    return static_cast<ts_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TS_ERR_OUT_OF_MEMORY;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return TS_ERR_INTERNAL;
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw textspot::Error(textspot::ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

std::string join_lines(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += items[i];
  }
  return out;
}

std::vector<std::string> split_lines(const char* text) {
  std::vector<std::string> out;
  if (text == nullptr) return out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

ts_shape* copy_shapes(const std::vector<textspot::BoxShape>& shapes) {
  auto* out = static_cast<ts_shape*>(std::malloc(sizeof(ts_shape) * std::max<std::size_t>(1, shapes.size())));
  if (out == nullptr) throw std::bad_alloc();
  for (std::size_t i = 0; i < shapes.size(); ++i) out[i] = {shapes[i].w, shapes[i].h};
  return out;
}

std::vector<textspot::BoxShape> to_shapes(const ts_shape* shapes, std::size_t n) {
  std::vector<textspot::BoxShape> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({shapes[i].w, shapes[i].h});
  return out;
}

const textspot::PhocConfig& config_or_index(const ts_config* config, const ts_index* index) {
  return config != nullptr ? config->config : index->index.config();
}

}  // namespace

extern "C" {

const char* ts_version(void) { return "1.0.0"; }

const char* ts_status_name(ts_status status) {
  switch (status) {
    case TS_OK: return "Ok";
    case TS_ERR_OUT_OF_MEMORY: return "OutOfMemory";
    case TS_ERR_INTERNAL: return "Internal";
    default:
      return textspot::error_code_name(static_cast<textspot::ErrorCode>(static_cast<int>(status)));
  }
}

const char* ts_last_error(void) { return g_last_error.c_str(); }

void ts_free_string(char* s) { std::free(s); }

ts_status ts_config_default(ts_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new ts_config{};
  });
}

ts_status ts_config_parse(const char* text, ts_config** out) {
  return guarded([&] {
    require(text != nullptr && out != nullptr, "null argument");
    *out = new ts_config{textspot::PhocConfig::from_text(text)};
  });
}

ts_status ts_config_load(const char* path, ts_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    std::ifstream in(path);
    if (!in) throw textspot::Error(textspot::ErrorCode::kIoFailure, std::string("cannot open '") + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    *out = new ts_config{textspot::PhocConfig::from_text(buffer.str())};
  });
}

ts_status ts_config_to_text(const ts_config* config, char** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "null argument");
    *out = dup_string(config->config.to_text());
  });
}

ts_status ts_config_set_bigrams(ts_config* config, const char* bigrams) {
  return guarded([&] {
    require(config != nullptr, "config is null");
    textspot::PhocConfig next = config->config;
    next.bigrams = split_lines(bigrams);
    next.validate();
    config->config = std::move(next);
  });
}

size_t ts_config_dimension(const ts_config* config) {
  return config != nullptr ? config->config.dimension() : 0;
}

uint32_t ts_config_hash(const ts_config* config) {
  return config != nullptr ? config->config.hash() : 0;
}

void ts_config_free(ts_config* config) { delete config; }

ts_status ts_normalize(const ts_config* config, const char* raw, char** out) {
  return guarded([&] {
    require(config != nullptr && raw != nullptr && out != nullptr, "null argument");
    *out = dup_string(textspot::normalize_word(raw, config->config).chars);
  });
}

ts_status ts_encode(const ts_config* config, const char* raw, float* out, size_t out_len) {
  return guarded([&] {
    require(config != nullptr && raw != nullptr && out != nullptr, "null argument");
    const textspot::PhocEncoder encoder(config->config);
    const auto word = encoder.normalize(raw);
    encoder.encode_into(word.chars, std::span<float>(out, out_len));
  });
}

ts_status ts_derive_bigrams(const ts_config* config, const char* lexicon, size_t count,
                            char** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "null argument");
    const auto words = split_lines(lexicon);
    *out = dup_string(join_lines(textspot::derive_bigrams(words, count, config->config)));
  });
}

ts_status ts_load_lexicon(const ts_config* config, const char* path, char** out) {
  return guarded([&] {
    require(config != nullptr && path != nullptr && out != nullptr, "null argument");
    *out = dup_string(join_lines(textspot::load_lexicon(path, config->config)));
  });
}

ts_status ts_synthetic_lexicon(size_t count, uint64_t seed, char** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = dup_string(join_lines(textspot::synthetic_lexicon(count, seed)));
  });
}

double ts_iou(ts_box a, ts_box b) {
  return textspot::iou({a.x, a.y, a.w, a.h}, {b.x, b.y, b.w, b.h});
}

double ts_shape_iou(ts_shape a, ts_shape b) {
  return textspot::shape_iou({a.w, a.h}, {b.w, b.h});
}

ts_status ts_load_box_shapes(const char* path, ts_shape** out, size_t* count) {
  return guarded([&] {
    require(path != nullptr && out != nullptr && count != nullptr, "null argument");
    const auto shapes = textspot::load_box_shapes(path);
    *out = copy_shapes(shapes);
    *count = shapes.size();
  });
}

ts_status ts_synthetic_text_shapes(size_t count, uint64_t seed, ts_shape** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = copy_shapes(textspot::synthetic_text_shapes(count, seed));
  });
}

ts_status ts_select_anchors(const ts_shape* gt, size_t count, double min_iou, size_t max_k,
                            uint64_t seed, ts_shape** anchors, size_t* k) {
  return guarded([&] {
    require(gt != nullptr && anchors != nullptr && k != nullptr, "null argument");
    const auto shapes = to_shapes(gt, count);
    textspot::AnchorSearchOptions options;
    options.min_iou = min_iou;
    options.max_k = max_k;
    options.seed = seed;
    const auto result = textspot::select_anchors(shapes, options);
    *anchors = copy_shapes(result.shapes);
    *k = result.size();
  });
}

ts_status ts_coverage(const ts_shape* gt, size_t count, const ts_shape* anchors, size_t k,
                      double min_iou, double* out) {
  return guarded([&] {
    require(gt != nullptr && anchors != nullptr && out != nullptr, "null argument");
    const auto shapes = to_shapes(gt, count);
    *out = textspot::coverage(shapes, textspot::AnchorSet{to_shapes(anchors, k)}, min_iou);
  });
}

void ts_free_shapes(ts_shape* shapes) { std::free(shapes); }

ts_status ts_decode_grid(const float* raw, size_t raw_len, int input_width, int input_height,
                         int stride, const ts_shape* anchors, size_t n_anchors, int phoc_dim,
                         double threshold, const char* image_id, ts_store* sink,
                         size_t* emitted) {
  return guarded([&] {
    require(raw != nullptr && anchors != nullptr && image_id != nullptr, "null argument");
    require(stride > 0 && phoc_dim >= 0, "bad stride or descriptor length");
    textspot::GridDecodeConfig config;
    config.input_width = input_width;
    config.input_height = input_height;
    config.stride = stride;
    config.anchors.shapes = to_shapes(anchors, n_anchors);
    config.objectness_threshold = threshold;
    textspot::RawGrid grid;
    grid.grid_width = input_width / stride;
    grid.grid_height = input_height / stride;
    grid.anchors = static_cast<int>(n_anchors);
    grid.phoc_dim = phoc_dim;
    grid.values.assign(raw, raw + raw_len);
    const auto detections = textspot::decode_grid(grid, config, image_id);
    if (sink != nullptr) {
      for (const auto& det : detections) sink->store.add(det);
    }
    if (emitted != nullptr) *emitted = detections.size();
  });
}

ts_loss_config ts_loss_config_default(void) {
  const textspot::LossConfig c;
  return {c.lambda_box, c.lambda_obj, c.lambda_noobj, c.lambda_cls, c.epsilon};
}

ts_status ts_l_cls(const float* target, const float* pred, size_t n, double epsilon,
                   double* out) {
  return guarded([&] {
    require(target != nullptr && pred != nullptr && out != nullptr, "null argument");
    *out = textspot::l_cls(std::span<const float>(target, n), std::span<const float>(pred, n),
                           epsilon);
  });
}

ts_status ts_grad_l_cls(const float* target, const float* pred, size_t n, double epsilon,
                        double* grad) {
  return guarded([&] {
    require(target != nullptr && pred != nullptr && grad != nullptr, "null argument");
    const auto g = textspot::grad_l_cls(std::span<const float>(target, n),
                                        std::span<const float>(pred, n), epsilon);
    std::copy(g.begin(), g.end(), grad);
  });
}

ts_status ts_total_loss(const double box_target[4], const double box_pred[4],
                        int objectness_target, double objectness_pred, const float* phoc_target,
                        const float* phoc_pred, size_t n, const ts_loss_config* config,
                        double* out) {
  return guarded([&] {
    require(box_target && box_pred && phoc_target && phoc_pred && out, "null argument");
    textspot::LossConfig cfg;
    if (config != nullptr) {
      cfg = {config->lambda_box, config->lambda_obj, config->lambda_noobj, config->lambda_cls,
             config->epsilon};
    }
    textspot::LossInputs in;
    std::copy(box_target, box_target + 4, in.box_target.begin());
    std::copy(box_pred, box_pred + 4, in.box_pred.begin());
    in.objectness_target = objectness_target;
    in.objectness_pred = objectness_pred;
    in.phoc_target.assign(phoc_target, phoc_target + n);
    in.phoc_pred.assign(phoc_pred, phoc_pred + n);
    *out = textspot::total_loss(in, cfg);
  });
}

ts_status ts_loss_check(size_t pairs, size_t dimension, uint64_t seed,
                        double* max_relative_error) {
  return guarded([&] {
    require(max_relative_error != nullptr, "null argument");
    *max_relative_error = textspot::check_cls_gradient(pairs, dimension, seed).max_relative_error;
  });
}

ts_ann_params ts_ann_params_default(void) {
  const textspot::AnnParams p;
  return {p.m, p.ef_construction, p.ef_search, p.seed};
}

ts_status ts_store_new(const ts_config* config, ts_store** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "null argument");
    *out = new ts_store(config->config);
  });
}

ts_status ts_store_add(ts_store* store, const char* image_id, const float* phoc, size_t len,
                       float objectness) {
  return guarded([&] {
    require(store != nullptr && image_id != nullptr && phoc != nullptr, "null argument");
    store->store.add(image_id, std::span<const float>(phoc, len), objectness);
  });
}

ts_status ts_store_add_detections_file(ts_store* store, const char* path, size_t* added) {
  return guarded([&] {
    require(store != nullptr && path != nullptr, "null argument");
    std::size_t count = 0;
    textspot::for_each_detection(path, store->store.config(), [&](textspot::Detection&& det) {
      store->store.add(det);
      ++count;
    });
    if (added != nullptr) *added = count;
  });
}

size_t ts_store_size(const ts_store* store) { return store != nullptr ? store->store.size() : 0; }

ts_status ts_store_seal(ts_store* store, ts_backend backend, const ts_ann_params* params,
                        ts_index** out) {
  return guarded([&] {
    require(store != nullptr && out != nullptr, "null argument");
    require(backend == TS_BACKEND_EXACT || backend == TS_BACKEND_GRAPH, "unknown backend");
    textspot::AnnParams p;
    if (params != nullptr) p = {params->m, params->ef_construction, params->ef_search, params->seed};
    *out = new ts_index(store->store.seal(static_cast<textspot::Backend>(backend), p));
  });
}

void ts_store_free(ts_store* store) { delete store; }

ts_status ts_index_save(const ts_index* index, const char* path) {
  return guarded([&] {
    require(index != nullptr && path != nullptr, "null argument");
    index->index.save(path);
  });
}

ts_status ts_index_load(const char* path, const ts_config* expected, ts_index** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new ts_index(
        textspot::Index::load(path, expected != nullptr ? &expected->config : nullptr));
  });
}

size_t ts_index_size(const ts_index* index) { return index != nullptr ? index->index.size() : 0; }

size_t ts_index_image_count(const ts_index* index) {
  return index != nullptr ? index->index.image_count() : 0;
}

ts_backend ts_index_backend(const ts_index* index) {
  return index != nullptr && index->index.backend() == textspot::Backend::kGraph
             ? TS_BACKEND_GRAPH
             : TS_BACKEND_EXACT;
}

ts_status ts_index_config(const ts_index* index, ts_config** out) {
  return guarded([&] {
    require(index != nullptr && out != nullptr, "null argument");
    *out = new ts_config{index->index.config()};
  });
}

const char* ts_index_image_id(const ts_index* index, uint32_t image) {
  if (index == nullptr || image >= index->index.image_count()) return nullptr;
  return index->index.image_id(image).c_str();
}

ts_status ts_index_knn(const ts_index* index, const float* query, size_t len, size_t k,
                       ts_neighbor* out, size_t* found) {
  return guarded([&] {
    require(index != nullptr && query != nullptr && out != nullptr && found != nullptr,
            "null argument");
    const auto hits = index->index.knn(std::span<const float>(query, len), k);
    for (std::size_t i = 0; i < hits.size(); ++i) {
      out[i] = {hits[i].entry, hits[i].image, hits[i].distance};
    }
    *found = hits.size();
  });
}

void ts_index_free(ts_index* index) { delete index; }

ts_status ts_query(const ts_index* index, const ts_config* config, const char* text,
                   size_t k_pool, ts_ranked_list** out) {
  return guarded([&] {
    require(index != nullptr && text != nullptr && out != nullptr, "null argument");
    textspot::RetrievalParams params;
    params.k_pool = k_pool;
    auto list = std::make_unique<ts_ranked_list>();
    list->list = textspot::query(text, index->index, config_or_index(config, index), params);
    *out = list.release();
  });
}

size_t ts_ranked_list_size(const ts_ranked_list* list) {
  return list != nullptr ? list->list.items.size() : 0;
}

int ts_ranked_list_exhaustive(const ts_ranked_list* list) {
  return list != nullptr && list->list.exhaustive ? 1 : 0;
}

const char* ts_ranked_list_image_id(const ts_ranked_list* list, size_t i) {
  if (list == nullptr || i >= list->list.items.size()) return nullptr;
  return list->list.items[i].image_id.c_str();
}

double ts_ranked_list_score(const ts_ranked_list* list, size_t i) {
  if (list == nullptr || i >= list->list.items.size()) return -1.0;
  return list->list.items[i].score;
}

void ts_ranked_list_free(ts_ranked_list* list) { delete list; }

ts_status ts_load_queries(const char* path, char** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = dup_string(join_lines(textspot::load_queries(path)));
  });
}

ts_status ts_evaluate(const ts_index* index, const ts_config* config, const char* queries,
                      const char* gt_path, size_t k_pool, unsigned threads,
                      char** report_json) {
  return guarded([&] {
    require(index != nullptr && gt_path != nullptr && report_json != nullptr, "null argument");
    const auto& cfg = config_or_index(config, index);
    const auto list = split_lines(queries);
    if (list.empty()) throw textspot::Error(textspot::ErrorCode::kEmptyQueryList, "no queries");
    const auto gt = textspot::load_ground_truth(gt_path, cfg);
    textspot::RetrievalParams params;
    params.k_pool = k_pool;
    const auto report = textspot::evaluate(list, index->index, gt, cfg, params, threads);
    *report_json = dup_string(report.to_json());
  });
}

ts_status ts_bench(const ts_index* index, const ts_config* config, const char* queries,
                   size_t repetitions, size_t k_pool, char** json, char** tsv) {
  return guarded([&] {
    require(index != nullptr, "index is null");
    const auto list = split_lines(queries);
    textspot::RetrievalParams params;
    params.k_pool = k_pool;
    const auto report = textspot::bench(index->index, list, config_or_index(config, index),
                                        repetitions, params);
    if (json != nullptr) *json = dup_string(report.to_json());
    if (tsv != nullptr) *tsv = dup_string(report.to_tsv());
  });
}

ts_synth_spec ts_synth_spec_default(void) {
  const textspot::SyntheticSpec s;
  return {s.image_count,   s.min_words_per_image, s.max_words_per_image, s.descriptors_per_image,
          s.phoc_noise,    s.bit_flip_rate,       s.distractor_rate,     s.query_count,
          s.min_relevant,  s.max_relevant,        s.unseen_fraction,     s.empty_image_fraction,
          s.seed};
}

ts_status ts_synth_write(const ts_config* config, const ts_synth_spec* spec, const char* lexicon,
                         const char* detections_path, const char* gt_path,
                         const char* queries_path, char** summary) {
  return guarded([&] {
    require(config != nullptr && spec != nullptr && detections_path != nullptr &&
                gt_path != nullptr && queries_path != nullptr,
            "null argument");
    textspot::SyntheticSpec s;
    s.image_count = spec->image_count;
    s.min_words_per_image = spec->min_words_per_image;
    s.max_words_per_image = spec->max_words_per_image;
    s.descriptors_per_image = spec->descriptors_per_image;
    s.phoc_noise = spec->phoc_noise;
    s.bit_flip_rate = spec->bit_flip_rate;
    s.distractor_rate = spec->distractor_rate;
    s.query_count = spec->query_count;
    s.min_relevant = spec->min_relevant;
    s.max_relevant = spec->max_relevant;
    s.unseen_fraction = spec->unseen_fraction;
    s.empty_image_fraction = spec->empty_image_fraction;
    s.seed = spec->seed;
    s.lexicon = split_lines(lexicon);

    textspot::DetectionWriter writer(detections_path, config->config);
    const auto corpus = textspot::generate(s, config->config,
                                           [&](const textspot::Detection& det) { writer.write(det); });
    writer.close();
    textspot::save_ground_truth(corpus.ground_truth, gt_path);
    textspot::write_queries(corpus.queries, queries_path);
    if (summary != nullptr) {
      nlohmann::json j;
      j["images"] = s.image_count;
      j["descriptors"] = corpus.descriptor_count;
      j["queries"] = corpus.queries.size();
      std::size_t unseen = 0;
      for (const auto& q : corpus.queries) unseen += q.unseen ? 1 : 0;
      j["unseen_queries"] = unseen;
      j["collisions_dropped"] = corpus.collisions_dropped;
      j["seed"] = s.seed;
      j["phoc_noise"] = s.phoc_noise;
      j["bit_flip_rate"] = s.bit_flip_rate;
      *summary = dup_string(j.dump(2));
    }
  });
}

}  // extern "C"
