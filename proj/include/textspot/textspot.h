/*
 * textspot C API.
 *
 * All objects are opaque handles created by a ts_*_new / ts_*_load / seal
 * call and released with the matching ts_*_free. Functions that can fail
 * return ts_status; on failure ts_last_error() describes the problem for the
 * calling thread. Strings returned through `char**` are owned by the caller
 * and released with ts_free_string. Lists of words are exchanged as
 * newline-separated strings.
 *
 * Sealed indexes are immutable: any number of threads may query one index
 * concurrently. Stores are single-writer.
 */
#ifndef TEXTSPOT_H
#define TEXTSPOT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(TEXTSPOT_BUILDING)
#    define TS_API __declspec(dllexport)
#  else
#    define TS_API __declspec(dllimport)
#  endif
#else
#  define TS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ts_status {
  TS_OK = 0,
  TS_ERR_INVALID_ARGUMENT = 1,
  TS_ERR_EMPTY_AFTER_NORMALIZATION = 2,
  TS_ERR_INSUFFICIENT_BIGRAMS = 3,
  TS_ERR_DIMENSION_MISMATCH = 4,
  TS_ERR_SHAPE_MISMATCH = 5,
  TS_ERR_COVERAGE_UNREACHABLE = 6,
  TS_ERR_SEALED_STORE = 7,
  TS_ERR_EMPTY_STORE = 8,
  TS_ERR_NOT_SEALED = 9,
  TS_ERR_IO = 10,
  TS_ERR_VERSION_MISMATCH = 11,
  TS_ERR_CORRUPT_INDEX = 12,
  TS_ERR_CONFIG_MISMATCH = 13,
  TS_ERR_PARSE = 14,
  TS_ERR_EMPTY_LEXICON = 15,
  TS_ERR_LEXICON_TOO_SMALL = 16,
  TS_ERR_EMPTY_RELEVANT_SET = 17,
  TS_ERR_EMPTY_QUERY_LIST = 18,
  TS_ERR_OUT_OF_MEMORY = 100,
  TS_ERR_INTERNAL = 101
} ts_status;

typedef enum ts_backend { TS_BACKEND_EXACT = 0, TS_BACKEND_GRAPH = 1 } ts_backend;

typedef struct ts_config ts_config;
typedef struct ts_store ts_store;
typedef struct ts_index ts_index;
typedef struct ts_ranked_list ts_ranked_list;

typedef struct ts_shape {
  double w;
  double h;
} ts_shape;

typedef struct ts_box {
  double x;
  double y;
  double w;
  double h;
} ts_box;

typedef struct ts_neighbor {
  size_t entry;
  uint32_t image;
  double distance;
} ts_neighbor;

typedef struct ts_ann_params {
  uint32_t m;
  uint32_t ef_construction;
  uint32_t ef_search;
  uint64_t seed;
} ts_ann_params;

typedef struct ts_loss_config {
  double lambda_box;
  double lambda_obj;
  double lambda_noobj;
  double lambda_cls;
  double epsilon;
} ts_loss_config;

typedef struct ts_synth_spec {
  size_t image_count;
  size_t min_words_per_image;
  size_t max_words_per_image;
  size_t descriptors_per_image;
  double phoc_noise;
  double bit_flip_rate;
  double distractor_rate;
  size_t query_count;
  size_t min_relevant;
  size_t max_relevant;
  double unseen_fraction;
  double empty_image_fraction;
  uint64_t seed;
} ts_synth_spec;

/* --- general ------------------------------------------------------------ */

TS_API const char* ts_version(void);
TS_API const char* ts_status_name(ts_status status);
/* Message of the most recent failure on this thread ("" if none). */
TS_API const char* ts_last_error(void);
TS_API void ts_free_string(char* s);

/* --- descriptor configuration and encoding ------------------------------ */

TS_API ts_status ts_config_default(ts_config** out);
TS_API ts_status ts_config_parse(const char* text, ts_config** out);
TS_API ts_status ts_config_load(const char* path, ts_config** out);
TS_API ts_status ts_config_to_text(const ts_config* config, char** out);
/* Replaces the bigram list (newline-separated). */
TS_API ts_status ts_config_set_bigrams(ts_config* config, const char* bigrams);
TS_API size_t ts_config_dimension(const ts_config* config);
TS_API uint32_t ts_config_hash(const ts_config* config);
TS_API void ts_config_free(ts_config* config);

TS_API ts_status ts_normalize(const ts_config* config, const char* raw, char** out);
/* Writes ts_config_dimension(config) floats into out. */
TS_API ts_status ts_encode(const ts_config* config, const char* raw, float* out, size_t out_len);
TS_API ts_status ts_derive_bigrams(const ts_config* config, const char* lexicon, size_t count,
                                   char** out);
TS_API ts_status ts_load_lexicon(const ts_config* config, const char* path, char** out);
TS_API ts_status ts_synthetic_lexicon(size_t count, uint64_t seed, char** out);

/* --- geometry ----------------------------------------------------------- */

TS_API double ts_iou(ts_box a, ts_box b);
TS_API double ts_shape_iou(ts_shape a, ts_shape b);
/* Reads `w h` lines or a detection file. Release with ts_free_shapes. */
TS_API ts_status ts_load_box_shapes(const char* path, ts_shape** out, size_t* count);
TS_API ts_status ts_synthetic_text_shapes(size_t count, uint64_t seed, ts_shape** out);
TS_API ts_status ts_select_anchors(const ts_shape* gt, size_t count, double min_iou, size_t max_k,
                                   uint64_t seed, ts_shape** anchors, size_t* k);
TS_API ts_status ts_coverage(const ts_shape* gt, size_t count, const ts_shape* anchors, size_t k,
                             double min_iou, double* out);
TS_API void ts_free_shapes(ts_shape* shapes);
/* Decodes one image's raw grid ([cx][cy][anchor][5 + phoc_dim]). Emitted
 * detections are appended to `sink` when it is not NULL. */
TS_API ts_status ts_decode_grid(const float* raw, size_t raw_len, int input_width,
                                int input_height, int stride, const ts_shape* anchors,
                                size_t n_anchors, int phoc_dim, double threshold,
                                const char* image_id, ts_store* sink, size_t* emitted);

/* --- loss ----------------------------------------------------------------- */

TS_API ts_loss_config ts_loss_config_default(void);
TS_API ts_status ts_l_cls(const float* target, const float* pred, size_t n, double epsilon,
                          double* out);
TS_API ts_status ts_grad_l_cls(const float* target, const float* pred, size_t n, double epsilon,
                               double* grad);
TS_API ts_status ts_total_loss(const double box_target[4], const double box_pred[4],
                               int objectness_target, double objectness_pred,
                               const float* phoc_target, const float* phoc_pred, size_t n,
                               const ts_loss_config* config, double* out);
TS_API ts_status ts_loss_check(size_t pairs, size_t dimension, uint64_t seed,
                               double* max_relative_error);

/* --- descriptor store and index ----------------------------------------- */

TS_API ts_ann_params ts_ann_params_default(void);
TS_API ts_status ts_store_new(const ts_config* config, ts_store** out);
TS_API ts_status ts_store_add(ts_store* store, const char* image_id, const float* phoc,
                              size_t len, float objectness);
TS_API ts_status ts_store_add_detections_file(ts_store* store, const char* path, size_t* added);
TS_API size_t ts_store_size(const ts_store* store);
/* Fails with TS_ERR_SEALED_STORE when called twice. params may be NULL. */
TS_API ts_status ts_store_seal(ts_store* store, ts_backend backend, const ts_ann_params* params,
                               ts_index** out);
TS_API void ts_store_free(ts_store* store);

TS_API ts_status ts_index_save(const ts_index* index, const char* path);
/* expected may be NULL; otherwise a differing layout is TS_ERR_VERSION_MISMATCH. */
TS_API ts_status ts_index_load(const char* path, const ts_config* expected, ts_index** out);
TS_API size_t ts_index_size(const ts_index* index);
TS_API size_t ts_index_image_count(const ts_index* index);
TS_API ts_backend ts_index_backend(const ts_index* index);
TS_API ts_status ts_index_config(const ts_index* index, ts_config** out);
TS_API const char* ts_index_image_id(const ts_index* index, uint32_t image);
/* `out` holds at least k entries; *found receives min(k, size). */
TS_API ts_status ts_index_knn(const ts_index* index, const float* query, size_t len, size_t k,
                              ts_neighbor* out, size_t* found);
TS_API void ts_index_free(ts_index* index);

/* --- retrieval and evaluation -------------------------------------------- */

/* config may be NULL to use the index's own; k_pool 0 picks the default. */
TS_API ts_status ts_query(const ts_index* index, const ts_config* config, const char* text,
                          size_t k_pool, ts_ranked_list** out);
TS_API size_t ts_ranked_list_size(const ts_ranked_list* list);
TS_API int ts_ranked_list_exhaustive(const ts_ranked_list* list);
TS_API const char* ts_ranked_list_image_id(const ts_ranked_list* list, size_t i);
TS_API double ts_ranked_list_score(const ts_ranked_list* list, size_t i);
TS_API void ts_ranked_list_free(ts_ranked_list* list);

TS_API ts_status ts_load_queries(const char* path, char** out);
/* Report JSON (schema "textspot.eval"). queries is newline-separated. */
TS_API ts_status ts_evaluate(const ts_index* index, const ts_config* config, const char* queries,
                             const char* gt_path, size_t k_pool, unsigned threads,
                             char** report_json);
TS_API ts_status ts_bench(const ts_index* index, const ts_config* config, const char* queries,
                          size_t repetitions, size_t k_pool, char** json, char** tsv);

/* --- synthetic corpora --------------------------------------------------- */

TS_API ts_synth_spec ts_synth_spec_default(void);
/* Writes detections, ground truth and query files; summary is JSON. */
TS_API ts_status ts_synth_write(const ts_config* config, const ts_synth_spec* spec,
                                const char* lexicon, const char* detections_path,
                                const char* gt_path, const char* queries_path, char** summary);

#ifdef __cplusplus
}
#endif

#endif /* TEXTSPOT_H */
