// textspot: command-line front end over the textspot C API.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "textspot/textspot.h"

using nlohmann::json;

namespace {

struct DomainError {
  ts_status status;
  std::string message;
};

struct UsageError {
  std::string message;
};

void check(ts_status status) {
  if (status != TS_OK) throw DomainError{status, ts_last_error()};
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { ts_free_string(p); }
  std::string str() const { return p != nullptr ? std::string(p) : std::string(); }
};

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::string join_lines(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += s + "\n";
  return out;
}

struct ConfigPtr {
  ts_config* p = nullptr;
  ~ConfigPtr() { ts_config_free(p); }
};
struct StorePtr {
  ts_store* p = nullptr;
  ~StorePtr() { ts_store_free(p); }
};
struct IndexPtr {
  ts_index* p = nullptr;
  ~IndexPtr() { ts_index_free(p); }
};
struct ListPtr {
  ts_ranked_list* p = nullptr;
  ~ListPtr() { ts_ranked_list_free(p); }
};
struct ShapesPtr {
  ts_shape* p = nullptr;
  ~ShapesPtr() { ts_free_shapes(p); }
};

struct Globals {
  std::string output = "json";
  unsigned threads = 1;
  std::string config_path;
};

void load_config(const Globals& g, ConfigPtr& config) {
  if (g.config_path.empty()) {
    check(ts_config_default(&config.p));
  } else {
    check(ts_config_load(g.config_path.c_str(), &config.p));
  }
}

void emit(const Globals& g, const json& j, const std::string& tsv) {
  if (g.output == "tsv") {
    std::cout << tsv;
    if (!tsv.empty() && tsv.back() != '\n') std::cout << '\n';
  } else {
    std::cout << j.dump(2) << '\n';
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DomainError{TS_ERR_IO, "cannot write '" + path + "'"};
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// --- encode ----------------------------------------------------------------

struct EncodeArgs {
  std::string word;
};

void run_encode(const Globals& g, const EncodeArgs& a) {
  ConfigPtr config;
  load_config(g, config);
  OwnedString normalized;
  check(ts_normalize(config.p, a.word.c_str(), &normalized.p));
  std::vector<float> vec(ts_config_dimension(config.p));
  check(ts_encode(config.p, a.word.c_str(), vec.data(), vec.size()));

  std::vector<std::size_t> bits;
  std::string binary;
  for (std::size_t i = 0; i < vec.size(); ++i) {
    binary += vec[i] != 0.0f ? '1' : '0';
    if (vec[i] != 0.0f) bits.push_back(i);
  }
  json j{{"word", a.word},           {"normalized", normalized.str()},
         {"dimension", vec.size()},  {"set_bits", bits.size()},
         {"set_indices", bits},      {"vector", binary}};
  std::string tsv = a.word + "\t" + normalized.str() + "\t" + std::to_string(vec.size()) + "\t" +
                    std::to_string(bits.size()) + "\t" + binary + "\n";
  emit(g, j, tsv);
}

// --- bigrams ---------------------------------------------------------------

struct BigramArgs {
  std::string lexicon;
  std::size_t synthetic = 0;
  std::size_t count = 50;
  std::uint64_t seed = 0;
};

void run_bigrams(const Globals& g, const BigramArgs& a) {
  if (a.lexicon.empty() == (a.synthetic == 0)) {
    throw UsageError{"give exactly one of --lexicon or --synthetic"};
  }
  ConfigPtr config;
  load_config(g, config);
  OwnedString words;
  if (!a.lexicon.empty()) {
    check(ts_load_lexicon(config.p, a.lexicon.c_str(), &words.p));
  } else {
    check(ts_synthetic_lexicon(a.synthetic, a.seed, &words.p));
  }
  OwnedString bigrams;
  check(ts_derive_bigrams(config.p, words.p, a.count, &bigrams.p));
  const auto list = split_lines(bigrams.str());
  json j{{"count", list.size()}, {"bigrams", list}};
  if (a.synthetic) j["seed"] = a.seed;
  emit(g, j, join_lines(list));
}

// --- anchors ---------------------------------------------------------------

struct AnchorArgs {
  std::string boxes;
  std::size_t synthetic = 0;
  double min_iou = 0.6;
  std::size_t max_k = 32;
  std::uint64_t seed = 0;
};

void run_anchors(const Globals& g, const AnchorArgs& a) {
  if (a.boxes.empty() == (a.synthetic == 0)) {
    throw UsageError{"give exactly one of --boxes or --synthetic"};
  }
  ShapesPtr gt;
  std::size_t n = a.synthetic;
  if (!a.boxes.empty()) {
    check(ts_load_box_shapes(a.boxes.c_str(), &gt.p, &n));
  } else {
    check(ts_synthetic_text_shapes(n, a.seed, &gt.p));
  }
  ShapesPtr anchors;
  std::size_t k = 0;
  check(ts_select_anchors(gt.p, n, a.min_iou, a.max_k, a.seed, &anchors.p, &k));
  double cov = 0.0;
  check(ts_coverage(gt.p, n, anchors.p, k, a.min_iou, &cov));

  json list = json::array();
  std::string tsv;
  for (std::size_t i = 0; i < k; ++i) {
    list.push_back({anchors.p[i].w, anchors.p[i].h});
    tsv += fmt_double(anchors.p[i].w) + "\t" + fmt_double(anchors.p[i].h) + "\n";
  }
  json j{{"boxes", n},        {"k", k},       {"min_iou", a.min_iou},
         {"coverage", cov},   {"seed", a.seed}, {"anchors", list}};
  emit(g, j, tsv);
}

// --- loss-check ------------------------------------------------------------

struct LossArgs {
  std::size_t pairs = 100;
  std::size_t dimension = 604;
  std::uint64_t seed = 0;
  double tolerance = 1e-5;
};

int run_loss_check(const Globals& g, const LossArgs& a) {
  double err = 0.0;
  check(ts_loss_check(a.pairs, a.dimension, a.seed, &err));
  const bool ok = err <= a.tolerance;
  json j{{"pairs", a.pairs},     {"dimension", a.dimension}, {"seed", a.seed},
         {"max_relative_error", err}, {"tolerance", a.tolerance}, {"pass", ok}};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", err);
  emit(g, j, std::string("max_relative_error\t") + buf + "\t" + (ok ? "PASS" : "FAIL") + "\n");
  return ok ? 0 : 1;
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  ts_synth_spec spec = ts_synth_spec_default();
  std::string lexicon;
  std::size_t lexicon_size = 20000;
  std::string out_dets;
  std::string out_gt;
  std::string out_queries;
};

void run_synth(const Globals& g, const SynthArgs& a) {
  ConfigPtr config;
  load_config(g, config);
  OwnedString words;
  if (!a.lexicon.empty()) {
    check(ts_load_lexicon(config.p, a.lexicon.c_str(), &words.p));
  } else {
    check(ts_synthetic_lexicon(a.lexicon_size, a.spec.seed, &words.p));
  }
  OwnedString summary;
  check(ts_synth_write(config.p, &a.spec, words.p, a.out_dets.c_str(), a.out_gt.c_str(),
                       a.out_queries.c_str(), &summary.p));
  json j = json::parse(summary.str());
  j["detections"] = a.out_dets;
  j["ground_truth"] = a.out_gt;
  j["queries_file"] = a.out_queries;
  std::string tsv;
  for (auto it = j.begin(); it != j.end(); ++it) {
    tsv += it.key() + "\t" + (it->is_string() ? it->get<std::string>() : it->dump()) + "\n";
  }
  emit(g, j, tsv);
}

// --- index -----------------------------------------------------------------

struct IndexArgs {
  std::string input;
  std::string backend = "exact";
  std::string out;
  ts_ann_params params = ts_ann_params_default();
};

void run_index(const Globals& g, const IndexArgs& a) {
  ConfigPtr config;
  load_config(g, config);
  StorePtr store;
  check(ts_store_new(config.p, &store.p));
  const auto start = std::chrono::steady_clock::now();
  std::size_t added = 0;
  check(ts_store_add_detections_file(store.p, a.input.c_str(), &added));
  IndexPtr index;
  const ts_backend backend = a.backend == "exact" ? TS_BACKEND_EXACT : TS_BACKEND_GRAPH;
  check(ts_store_seal(store.p, backend, &a.params, &index.p));
  check(ts_index_save(index.p, a.out.c_str()));
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json j{{"index", a.out},
         {"backend", backend == TS_BACKEND_EXACT ? "exact" : "graph"},
         {"descriptors", ts_index_size(index.p)},
         {"images", ts_index_image_count(index.p)},
         {"build_seconds", seconds}};
  if (backend == TS_BACKEND_GRAPH) {
    j["m"] = a.params.m;
    j["ef_construction"] = a.params.ef_construction;
    j["ef_search"] = a.params.ef_search;
    j["seed"] = a.params.seed;
  }
  std::string tsv;
  for (auto it = j.begin(); it != j.end(); ++it) {
    tsv += it.key() + "\t" + (it->is_string() ? it->get<std::string>() : it->dump()) + "\n";
  }
  emit(g, j, tsv);
}

// --- query -----------------------------------------------------------------

struct QueryArgs {
  std::string index;
  std::string text;
  std::string queries;
  std::size_t k = 10;
  std::size_t k_pool = 0;
};

void run_query(const Globals& g, const QueryArgs& a) {
  if (a.text.empty() == a.queries.empty()) {
    throw UsageError{"give exactly one of --text or --queries"};
  }
  IndexPtr index;
  check(ts_index_load(a.index.c_str(), nullptr, &index.p));
  std::vector<std::string> texts;
  if (!a.text.empty()) {
    texts.push_back(a.text);
  } else {
    OwnedString list;
    check(ts_load_queries(a.queries.c_str(), &list.p));
    texts = split_lines(list.str());
  }

  json results = json::array();
  std::string tsv;
  for (const auto& text : texts) {
    ListPtr ranked;
    check(ts_query(index.p, nullptr, text.c_str(), a.k_pool, &ranked.p));
    const std::size_t n = std::min(a.k, ts_ranked_list_size(ranked.p));
    json items = json::array();
    for (std::size_t i = 0; i < n; ++i) {
      const char* id = ts_ranked_list_image_id(ranked.p, i);
      const double score = ts_ranked_list_score(ranked.p, i);
      items.push_back({{"rank", i + 1}, {"image_id", id}, {"score", score}});
      tsv += text + "\t" + std::to_string(i + 1) + "\t" + id + "\t" + fmt_double(score) + "\n";
    }
    results.push_back({{"query", text},
                       {"exhaustive", ts_ranked_list_exhaustive(ranked.p) != 0},
                       {"results", items}});
  }
  json j = a.text.empty() ? json{{"queries", results}} : results.front();
  emit(g, j, tsv);
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string index;
  std::string gt;
  std::string queries;
  std::string report;
  std::size_t k_pool = 0;
};

void run_eval(const Globals& g, const EvalArgs& a) {
  IndexPtr index;
  check(ts_index_load(a.index.c_str(), nullptr, &index.p));
  OwnedString list;
  check(ts_load_queries(a.queries.c_str(), &list.p));
  OwnedString report;
  check(ts_evaluate(index.p, nullptr, list.p, a.gt.c_str(), a.k_pool, g.threads, &report.p));
  json j = json::parse(report.str());
  if (!a.report.empty()) write_file(a.report, j.dump(2) + "\n");

  std::string tsv = "query\tAP\tP@10\tP@20\n";
  for (const auto& q : j["per_query"]) {
    tsv += q["query"].get<std::string>() + "\t" + fmt_double(q["AP"].get<double>()) + "\t" +
           fmt_double(q["P@10"].get<double>()) + "\t" + fmt_double(q["P@20"].get<double>()) + "\n";
  }
  tsv += "mAP\t" + fmt_double(j["mAP"].get<double>()) + "\n";
  for (const auto& w : j["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
  emit(g, j, tsv);
}

// --- bench -----------------------------------------------------------------

struct BenchArgs {
  std::string index;
  std::string queries;
  std::size_t repetitions = 3;
  std::size_t k_pool = 0;
  std::string report;
};

void run_bench(const Globals& g, const BenchArgs& a) {
  IndexPtr index;
  check(ts_index_load(a.index.c_str(), nullptr, &index.p));
  OwnedString list;
  check(ts_load_queries(a.queries.c_str(), &list.p));
  OwnedString js;
  OwnedString tsv;
  check(ts_bench(index.p, nullptr, list.p, a.repetitions, a.k_pool, &js.p, &tsv.p));
  json j = json::parse(js.str());
  if (!a.report.empty()) write_file(a.report, j.dump(2) + "\n");
  emit(g, j, tsv.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"textspot: word spotting over dense descriptor stores"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", ts_version());

  Globals g;
  app.add_option("--output", g.output, "Output format")
      ->check(CLI::IsMember({"json", "tsv"}))
      ->capture_default_str();
  app.add_option("--threads", g.threads, "Worker thread cap")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();
  app.add_option("--config", g.config_path, "Descriptor configuration file")
      ->check(CLI::ExistingFile);

  EncodeArgs enc;
  auto* encode = app.add_subcommand("encode", "Encode a word as a binary descriptor");
  encode->add_option("--word", enc.word, "Word to encode")->required();

  BigramArgs bg;
  auto* bigrams = app.add_subcommand("bigrams", "Most frequent bigrams of a lexicon");
  bigrams->add_option("--lexicon", bg.lexicon, "Lexicon file, one word per line")
      ->check(CLI::ExistingFile);
  bigrams->add_option("--synthetic", bg.synthetic, "Use N generated pseudo-words instead");
  bigrams->add_option("--count", bg.count, "Number of bigrams")->capture_default_str();
  bigrams->add_option("--seed", bg.seed, "Seed for --synthetic")->capture_default_str();

  AnchorArgs an;
  auto* anchors = app.add_subcommand("anchors", "Select anchor priors covering box shapes");
  anchors->add_option("--boxes", an.boxes, "`w h` lines or a detection file")
      ->check(CLI::ExistingFile);
  anchors->add_option("--synthetic", an.synthetic, "Use N generated text-shaped boxes");
  anchors->add_option("--min-iou", an.min_iou, "Required shape IoU")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  anchors->add_option("--max-k", an.max_k, "Largest prior set tried")->capture_default_str();
  anchors->add_option("--seed", an.seed, "Seed for sampling and clustering")
      ->capture_default_str();

  LossArgs ls;
  auto* loss = app.add_subcommand("loss-check", "Finite-difference check of the descriptor loss gradient");
  loss->add_option("--pairs", ls.pairs, "Random (target, prediction) pairs")->capture_default_str();
  loss->add_option("--dim", ls.dimension, "Descriptor length")->capture_default_str();
  loss->add_option("--seed", ls.seed, "Random seed")->capture_default_str();
  loss->add_option("--tolerance", ls.tolerance, "Maximum relative error")->capture_default_str();

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic benchmark corpus");
  synth->add_option("--images", sy.spec.image_count, "Images")->capture_default_str();
  synth->add_option("--descriptors", sy.spec.descriptors_per_image, "Descriptors per image")
      ->capture_default_str();
  synth->add_option("--min-words", sy.spec.min_words_per_image, "Fewest words per text image")
      ->capture_default_str();
  synth->add_option("--max-words", sy.spec.max_words_per_image, "Most words per text image")
      ->capture_default_str();
  synth->add_option("--queries", sy.spec.query_count, "Query words")->capture_default_str();
  synth->add_option("--min-relevant", sy.spec.min_relevant, "Fewest images per query")
      ->capture_default_str();
  synth->add_option("--max-relevant", sy.spec.max_relevant, "Most images per query")
      ->capture_default_str();
  synth->add_option("--noise", sy.spec.phoc_noise, "Gaussian noise sigma")->capture_default_str();
  synth->add_option("--flips", sy.spec.bit_flip_rate, "Bit flip probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth->add_option("--distractors", sy.spec.distractor_rate,
                    "Share of filler slots holding other words")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth->add_option("--unseen", sy.spec.unseen_fraction, "Share of queries left out of training words")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth->add_option("--empty", sy.spec.empty_image_fraction, "Share of images without text")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth->add_option("--lexicon", sy.lexicon, "Lexicon file (default: generated words)")
      ->check(CLI::ExistingFile);
  synth->add_option("--lexicon-size", sy.lexicon_size, "Generated lexicon size")
      ->capture_default_str();
  synth->add_option("--seed", sy.spec.seed, "Random seed")->capture_default_str();
  synth->add_option("--out-dets", sy.out_dets, "Detection file to write")->required();
  synth->add_option("--out-gt", sy.out_gt, "Ground-truth file to write")->required();
  synth->add_option("--out-queries", sy.out_queries, "Query file to write")->required();

  IndexArgs ix;
  auto* index = app.add_subcommand("index", "Build and save a descriptor index");
  index->add_option("--input", ix.input, "Detection file")->required()->check(CLI::ExistingFile);
  index->add_option("--backend", ix.backend, "exact or graph")
      ->check(CLI::IsMember({"exact", "graph", "hnsw"}))
      ->capture_default_str();
  index->add_option("--out", ix.out, "Index file to write")->required();
  index->add_option("--m", ix.params.m, "Graph out-degree")->capture_default_str();
  index->add_option("--ef-construction", ix.params.ef_construction, "Build beam width")
      ->capture_default_str();
  index->add_option("--ef-search", ix.params.ef_search, "Search beam width")
      ->capture_default_str();
  index->add_option("--seed", ix.params.seed, "Graph level seed")->capture_default_str();

  QueryArgs qa;
  auto* query = app.add_subcommand("query", "Rank images for a word");
  query->add_option("--index", qa.index, "Index file")->required()->check(CLI::ExistingFile);
  query->add_option("--text", qa.text, "Query word");
  query->add_option("--queries", qa.queries, "Query file for batch mode")
      ->check(CLI::ExistingFile);
  query->add_option("--k", qa.k, "Results shown per query")->capture_default_str();
  query->add_option("--k-pool", qa.k_pool, "Neighbour pool for the graph backend (0 = auto)")
      ->capture_default_str();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Mean average precision against ground truth");
  eval->add_option("--index", ev.index, "Index file")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", ev.gt, "Ground-truth file")->required()->check(CLI::ExistingFile);
  eval->add_option("--queries", ev.queries, "Query file")->required()->check(CLI::ExistingFile);
  eval->add_option("--report", ev.report, "Also write the JSON report here");
  eval->add_option("--k-pool", ev.k_pool, "Neighbour pool for the graph backend (0 = auto)")
      ->capture_default_str();

  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "Per-phase query latency");
  bench->add_option("--index", be.index, "Index file")->required()->check(CLI::ExistingFile);
  bench->add_option("--queries", be.queries, "Query file")->required()->check(CLI::ExistingFile);
  bench->add_option("--repetitions", be.repetitions, "Passes over the query list")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_option("--k-pool", be.k_pool, "Neighbour pool for the graph backend (0 = auto)")
      ->capture_default_str();
  bench->add_option("--report", be.report, "Also write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    int rc = 0;
    if (*encode) run_encode(g, enc);
    else if (*bigrams) run_bigrams(g, bg);
    else if (*anchors) run_anchors(g, an);
    else if (*loss) rc = run_loss_check(g, ls);
    else if (*synth) run_synth(g, sy);
    else if (*index) run_index(g, ix);
    else if (*query) run_query(g, qa);
    else if (*eval) run_eval(g, ev);
    else if (*bench) run_bench(g, be);
    return rc;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.message << "\n"
              << "Run with --help for more information.\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error [" << ts_status_name(e.status) << "]: " << e.message << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
