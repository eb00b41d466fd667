#include "textspot/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "textspot/error.hpp"

namespace textspot {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

nlohmann::json stats_json(const LatencyStats& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"p95", s.p95}};
}

}  // namespace

const std::set<std::string>* GroundTruth::find(const std::string& normalized_query) const {
  auto it = relevant.find(normalized_query);
  return it == relevant.end() ? nullptr : &it->second;
}

GroundTruth load_ground_truth(const std::string& path, const PhocConfig& config) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open '" + path + "'");
  GroundTruth gt;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    const std::string key = normalize_or_empty(fields[0], config);
    if (key.empty()) throw ParseError(line_no, "query has no alphabet characters");
    auto& ids = gt.relevant[key];
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (!fields[i].empty()) ids.insert(fields[i]);
    }
    if (ids.empty()) throw ParseError(line_no, "query '" + key + "' has no relevant images");
  }
  return gt;
}

void save_ground_truth(const GroundTruth& gt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open '" + path + "' for writing");
  for (const auto& [query, ids] : gt.relevant) {
    out << query;
    for (const auto& id : ids) out << '\t' << id;
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoFailure, "write to '" + path + "' failed");
}

double average_precision(const RankedList& ranked, const std::set<std::string>& relevant) {
  if (relevant.empty()) throw Error(ErrorCode::kEmptyRelevantSet, "no relevant images");
  std::size_t found = 0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < ranked.items.size() && found < relevant.size(); ++rank) {
    if (relevant.count(ranked.items[rank].image_id)) {
      ++found;
      sum += static_cast<double>(found) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

double precision_at_n(const RankedList& ranked, const std::set<std::string>& relevant,
                      std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
  const std::size_t limit = std::min(n, ranked.items.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < limit; ++i) hits += relevant.count(ranked.items[i].image_id);
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["schema"] = "textspot.eval";
  j["schema_version"] = kSchemaVersion;
  j["backend"] = backend;
  j["descriptor_count"] = descriptor_count;
  j["image_count"] = image_count;
  j["mAP"] = mean_average_precision;
  j["mean_query_latency_seconds"] = mean_latency_seconds;
  j["per_query"] = nlohmann::json::array();
  for (const auto& q : per_query) {
    j["per_query"].push_back({{"query", q.query},
                              {"relevant", q.relevant_count},
                              {"AP", q.average_precision},
                              {"P@10", q.precision_at_10},
                              {"P@20", q.precision_at_20},
                              {"latency_seconds", q.latency_seconds}});
  }
  j["warnings"] = warnings;
  return j.dump(2);
}

EvalReport evaluate(std::span<const std::string> queries, const Index& index,
                    const GroundTruth& gt, const PhocConfig& config,
                    const RetrievalParams& params, unsigned threads) {
  EvalReport report;
  report.backend = backend_name(index.backend());
  report.descriptor_count = index.size();
  report.image_count = index.image_count();

  struct Job {
    std::string query;
    const std::set<std::string>* relevant;
  };
  std::vector<Job> jobs;
  for (const auto& q : queries) {
    const NormalizedWord word = normalize_word(q, config);
    const auto* relevant = gt.find(word.chars);
    if (relevant == nullptr) {
      report.warnings.push_back("query '" + q + "' has no ground truth; skipped");
      continue;
    }
    jobs.push_back({q, relevant});
  }

  report.per_query.resize(jobs.size());
  auto run = [&](std::size_t i) {
    const auto start = Clock::now();
    const RankedList ranked = query(jobs[i].query, index, config, params);
    const double latency = std::chrono::duration<double>(Clock::now() - start).count();
    auto& out = report.per_query[i];
    out.query = jobs[i].query;
    out.relevant_count = jobs[i].relevant->size();
    out.average_precision = average_precision(ranked, *jobs[i].relevant);
    out.precision_at_10 = precision_at_n(ranked, *jobs[i].relevant, 10);
    out.precision_at_20 = precision_at_n(ranked, *jobs[i].relevant, 20);
    out.latency_seconds = latency;
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run(i);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < jobs.size(); i += workers) run(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  if (!report.per_query.empty()) {
    double ap_sum = 0.0;
    double latency_sum = 0.0;
    for (const auto& q : report.per_query) {
      ap_sum += q.average_precision;
      latency_sum += q.latency_seconds;
    }
    const auto n = static_cast<double>(report.per_query.size());
    report.mean_average_precision = ap_sum / n;
    report.mean_latency_seconds = latency_sum / n;
  }
  return report;
}

LatencyStats summarize_latencies(std::vector<double> samples) {
  LatencyStats stats;
  if (samples.empty()) return stats;
  std::sort(samples.begin(), samples.end());
  double sum = 0.0;
  for (double s : samples) sum += s;
  stats.mean = sum / static_cast<double>(samples.size());
  const std::size_t n = samples.size();
  stats.median = n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  stats.p95 = samples[std::max<std::size_t>(rank, 1) - 1];
  return stats;
}

BenchReport bench(const Index& index, std::span<const std::string> queries,
                  const PhocConfig& config, std::size_t repetitions,
                  const RetrievalParams& params) {
  if (queries.empty()) throw Error(ErrorCode::kEmptyQueryList, "no queries to benchmark");
  if (repetitions == 0) throw Error(ErrorCode::kInvalidArgument, "repetitions must be >= 1");
  std::vector<double> encode, search, aggregate, total;
  for (std::size_t r = 0; r < repetitions; ++r) {
    for (const auto& q : queries) {
      QueryTiming timing;
      const auto start = Clock::now();
      query(q, index, config, params, &timing);
      total.push_back(std::chrono::duration<double>(Clock::now() - start).count());
      encode.push_back(timing.encode_seconds);
      search.push_back(timing.search_seconds);
      aggregate.push_back(timing.aggregate_seconds);
    }
  }
  BenchReport report;
  report.backend = backend_name(index.backend());
  report.descriptor_count = index.size();
  report.queries = queries.size();
  report.repetitions = repetitions;
  report.encode = summarize_latencies(std::move(encode));
  report.search = summarize_latencies(std::move(search));
  report.aggregate = summarize_latencies(std::move(aggregate));
  report.total = summarize_latencies(std::move(total));
  return report;
}

std::string BenchReport::to_json() const {
  nlohmann::json j;
  j["schema"] = "textspot.bench";
  j["schema_version"] = 1;
  j["backend"] = backend;
  j["descriptor_count"] = descriptor_count;
  j["queries"] = queries;
  j["repetitions"] = repetitions;
  j["encode_seconds"] = stats_json(encode);
  j["search_seconds"] = stats_json(search);
  j["aggregate_seconds"] = stats_json(aggregate);
  j["total_seconds"] = stats_json(total);
  return j.dump(2);
}

std::string BenchReport::to_tsv() const {
  std::ostringstream out;
  out.precision(9);
  out << "metric\tmean\tmedian\tp95\n";
  auto row = [&](const char* name, const LatencyStats& s) {
    out << name << '\t' << s.mean << '\t' << s.median << '\t' << s.p95 << '\n';
  };
  row("encode_seconds", encode);
  row("search_seconds", search);
  row("aggregate_seconds", aggregate);
  row("total_seconds", total);
  return out.str();
}

}  // namespace textspot
