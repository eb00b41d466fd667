#ifndef TEXTSPOT_EVALKIT_HPP
#define TEXTSPOT_EVALKIT_HPP

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "textspot/retrieval.hpp"

namespace textspot {

/// Query word (normalized) -> relevant image ids.
struct GroundTruth {
  std::map<std::string, std::set<std::string>> relevant;

  const std::set<std::string>* find(const std::string& normalized_query) const;
};

/// Tab-separated: `query<TAB>id<TAB>id...`, one query per line.
GroundTruth load_ground_truth(const std::string& path, const PhocConfig& config);
void save_ground_truth(const GroundTruth& gt, const std::string& path);

/// Non-interpolated AP: mean over the R relevant ids of precision at the
/// rank where each is retrieved; unretrieved ids contribute zero.
double average_precision(const RankedList& ranked, const std::set<std::string>& relevant);

/// Relevant ids among the first n items, divided by n (always n).
double precision_at_n(const RankedList& ranked, const std::set<std::string>& relevant,
                      std::size_t n);

struct QueryEvaluation {
  std::string query;
  std::size_t relevant_count = 0;
  double average_precision = 0.0;
  double precision_at_10 = 0.0;
  double precision_at_20 = 0.0;
  double latency_seconds = 0.0;
};

struct EvalReport {
  static constexpr int kSchemaVersion = 1;

  std::vector<QueryEvaluation> per_query;
  double mean_average_precision = 0.0;
  double mean_latency_seconds = 0.0;
  std::size_t descriptor_count = 0;
  std::size_t image_count = 0;
  std::string backend;
  std::vector<std::string> warnings;

  std::string to_json() const;
};

/// Runs every query; mAP is the unweighted mean over queries present in the
/// ground truth. Missing queries are reported as warnings.
EvalReport evaluate(std::span<const std::string> queries, const Index& index,
                    const GroundTruth& gt, const PhocConfig& config,
                    const RetrievalParams& params = {}, unsigned threads = 1);

struct LatencyStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
};

struct BenchReport {
  std::string backend;
  std::size_t descriptor_count = 0;
  std::size_t queries = 0;
  std::size_t repetitions = 0;
  LatencyStats encode;
  LatencyStats search;
  LatencyStats aggregate;
  LatencyStats total;

  std::string to_json() const;
  /// `metric<TAB>mean<TAB>median<TAB>p95` rows.
  std::string to_tsv() const;
};

LatencyStats summarize_latencies(std::vector<double> samples);

/// Times each phase of `query` over every query, `repetitions` times.
/// Throws kEmptyQueryList.
BenchReport bench(const Index& index, std::span<const std::string> queries,
                  const PhocConfig& config, std::size_t repetitions,
                  const RetrievalParams& params = {});

}  // namespace textspot

#endif  // TEXTSPOT_EVALKIT_HPP
