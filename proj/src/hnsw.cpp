#include "hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string_view>
#include <unordered_map>

#include "binary_io.hpp"
#include "textspot/distance.hpp"
#include "textspot/error.hpp"

namespace textspot::detail {

namespace {

constexpr int kMaxLevel = 32;

using Near = HnswGraph::Near;
using MinQueue = std::priority_queue<Near, std::vector<Near>, std::greater<>>;
using MaxQueue = std::priority_queue<Near, std::vector<Near>, std::less<>>;

}  // namespace

void HnswGraph::VisitedList::reset(std::size_t n) {
  if (marks.size() != n) {
    marks.assign(n, 0);
    epoch = 0;
  }
  ++epoch;
  if (epoch == 0) {
    std::fill(marks.begin(), marks.end(), 0);
    epoch = 1;
  }
}

HnswGraph::HnswGraph(std::size_t dim, std::size_t m, std::size_t ef_construction,
                     std::uint64_t seed)
    : dim_(dim),
      m_(m),
      max_m_(m),
      max_m0_(2 * m),
      ef_construction_(std::max(ef_construction, m)),
      level_mult_(m > 1 ? 1.0 / std::log(static_cast<double>(m)) : 1.0),
      rng_(seed) {}

std::uint32_t HnswGraph::distance(const std::uint8_t* a, std::uint32_t node) const {
  const std::uint8_t* b = code(node);
  std::uint32_t acc = 0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
    acc += static_cast<std::uint32_t>(d * d);
  }
  return acc;
}

void HnswGraph::prefetch(std::uint32_t node) const {
  const char* p = reinterpret_cast<const char*>(code(node));
  const char* end = p + dim_;
  for (; p < end; p += 64) __builtin_prefetch(p);
}

std::uint32_t* HnswGraph::links(std::uint32_t node, int level) {
  if (level == 0) return level0_.data() + static_cast<std::size_t>(node) * (max_m0_ + 1);
  return upper_[node].data() + static_cast<std::size_t>(level - 1) * (max_m_ + 1);
}

const std::uint32_t* HnswGraph::links(std::uint32_t node, int level) const {
  if (level == 0) return level0_.data() + static_cast<std::size_t>(node) * (max_m0_ + 1);
  return upper_[node].data() + static_cast<std::size_t>(level - 1) * (max_m_ + 1);
}

std::unique_ptr<HnswGraph::VisitedList> HnswGraph::acquire_visited() const {
  std::unique_ptr<VisitedList> list;
  {
    std::lock_guard<std::mutex> lock(pool_mutex_);
    if (!pool_.empty()) {
      list = std::move(pool_.back());
      pool_.pop_back();
    }
  }
  if (!list) list = std::make_unique<VisitedList>();
  list->reset(levels_.size());
  return list;
}

void HnswGraph::release_visited(std::unique_ptr<VisitedList> list) const {
  std::lock_guard<std::mutex> lock(pool_mutex_);
  pool_.push_back(std::move(list));
}

void HnswGraph::index_duplicates() {
  rows_.clear();
  std::vector<std::uint32_t> node_of(rep_of_.size());
  std::vector<std::uint32_t> dup_count;
  for (std::uint32_t row = 0; row < rep_of_.size(); ++row) {
    if (rep_of_[row] == row) {
      node_of[row] = static_cast<std::uint32_t>(rows_.size());
      rows_.push_back(row);
      dup_count.push_back(0);
    } else {
      ++dup_count[node_of[rep_of_[row]]];
    }
  }
  dup_offsets_.assign(rows_.size() + 1, 0);
  for (std::size_t n = 0; n < rows_.size(); ++n) {
    dup_offsets_[n + 1] = dup_offsets_[n] + dup_count[n];
  }
  dup_rows_.assign(dup_offsets_.back(), 0);
  std::vector<std::uint32_t> fill(dup_offsets_.begin(), dup_offsets_.end() - 1);
  for (std::uint32_t row = 0; row < rep_of_.size(); ++row) {
    if (rep_of_[row] != row) dup_rows_[fill[node_of[rep_of_[row]]]++] = row;
  }
}

void HnswGraph::encode_query(const float* v, std::uint8_t* out) const {
  for (std::size_t i = 0; i < dim_; ++i) {
    const float q = std::round((v[i] - lo_) * scale_);
    out[i] = static_cast<std::uint8_t>(std::clamp(q, 0.0f, 255.0f));
  }
}

void HnswGraph::quantize(const float* data) {
  float lo = 0.0f;
  float hi = 0.0f;
  bool first = true;
  for (std::uint32_t row : rows_) {
    const float* v = data + static_cast<std::size_t>(row) * dim_;
    for (std::size_t i = 0; i < dim_; ++i) {
      if (first) {
        lo = hi = v[i];
        first = false;
      }
      lo = std::min(lo, v[i]);
      hi = std::max(hi, v[i]);
    }
  }
  lo_ = lo;
  scale_ = hi > lo ? 255.0f / (hi - lo) : 0.0f;
  codes_.assign(rows_.size() * dim_, 0);
  for (std::size_t n = 0; n < rows_.size(); ++n) {
    encode_query(data + static_cast<std::size_t>(rows_[n]) * dim_, codes_.data() + n * dim_);
  }
}

void HnswGraph::build(const float* data, std::size_t count) {
  rep_of_.resize(count);
  {
    const std::size_t bytes = dim_ * sizeof(float);
    std::unordered_map<std::string_view, std::uint32_t> first;
    first.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::string_view key(reinterpret_cast<const char*>(data + i * dim_), bytes);
      rep_of_[i] = first.try_emplace(key, static_cast<std::uint32_t>(i)).first->second;
    }
  }
  index_duplicates();
  quantize(data);

  const std::size_t nodes = rows_.size();
  levels_.assign(nodes, 0);
  level0_.assign(nodes * (max_m0_ + 1), 0);
  upper_.assign(nodes, {});
  entry_ = 0;
  max_level_ = -1;
  VisitedList visited;
  for (std::size_t i = 0; i < nodes; ++i) {
    visited.reset(nodes);
    insert(static_cast<std::uint32_t>(i), visited);
  }
}

Near HnswGraph::greedy_descend(const std::uint8_t* query, Near cur, int from_level,
                               int to_level) const {
  for (int level = from_level; level >= to_level; --level) {
    bool changed = true;
    while (changed) {
      changed = false;
      const std::uint32_t* list = links(cur.id, level);
      for (std::uint32_t i = 1; i <= list[0]; ++i) prefetch(list[i]);
      for (std::uint32_t i = 1; i <= list[0]; ++i) {
        const Near c{distance(query, list[i]), list[i]};
        if (c < cur) {
          cur = c;
          changed = true;
        }
      }
    }
  }
  return cur;
}

std::vector<Near> HnswGraph::search_layer(const std::uint8_t* query,
                                          const std::vector<Near>& entry, std::size_t ef,
                                          int level, VisitedList& visited) const {
  MinQueue candidates;
  MaxQueue results;
  std::vector<std::uint32_t> fresh(max_m0_);
  for (const auto& e : entry) {
    if (visited.test_and_set(e.id)) continue;
    candidates.push(e);
    results.push(e);
    if (results.size() > ef) results.pop();
  }
  while (!candidates.empty()) {
    const Near c = candidates.top();
    if (results.size() >= ef && results.top() < c) break;
    candidates.pop();
    const std::uint32_t* list = links(c.id, level);
    std::size_t fresh_count = 0;
    for (std::uint32_t i = 1; i <= list[0]; ++i) {
      if (!visited.test_and_set(list[i])) fresh[fresh_count++] = list[i];
    }
    for (std::size_t i = 0; i < fresh_count; ++i) prefetch(fresh[i]);
    for (std::size_t i = 0; i < fresh_count; ++i) {
      const Near n{distance(query, fresh[i]), fresh[i]};
      if (results.size() < ef || n < results.top()) {
        candidates.push(n);
        results.push(n);
        if (results.size() > ef) results.pop();
      }
    }
  }
  std::vector<Near> out(results.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = results.top();
    results.pop();
  }
  return out;
}

std::vector<Near> HnswGraph::select_neighbors(std::vector<Near> candidates, std::size_t m) const {
  std::sort(candidates.begin(), candidates.end());
  if (candidates.size() <= m) return candidates;
  std::vector<Near> selected;
  selected.reserve(m);
  for (const auto& c : candidates) {
    if (selected.size() >= m) break;
    const std::uint8_t* cv = code(c.id);
    bool keep = true;
    for (const auto& s : selected) {
      if (distance(cv, s.id) < c.distance) {
        keep = false;
        break;
      }
    }
    if (keep) selected.push_back(c);
  }
  return selected;
}

void HnswGraph::connect(std::uint32_t node, std::uint32_t neighbor, int level) {
  std::uint32_t* list = links(node, level);
  const std::size_t cap = capacity(level);
  for (std::uint32_t i = 1; i <= list[0]; ++i) {
    if (list[i] == neighbor) return;
  }
  if (list[0] < cap) {
    list[++list[0]] = neighbor;
    return;
  }
  const std::uint8_t* nv = code(node);
  std::vector<Near> pool;
  pool.reserve(cap + 1);
  for (std::uint32_t i = 1; i <= list[0]; ++i) pool.push_back({distance(nv, list[i]), list[i]});
  pool.push_back({distance(nv, neighbor), neighbor});
  const auto kept = select_neighbors(std::move(pool), cap);
  list[0] = static_cast<std::uint32_t>(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) list[i + 1] = kept[i].id;
}

void HnswGraph::insert(std::uint32_t node, VisitedList& visited) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = 1.0 - unit(rng_);  // (0, 1]
  const int level =
      std::min(kMaxLevel, static_cast<int>(std::floor(-std::log(u) * level_mult_)));
  levels_[node] = static_cast<std::uint8_t>(level);
  if (level > 0) upper_[node].assign(static_cast<std::size_t>(level) * (max_m_ + 1), 0);

  if (max_level_ < 0) {
    entry_ = node;
    max_level_ = level;
    return;
  }

  const std::uint8_t* q = code(node);
  Near cur{distance(q, entry_), entry_};
  if (level < max_level_) cur = greedy_descend(q, cur, max_level_, level + 1);

  std::vector<Near> entry_points{cur};
  for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
    auto found = search_layer(q, entry_points, ef_construction_, lc, visited);
    visited.reset(levels_.size());
    const auto neighbors = select_neighbors(found, m_);
    std::uint32_t* list = links(node, lc);
    list[0] = static_cast<std::uint32_t>(neighbors.size());
    for (std::size_t i = 0; i < neighbors.size(); ++i) list[i + 1] = neighbors[i].id;
    for (const auto& nb : neighbors) connect(nb.id, node, lc);
    entry_points = std::move(found);
  }
  if (level > max_level_) {
    entry_ = node;
    max_level_ = level;
  }
}

std::vector<Candidate> HnswGraph::search(const float* data, const float* query, std::size_t k,
                                         std::size_t ef) const {
  if (levels_.empty() || k == 0) return {};
  std::vector<std::uint8_t> q(dim_);
  encode_query(query, q.data());
  Near cur{distance(q.data(), entry_), entry_};
  cur = greedy_descend(q.data(), cur, max_level_, 1);
  auto visited = acquire_visited();
  const auto found = search_layer(q.data(), {cur}, std::max(ef, k), 0, *visited);
  release_visited(std::move(visited));

  std::vector<Candidate> nodes;
  nodes.reserve(found.size());
  for (const auto& c : found) {
    nodes.push_back(
        {squared_l2(query, data + static_cast<std::size_t>(rows_[c.id]) * dim_, dim_), c.id});
  }
  std::sort(nodes.begin(), nodes.end(), [this](const Candidate& a, const Candidate& b) {
    return a.distance < b.distance || (a.distance == b.distance && rows_[a.id] < rows_[b.id]);
  });

  std::vector<Candidate> out;
  out.reserve(k);
  for (const auto& c : nodes) {
    if (out.size() >= k) break;
    out.push_back({c.distance, rows_[c.id]});
    for (std::uint32_t i = dup_offsets_[c.id]; i < dup_offsets_[c.id + 1]; ++i) {
      out.push_back({c.distance, dup_rows_[i]});
    }
  }
  std::sort(out.begin(), out.end());
  if (out.size() > k) out.resize(k);
  return out;
}

void HnswGraph::write(ByteWriter& out) const {
  out.array(rep_of_);
  out.scalar(entry_);
  out.scalar(static_cast<std::int32_t>(max_level_));
  out.array(levels_);
  out.array(level0_);
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (levels_[i] > 0) out.array(upper_[i]);
  }
}

std::unique_ptr<HnswGraph> HnswGraph::read(ByteReader& in, const float* data, std::size_t dim,
                                           std::size_t count, std::size_t m,
                                           std::size_t ef_construction, std::uint64_t seed) {
  auto graph = std::make_unique<HnswGraph>(dim, m, ef_construction, seed);
  graph->rep_of_ = in.array<std::uint32_t>(count);
  for (std::size_t row = 0; row < count; ++row) {
    const std::uint32_t rep = graph->rep_of_[row];
    if (rep > row || graph->rep_of_[rep] != rep) in.corrupt("bad duplicate table");
  }
  graph->index_duplicates();
  const std::size_t nodes = graph->rows_.size();
  graph->entry_ = in.scalar<std::uint32_t>();
  graph->max_level_ = in.scalar<std::int32_t>();
  graph->levels_ = in.array<std::uint8_t>(nodes);
  graph->level0_ = in.array<std::uint32_t>(nodes * (graph->max_m0_ + 1));
  graph->upper_.assign(nodes, {});
  for (std::size_t i = 0; i < nodes; ++i) {
    const int level = graph->levels_[i];
    if (level > kMaxLevel) in.corrupt("graph level out of range");
    if (level > 0) {
      graph->upper_[i] =
          in.array<std::uint32_t>(static_cast<std::size_t>(level) * (graph->max_m_ + 1));
    }
  }
  if (nodes > 0) {
    if (graph->entry_ >= nodes || graph->max_level_ != graph->levels_[graph->entry_]) {
      in.corrupt("bad graph entry point");
    }
  }
  for (std::uint32_t node = 0; node < nodes; ++node) {
    for (int level = 0; level <= graph->levels_[node]; ++level) {
      const std::uint32_t* list = graph->links(node, level);
      if (list[0] > graph->capacity(level)) in.corrupt("graph adjacency overflow");
      for (std::uint32_t i = 1; i <= list[0]; ++i) {
        if (list[i] >= nodes || graph->levels_[list[i]] < level) {
          in.corrupt("graph link out of range");
        }
      }
    }
  }
  graph->quantize(data);
  return graph;
}

}  // namespace textspot::detail
