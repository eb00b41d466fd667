#ifndef TEXTSPOT_HNSW_HPP
#define TEXTSPOT_HNSW_HPP

// Layered proximity graph (hierarchical navigable small world). The caller
// owns the float vectors; the graph keeps an 8-bit copy scaled to the global
// value range, navigates on it, and re-ranks the final beam with exact float
// distances. Bit-identical vectors share one node so large groups of exact
// duplicates cannot close themselves off from the rest of the graph.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <utility>
#include <vector>

namespace textspot::detail {

class ByteReader;
class ByteWriter;

struct Candidate {
  float distance;
  std::uint32_t id;

  bool operator<(const Candidate& o) const {
    return distance < o.distance || (distance == o.distance && id < o.id);
  }
  bool operator>(const Candidate& o) const { return o < *this; }
};

class HnswGraph {
 public:
  HnswGraph(std::size_t dim, std::size_t m, std::size_t ef_construction, std::uint64_t seed);

  /// Inserts rows 0..count-1 in order.
  void build(const float* data, std::size_t count);

  /// k nearest rows by (squared distance, row); beam width is max(ef, k).
  std::vector<Candidate> search(const float* data, const float* query, std::size_t k,
                                std::size_t ef) const;

  std::size_t size() const { return rep_of_.size(); }
  std::size_t node_count() const { return rows_.size(); }

  void write(ByteWriter& out) const;
  static std::unique_ptr<HnswGraph> read(ByteReader& in, const float* data, std::size_t dim,
                                         std::size_t count, std::size_t m,
                                         std::size_t ef_construction, std::uint64_t seed);

  // Internal beam entries: integer distance between codes, node id.
  struct Near {
    std::uint32_t distance;
    std::uint32_t id;

    bool operator<(const Near& o) const {
      return distance < o.distance || (distance == o.distance && id < o.id);
    }
    bool operator>(const Near& o) const { return o < *this; }
  };

 private:
  struct VisitedList {
    std::vector<std::uint32_t> marks;
    std::uint32_t epoch = 0;

    void reset(std::size_t n);
    bool test_and_set(std::uint32_t id) {
      if (marks[id] == epoch) return true;
      marks[id] = epoch;
      return false;
    }
  };

  const std::uint8_t* code(std::uint32_t node) const {
    return codes_.data() + static_cast<std::size_t>(node) * dim_;
  }
  std::uint32_t distance(const std::uint8_t* a, std::uint32_t node) const;
  void prefetch(std::uint32_t node) const;

  void index_duplicates();
  void quantize(const float* data);
  void encode_query(const float* query, std::uint8_t* out) const;

  std::uint32_t* links(std::uint32_t node, int level);
  const std::uint32_t* links(std::uint32_t node, int level) const;
  std::size_t capacity(int level) const { return level == 0 ? max_m0_ : max_m_; }

  void insert(std::uint32_t node, VisitedList& visited);

  std::vector<Near> search_layer(const std::uint8_t* query, const std::vector<Near>& entry,
                                 std::size_t ef, int level, VisitedList& visited) const;

  Near greedy_descend(const std::uint8_t* query, Near cur, int from_level, int to_level) const;

  std::vector<Near> select_neighbors(std::vector<Near> candidates, std::size_t m) const;

  void connect(std::uint32_t node, std::uint32_t neighbor, int level);

  std::unique_ptr<VisitedList> acquire_visited() const;
  void release_visited(std::unique_ptr<VisitedList> list) const;

  std::size_t dim_;
  std::size_t m_;
  std::size_t max_m_;
  std::size_t max_m0_;
  std::size_t ef_construction_;
  double level_mult_;
  std::mt19937_64 rng_;

  // Row -> first row holding the same vector; nodes are the rows that are
  // their own representative.
  std::vector<std::uint32_t> rep_of_;
  std::vector<std::uint32_t> rows_;
  std::vector<std::uint32_t> dup_offsets_;
  std::vector<std::uint32_t> dup_rows_;

  float lo_ = 0.0f;
  float scale_ = 0.0f;
  std::vector<std::uint8_t> codes_;

  std::vector<std::uint8_t> levels_;
  // Level-0 adjacency: per node, a count followed by max_m0_ slots.
  std::vector<std::uint32_t> level0_;
  // Levels >= 1: per node, `level` blocks of (count + max_m_ slots).
  std::vector<std::vector<std::uint32_t>> upper_;
  std::uint32_t entry_ = 0;
  int max_level_ = -1;

  mutable std::mutex pool_mutex_;
  mutable std::vector<std::unique_ptr<VisitedList>> pool_;
};

}  // namespace textspot::detail

#endif  // TEXTSPOT_HNSW_HPP
