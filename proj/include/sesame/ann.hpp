#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "sesame/corpus.hpp"
#include "sesame/error.hpp"
#include "sesame/random.hpp"

namespace sesame {

enum class IndexMode { exact, approximate };

inline std::string to_string(IndexMode mode) { return mode == IndexMode::exact ? "exact" : "ann"; }

inline IndexMode parse_index_mode(const std::string& s) {
  if (s == "exact") return IndexMode::exact;
  if (s == "ann" || s == "approximate") return IndexMode::approximate;
  throw UsageError("unknown index mode \"" + s + "\" (expected exact or ann)");
}

struct AnnParams {
  std::size_t max_neighbors = 16;     // M; level 0 keeps 2*M
  std::size_t ef_construction = 200;
  std::size_t ef_search = 100;
};

struct Neighbor {
  std::size_t id;
  double cosine;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Cosine k-NN index. Exact mode scans every stored vector; approximate mode
/// searches a hierarchical navigable small-world graph built single-threaded
/// from a seeded level assignment, so builds are reproducible.
class AnnIndex {
 public:
  AnnIndex(const EmbeddingMatrix& embeddings, IndexMode mode, std::uint64_t seed, AnnParams params = {})
      : mode_(mode), params_(params), count_(embeddings.count), dim_(embeddings.dim) {
    if (count_ == 0) throw DataError("cannot index an empty embedding matrix");
    if (params_.max_neighbors < 2) throw UsageError("ANN neighbor-list size must be >= 2");
    unit_.resize(count_ * dim_);
    for (std::size_t i = 0; i < count_; ++i) {
      const auto row = embeddings.row(i);
      double norm2 = 0.0;
      for (float v : row) {
        if (!std::isfinite(v)) throw NonFiniteError("non-finite embedding value in row " + std::to_string(i));
        norm2 += static_cast<double>(v) * v;
      }
      if (norm2 <= 0.0) throw DataError("zero-norm embedding row " + std::to_string(i) + " has no cosine similarity");
      const double inv = 1.0 / std::sqrt(norm2);
      for (std::size_t c = 0; c < dim_; ++c) unit_[i * dim_ + c] = static_cast<float>(row[c] * inv);
    }
    if (mode_ == IndexMode::approximate) build_hnsw(seed);
  }

  IndexMode mode() const { return mode_; }
  std::size_t size() const { return count_; }
  std::size_t dim() const { return dim_; }

  /// Up to k neighbors sorted by descending cosine (ties by ascending id).
  std::vector<Neighbor> query(std::span<const float> vector, std::size_t k,
                              std::optional<std::size_t> exclude = std::nullopt) const {
    if (k == 0) throw UsageError("knn query needs k >= 1");
    if (vector.size() != dim_) {
      throw DataError("query dimension " + std::to_string(vector.size()) + " does not match index dimension " +
                      std::to_string(dim_));
    }
    const auto q = normalized(vector);
    const std::size_t want = k + (exclude ? 1 : 0);
    std::vector<Neighbor> hits = mode_ == IndexMode::exact ? scan(q, want) : search(q, want);
    if (exclude) std::erase_if(hits, [&](const Neighbor& n) { return n.id == *exclude; });
    if (hits.size() > k) hits.resize(k);
    return hits;
  }

 private:
  struct Candidate {
    double distance;
    std::uint32_t id;
    bool operator<(const Candidate& o) const { return distance < o.distance || (distance == o.distance && id < o.id); }
    bool operator>(const Candidate& o) const { return o < *this; }
  };
  using MaxHeap = std::priority_queue<Candidate>;
  using MinHeap = std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>>;

  std::vector<float> normalized(std::span<const float> v) const {
    double norm2 = 0.0;
    for (float x : v) norm2 += static_cast<double>(x) * x;
    if (!(norm2 > 0.0) || !std::isfinite(norm2)) throw DataError("query vector has zero or non-finite norm");
    const double inv = 1.0 / std::sqrt(norm2);
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] * inv);
    return out;
  }

  double cosine(std::span<const float> q, std::size_t id) const {
    const float* row = unit_.data() + id * dim_;
    double dot = 0.0;
    for (std::size_t c = 0; c < dim_; ++c) dot += static_cast<double>(q[c]) * row[c];
    return dot;
  }

  double distance(std::span<const float> q, std::uint32_t id) const { return 1.0 - cosine(q, id); }

  std::span<const float> stored(std::uint32_t id) const { return {unit_.data() + std::size_t{id} * dim_, dim_}; }

  static void sort_neighbors(std::vector<Neighbor>& hits) {
    std::sort(hits.begin(), hits.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.cosine > b.cosine || (a.cosine == b.cosine && a.id < b.id);
    });
  }

  std::vector<Neighbor> scan(std::span<const float> q, std::size_t k) const {
    std::vector<Neighbor> all(count_);
    for (std::size_t i = 0; i < count_; ++i) all[i] = {i, cosine(q, i)};
    const std::size_t keep = std::min(k, count_);
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                      [](const Neighbor& a, const Neighbor& b) {
                        return a.cosine > b.cosine || (a.cosine == b.cosine && a.id < b.id);
                      });
    all.resize(keep);
    return all;
  }

  std::size_t max_links(std::size_t level) const {
    return level == 0 ? 2 * params_.max_neighbors : params_.max_neighbors;
  }

  std::uint32_t greedy_descend(std::span<const float> q, std::uint32_t entry, std::size_t from_level,
                               std::size_t to_level) const {
    std::uint32_t current = entry;
    double best = distance(q, current);
    for (std::size_t level = from_level; level > to_level; --level) {
      bool improved = true;
      while (improved) {
        improved = false;
        for (std::uint32_t nb : links_[current][level]) {
          const double d = distance(q, nb);
          if (d < best || (d == best && nb < current)) {
            best = d;
            current = nb;
            improved = true;
          }
        }
      }
    }
    return current;
  }

  // Returns up to ef nearest candidates on one layer, sorted ascending by distance.
  std::vector<Candidate> search_layer(std::span<const float> q, std::uint32_t entry, std::size_t ef,
                                      std::size_t level) const {
    std::unordered_set<std::uint32_t> visited{entry};
    MinHeap frontier;
    MaxHeap best;
    const Candidate start{distance(q, entry), entry};
    frontier.push(start);
    best.push(start);
    while (!frontier.empty()) {
      const Candidate c = frontier.top();
      frontier.pop();
      if (c.distance > best.top().distance && best.size() >= ef) break;
      for (std::uint32_t nb : links_[c.id][level]) {
        if (!visited.insert(nb).second) continue;
        const Candidate cand{distance(q, nb), nb};
        if (best.size() < ef || cand < best.top()) {
          frontier.push(cand);
          best.push(cand);
          if (best.size() > ef) best.pop();
        }
      }
    }
    std::vector<Candidate> out;
    out.reserve(best.size());
    while (!best.empty()) {
      out.push_back(best.top());
      best.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  // Neighbor-selection heuristic: keep a candidate only if it is closer to the
  // base point than to every neighbor already kept.
  std::vector<std::uint32_t> select_neighbors(const std::vector<Candidate>& sorted, std::size_t m) const {
    std::vector<std::uint32_t> kept;
    std::vector<std::uint32_t> pruned;
    for (const Candidate& c : sorted) {
      if (kept.size() >= m) break;
      bool good = true;
      for (std::uint32_t k : kept) {
        if (distance(stored(c.id), k) < c.distance) {
          good = false;
          break;
        }
      }
      if (good) {
        kept.push_back(c.id);
      } else {
        pruned.push_back(c.id);
      }
    }
    for (std::size_t i = 0; i < pruned.size() && kept.size() < m; ++i) kept.push_back(pruned[i]);
    return kept;
  }

  void build_hnsw(std::uint64_t seed) {
    Rng rng(seed, 0x4e5357);
    const double level_mult = 1.0 / std::log(static_cast<double>(params_.max_neighbors));
    links_.resize(count_);
    for (std::size_t i = 0; i < count_; ++i) {
      double u;
      do {
        u = rng.uniform();
      } while (u <= 0.0);
      const auto level = static_cast<std::size_t>(std::floor(-std::log(u) * level_mult));
      links_[i].resize(level + 1);
      insert(static_cast<std::uint32_t>(i), level);
    }
  }

  void insert(std::uint32_t id, std::size_t level) {
    if (id == 0) {
      entry_ = 0;
      top_level_ = level;
      return;
    }
    const auto q = stored(id);
    std::uint32_t entry = entry_;
    if (top_level_ > level) entry = greedy_descend(q, entry_, top_level_, level);
    for (std::size_t l = std::min(level, top_level_) + 1; l-- > 0;) {
      auto candidates = search_layer(q, entry, params_.ef_construction, l);
      auto chosen = select_neighbors(candidates, params_.max_neighbors);
      links_[id][l] = chosen;
      for (std::uint32_t nb : chosen) {
        auto& back = links_[nb][l];
        back.push_back(id);
        if (back.size() > max_links(l)) {
          std::vector<Candidate> pool;
          pool.reserve(back.size());
          for (std::uint32_t x : back) pool.push_back({distance(stored(nb), x), x});
          std::sort(pool.begin(), pool.end());
          back = select_neighbors(pool, max_links(l));
        }
      }
      entry = candidates.front().id;
    }
    if (level > top_level_) {
      top_level_ = level;
      entry_ = id;
    }
  }

  std::vector<Neighbor> search(std::span<const float> q, std::size_t k) const {
    const std::uint32_t entry = greedy_descend(q, entry_, top_level_, 0);
    const auto found = search_layer(q, entry, std::max(params_.ef_search, k), 0);
    std::vector<Neighbor> hits;
    hits.reserve(std::min(k, found.size()));
    for (std::size_t i = 0; i < found.size() && hits.size() < k; ++i) {
      hits.push_back({found[i].id, cosine(q, found[i].id)});
    }
    sort_neighbors(hits);
    return hits;
  }

  IndexMode mode_;
  AnnParams params_;
  std::size_t count_;
  std::size_t dim_;
  std::vector<float> unit_;
  // links_[node][level] -> neighbor ids
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;
  std::uint32_t entry_ = 0;
  std::size_t top_level_ = 0;
};

inline AnnIndex build_index(const EmbeddingMatrix& embeddings, IndexMode mode, std::uint64_t seed,
                            AnnParams params = {}) {
  return AnnIndex(embeddings, mode, seed, params);
}

inline std::vector<Neighbor> knn_query(const AnnIndex& index, std::span<const float> vector, std::size_t k,
                                       std::optional<std::size_t> exclude = std::nullopt) {
  return index.query(vector, k, exclude);
}

}  // namespace sesame
