#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "sesame/ann.hpp"
#include "sesame/binary_io.hpp"
#include "sesame/corpus.hpp"
#include "sesame/error.hpp"

namespace sesame {

/// Undirected edge stored once with u < v.
struct Edge {
  std::uint32_t u;
  std::uint32_t v;
  float weight;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct AdjacentNode {
  std::uint32_t node;
  float weight;
};

inline constexpr int kUnlabeled = -1;

/// Semantic-similarity graph over utterances. Node features live outside
/// the graph (row i of the matching embedding matrix). Immutable once built.
class SemanticGraph {
 public:
  SemanticGraph() = default;

  SemanticGraph(std::size_t node_count, std::vector<Edge> edges, std::vector<int> labels,
                std::vector<bool> holdout_mask)
      : node_count_(node_count), edges_(std::move(edges)), labels_(std::move(labels)),
        holdout_(std::move(holdout_mask)) {
    if (labels_.empty()) labels_.assign(node_count_, kUnlabeled);
    if (holdout_.empty()) holdout_.assign(node_count_, false);
    if (labels_.size() != node_count_ || holdout_.size() != node_count_) {
      throw DataError("graph labels/holdout mask length does not match node count");
    }
    if (node_count_ > UINT32_MAX) throw DataError("graph too large for 32-bit node ids");
    for (int label : labels_) {
      if (label < kUnlabeled || label > INT16_MAX) throw DataError("graph label out of range");
    }
    for (auto& e : edges_) {
      if (e.u > e.v) std::swap(e.u, e.v);
      if (e.u == e.v) throw DataError("self-edge on node " + std::to_string(e.u));
      if (e.v >= node_count_) throw DataError("edge endpoint out of range");
      if (!std::isfinite(e.weight)) throw DataError("non-finite edge weight");
      if (holdout_[e.u] && holdout_[e.v]) {
        throw DataError("edge between holdout nodes " + std::to_string(e.u) + " and " + std::to_string(e.v));
      }
    }
    std::sort(edges_.begin(), edges_.end(),
              [](const Edge& a, const Edge& b) { return a.u < b.u || (a.u == b.u && a.v < b.v); });
    for (std::size_t i = 1; i < edges_.size(); ++i) {
      if (edges_[i].u == edges_[i - 1].u && edges_[i].v == edges_[i - 1].v) {
        throw DataError("duplicate edge (" + std::to_string(edges_[i].u) + ", " + std::to_string(edges_[i].v) + ")");
      }
    }
    build_adjacency();
  }

  std::size_t node_count() const { return node_count_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<bool>& holdout_mask() const { return holdout_; }
  int label(std::size_t node) const { return labels_[node]; }
  bool is_holdout(std::size_t node) const { return holdout_[node]; }

  std::span<const AdjacentNode> neighbors(std::size_t node) const {
    return {adjacency_.data() + offsets_[node], offsets_[node + 1] - offsets_[node]};
  }
  std::size_t degree(std::size_t node) const { return offsets_[node + 1] - offsets_[node]; }

  std::size_t holdout_count() const { return static_cast<std::size_t>(std::count(holdout_.begin(), holdout_.end(), true)); }

  friend bool operator==(const SemanticGraph& a, const SemanticGraph& b) {
    return a.node_count_ == b.node_count_ && a.edges_ == b.edges_ && a.labels_ == b.labels_ &&
           a.holdout_ == b.holdout_;
  }

 private:
  void build_adjacency() {
    offsets_.assign(node_count_ + 1, 0);
    for (const auto& e : edges_) {
      ++offsets_[e.u + 1];
      ++offsets_[e.v + 1];
    }
    for (std::size_t i = 0; i < node_count_; ++i) offsets_[i + 1] += offsets_[i];
    adjacency_.resize(2 * edges_.size());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    // Edges are sorted by (u, v), so each list comes out ordered by node id.
    for (const auto& e : edges_) adjacency_[cursor[e.u]++] = {e.v, e.weight};
    for (const auto& e : edges_) adjacency_[cursor[e.v]++] = {e.u, e.weight};
    for (std::size_t n = 0; n < node_count_; ++n) {
      std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[n]),
                adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[n + 1]),
                [](const AdjacentNode& a, const AdjacentNode& b) { return a.node < b.node; });
    }
  }

  std::size_t node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<int> labels_;
  std::vector<bool> holdout_;
  std::vector<std::size_t> offsets_{0};
  std::vector<AdjacentNode> adjacency_;
};

struct GraphOptions {
  std::size_t k = 10;
  double threshold = 0.7;
  IndexMode mode = IndexMode::exact;
  std::uint64_t seed = 42;
  AnnParams ann;
};

inline double exact_cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

namespace detail {

// Thresholds above 1 are valid and select no edges.
inline void check_threshold(double threshold) {
  if (std::isnan(threshold) || threshold < -1.0) throw UsageError("similarity threshold must be >= -1");
}

inline EmbeddingMatrix select_rows(const EmbeddingMatrix& m, const std::vector<std::size_t>& rows) {
  EmbeddingMatrix out(rows.size(), m.dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace detail

/// k-NN per node, filtered by cosine >= threshold, symmetrized by union.
inline SemanticGraph build_graph(const EmbeddingMatrix& embeddings, const std::vector<int>& labels,
                                 const GraphOptions& options) {
  const std::size_t n = embeddings.count;
  if (labels.size() != n) throw DataError("label count does not match embedding count");
  if (options.k == 0) throw UsageError("graph k must be >= 1");
  if (options.k >= n) {
    throw UsageError("graph k (" + std::to_string(options.k) + ") must be smaller than node count (" +
                     std::to_string(n) + ")");
  }
  detail::check_threshold(options.threshold);

  const AnnIndex index(embeddings, options.mode, options.seed, options.ann);
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (const Neighbor& nb : index.query(embeddings.row(u), options.k, u)) {
      const double w = exact_cosine(embeddings.row(u), embeddings.row(nb.id));
      if (w < options.threshold) continue;
      const auto a = static_cast<std::uint32_t>(std::min(u, nb.id));
      const auto b = static_cast<std::uint32_t>(std::max(u, nb.id));
      edges.push_back({a, b, static_cast<float>(w)});
    }
  }
  std::sort(edges.begin(), edges.end(),
            [](const Edge& x, const Edge& y) { return x.u < y.u || (x.u == y.u && x.v < y.v); });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const Edge& x, const Edge& y) { return x.u == y.u && x.v == y.v; }),
              edges.end());
  return SemanticGraph(n, std::move(edges), labels, std::vector<bool>(n, false));
}

struct GraphExtension {
  SemanticGraph graph;
  std::size_t isolated_holdout = 0;  // holdout nodes left without any edge
};

/// Appends holdout nodes (unlabeled, holdout flag set) connected only to
/// non-holdout nodes of `graph`. `embeddings` holds one row per existing node.
inline GraphExtension extend_graph(const SemanticGraph& graph, const EmbeddingMatrix& embeddings,
                                   const EmbeddingMatrix& holdout, const GraphOptions& options) {
  if (embeddings.count != graph.node_count()) {
    throw DataError("embedding count does not match graph node count");
  }
  if (holdout.dim != embeddings.dim) {
    throw DataError("holdout dimension " + std::to_string(holdout.dim) + " does not match training dimension " +
                    std::to_string(embeddings.dim));
  }
  if (options.k == 0) throw UsageError("graph k must be >= 1");
  detail::check_threshold(options.threshold);

  std::vector<std::size_t> training_nodes;
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    if (!graph.is_holdout(i)) training_nodes.push_back(i);
  }
  if (training_nodes.empty()) throw DataError("graph has no training nodes to attach holdout nodes to");

  const EmbeddingMatrix training = detail::select_rows(embeddings, training_nodes);
  const AnnIndex index(training, options.mode, options.seed, options.ann);

  std::vector<Edge> edges = graph.edges();
  std::vector<int> labels = graph.labels();
  std::vector<bool> mask = graph.holdout_mask();
  const std::size_t base = graph.node_count();
  std::size_t isolated = 0;
  for (std::size_t h = 0; h < holdout.count; ++h) {
    const auto node = static_cast<std::uint32_t>(base + h);
    std::size_t added = 0;
    for (const Neighbor& nb : index.query(holdout.row(h), options.k)) {
      const std::size_t target = training_nodes[nb.id];
      const double w = exact_cosine(holdout.row(h), embeddings.row(target));
      if (w < options.threshold) continue;
      edges.push_back({static_cast<std::uint32_t>(target), node, static_cast<float>(w)});
      ++added;
    }
    if (added == 0) ++isolated;
    labels.push_back(kUnlabeled);
    mask.push_back(true);
  }
  return {SemanticGraph(base + holdout.count, std::move(edges), std::move(labels), std::move(mask)), isolated};
}

/// Stacks training rows followed by holdout rows.
inline EmbeddingMatrix concat_rows(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  if (a.dim != b.dim) throw DataError("cannot stack embeddings of different dimension");
  EmbeddingMatrix out(a.count + b.count, a.dim);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

inline constexpr char kGraphMagic[5] = "SGRF";
inline constexpr std::uint16_t kGraphVersion = 1;

/// Holdout mask bits are packed LSB-first: node i is bit (i % 8) of byte i / 8.
inline void save_graph(const std::string& path, const SemanticGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write graph file: " + path);
  out.write(kGraphMagic, 4);
  io::write_le<std::uint16_t>(out, kGraphVersion);
  io::write_le<std::uint64_t>(out, g.node_count());
  io::write_le<std::uint64_t>(out, g.edge_count());
  std::vector<char> bits((g.node_count() + 7) / 8, 0);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (g.is_holdout(i)) bits[i / 8] = static_cast<char>(bits[i / 8] | (1u << (i % 8)));
  }
  out.write(bits.data(), static_cast<std::streamsize>(bits.size()));
  for (int label : g.labels()) io::write_i16(out, static_cast<std::int16_t>(label));
  for (const auto& e : g.edges()) {
    io::write_le<std::uint32_t>(out, e.u);
    io::write_le<std::uint32_t>(out, e.v);
    io::write_f32(out, e.weight);
  }
  if (!out) throw DataError("failed writing graph file: " + path);
}

inline SemanticGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open graph file: " + path);
  const std::string what = "graph file " + path;
  io::expect_magic(in, kGraphMagic, what);
  const auto version = io::read_le<std::uint16_t>(in, "version");
  if (version != kGraphVersion) throw FormatError(what + ": unsupported version " + std::to_string(version));
  const auto nodes = io::read_le<std::uint64_t>(in, "node count");
  const auto edge_count = io::read_le<std::uint64_t>(in, "edge count");
  if (nodes > UINT32_MAX) throw FormatError(what + ": node count exceeds 32-bit ids");

  std::vector<char> bits((nodes + 7) / 8);
  if (!in.read(bits.data(), static_cast<std::streamsize>(bits.size()))) {
    throw FormatError(what + ": truncated holdout mask");
  }
  std::vector<bool> mask(nodes);
  for (std::size_t i = 0; i < nodes; ++i) mask[i] = (static_cast<unsigned char>(bits[i / 8]) >> (i % 8)) & 1u;
  std::vector<int> labels(nodes);
  for (auto& l : labels) l = io::read_i16(in, "labels");

  std::vector<Edge> edges(edge_count);
  for (auto& e : edges) {
    e.u = io::read_le<std::uint32_t>(in, "edge");
    e.v = io::read_le<std::uint32_t>(in, "edge");
    e.weight = io::read_f32(in, "edge");
    if (e.u >= e.v) throw FormatError(what + ": edge record without u < v");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(what + ": trailing bytes after edges");
  return SemanticGraph(nodes, std::move(edges), std::move(labels), std::move(mask));
}

}  // namespace sesame
