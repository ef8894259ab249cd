#pragma once

// Shared helpers for the unit and acceptance suites: finite-difference
// gradient checking, scratch directories and independent brute-force
// oracles that do not reuse library code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "sesame/sesame.hpp"

namespace sesame::testing {

// ---------------------------------------------------------------------------
// Gradient checking.

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::string worst;

  bool ok() const { return failures == 0 && checked > 0; }
};

/// Compares tape gradients of `loss(tape)` against central differences for
/// every entry of every parameter. An entry passes when
/// |analytic - numeric| <= rtol * max(|analytic|, |numeric|) + atol.
template <typename LossFn>
GradCheck gradient_check(const std::vector<Parameter<double>*>& params, LossFn loss, double eps = 1e-4,
                         double rtol = 1e-3, double atol = 1e-7) {
  for (auto* p : params) p->grad.setZero();
  {
    Tape<double> tape;
    auto l = loss(tape);
    tape.backward(l);
  }
  auto value_at = [&]() {
    Tape<double> tape;
    return loss(tape).value()(0, 0);
  };
  GradCheck result;
  for (auto* p : params) {
    for (Index i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data()[i];
      p->value.data()[i] = saved + eps;
      const double up = value_at();
      p->value.data()[i] = saved - eps;
      const double down = value_at();
      p->value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad.data()[i];
      const double diff = std::abs(analytic - numeric);
      const double scale = std::max(std::abs(analytic), std::abs(numeric));
      const double rel = scale > 0.0 ? diff / scale : 0.0;
      ++result.checked;
      if (diff > rtol * scale + atol) {
        ++result.failures;
      }
      if (diff > atol && rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = p->name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic) + " numeric " +
                       std::to_string(numeric);
      }
    }
  }
  return result;
}

inline Matrix<double> random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  Matrix<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

/// Random matrix with every entry at least `gap` away from zero, so kinked
/// ops are not probed at their kink.
inline Matrix<double> random_away_from_zero(Index rows, Index cols, Rng& rng, double gap = 0.05) {
  Matrix<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    const double x = rng.uniform(gap, 1.5);
    m.data()[i] = rng.bernoulli(0.5) ? x : -x;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Files.

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sesame-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

// ---------------------------------------------------------------------------
// Oracles.

/// Plain Levenshtein distance over tokens.
inline std::size_t edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// All token sequences of length <= max_len over `alphabet`.
inline std::vector<std::vector<std::string>> all_sequences(const std::vector<std::string>& alphabet,
                                                           std::size_t max_len) {
  std::vector<std::vector<std::string>> out{{}};
  std::vector<std::vector<std::string>> frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& s : frontier) {
      for (const auto& a : alphabet) {
        auto t = s;
        t.push_back(a);
        next.push_back(t);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

inline double cosine(std::span<const float> a, std::span<const float> b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(dot / std::sqrt(na * nb));
}

/// Exact top-k by cosine (ties by id), excluding `exclude`.
inline std::vector<std::size_t> brute_knn(const EmbeddingMatrix& m, std::span<const float> q, std::size_t k,
                                          std::optional<std::size_t> exclude = {}) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < m.count; ++i) {
    if (exclude && *exclude == i) continue;
    all.emplace_back(cosine(q, m.row(i)), i);
  }
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
    return x.first > y.first || (x.first == y.first && x.second < y.second);
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

/// All-pairs construction: k nearest per node, threshold filter, union.
inline std::set<std::pair<std::size_t, std::size_t>> brute_graph_edges(const EmbeddingMatrix& m, std::size_t k,
                                                                       double threshold) {
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < m.count; ++u) {
    for (std::size_t v : brute_knn(m, m.row(u), k, u)) {
      if (cosine(m.row(u), m.row(v)) >= threshold) edges.emplace(std::min(u, v), std::max(u, v));
    }
  }
  return edges;
}

inline EmbeddingMatrix random_embeddings(std::size_t count, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingMatrix m(count, dim);
  for (float& x : m.data) x = static_cast<float>(rng.normal());
  return m;
}

/// Random labeled graph with edge probability p and positive weights.
inline SemanticGraph random_graph(std::size_t n, double p, std::size_t classes, Rng& rng, bool weighted = true) {
  std::vector<Edge> edges;
  for (std::uint32_t u = 0; u < n; ++u) {
    for (std::uint32_t v = u + 1; v < n; ++v) {
      if (rng.bernoulli(p)) edges.push_back({u, v, weighted ? static_cast<float>(rng.uniform(0.3, 1.0)) : 1.0f});
    }
  }
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.below(classes));
  return SemanticGraph(n, std::move(edges), labels, {});
}

/// Edge homophily counted straight off a dense adjacency matrix.
inline double dense_edge_homophily(const SemanticGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (const auto& e : g.edges()) adj[e.u][e.v] = adj[e.v][e.u] = true;
  std::size_t same = 0, total = 0;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (!adj[u][v]) continue;
      ++total;
      same += g.label(u) == g.label(v);
    }
  }
  return static_cast<double>(same) / static_cast<double>(total);
}

/// Sort-and-truncate sampler reference: shuffle with its own generator,
/// stable-sort by class descending, keep the first k. Returns the class
/// multiset of the selection.
inline std::multiset<int> reference_sample_classes(const std::vector<std::pair<std::string, int>>& preds,
                                                   std::size_t k, std::uint64_t seed) {
  std::vector<std::pair<std::string, int>> items = preds;
  std::mt19937 gen(static_cast<std::uint32_t>(seed));
  std::shuffle(items.begin(), items.end(), gen);
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::multiset<int> out;
  for (std::size_t i = 0; i < std::min(k, items.size()); ++i) out.insert(items[i].second);
  return out;
}

/// Supervised contrastive loss written straight from its definition.
inline double direct_contrastive(const std::vector<std::vector<double>>& z, const std::vector<int>& labels,
                                 double tau) {
  double total = 0.0;
  std::size_t anchors = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto sim = [&](std::size_t a, std::size_t b) {
      double s = 0.0;
      for (std::size_t c = 0; c < z[a].size(); ++c) s += z[a][c] * z[b][c];
      return s / tau;
    };
    double denom = 0.0;
    for (std::size_t a = 0; a < z.size(); ++a) {
      if (a != i) denom += std::exp(sim(i, a));
    }
    double sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t p = 0; p < z.size(); ++p) {
      if (p == i || labels[p] != labels[i]) continue;
      sum += std::log(std::exp(sim(i, p)) / denom);
      ++positives;
    }
    if (positives == 0) continue;
    total += -sum / static_cast<double>(positives);
    ++anchors;
  }
  return anchors ? total / static_cast<double>(anchors) : 0.0;
}

}  // namespace sesame::testing
