#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sesame/error.hpp"
#include "sesame/simgraph.hpp"

namespace sesame {

namespace detail {

inline void check_pairs(std::span<const int> pred, std::span<const int> truth, const char* metric) {
  if (pred.size() != truth.size()) {
    throw DataError(std::string(metric) + ": prediction count " + std::to_string(pred.size()) +
                    " does not match truth count " + std::to_string(truth.size()));
  }
  if (pred.empty()) throw DataError(std::string(metric) + ": no predictions");
}

}  // namespace detail

inline double accuracy(std::span<const int> pred, std::span<const int> truth) {
  detail::check_pairs(pred, truth, "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// One-frame agreement: a prediction within one class of the truth counts.
inline double ofa(std::span<const int> pred, std::span<const int> truth) {
  detail::check_pairs(pred, truth, "ofa");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += std::abs(pred[i] - truth[i]) <= 1;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// Mean squared difference of class indices.
inline double mse(std::span<const int> pred, std::span<const int> truth) {
  detail::check_pairs(pred, truth, "mse");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    total += d * d;
  }
  return total / static_cast<double>(pred.size());
}

struct EvalReport {
  double accuracy = 0.0;
  double ofa = 0.0;
  double mse = 0.0;
  std::size_t n = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][pred]

  nlohmann::json to_json() const {
    return {{"accuracy", accuracy}, {"ofa", ofa}, {"mse", mse}, {"n", n}, {"confusion", confusion}};
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "n " << n << "\naccuracy " << accuracy << "\nofa " << ofa << "\nmse " << mse << "\nconfusion (rows=truth, cols=pred)\n";
    for (const auto& row : confusion) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << row[c];
      out << '\n';
    }
    return out.str();
  }
};

inline EvalReport evaluate(std::span<const int> pred, std::span<const int> truth, std::size_t classes) {
  EvalReport report;
  report.accuracy = accuracy(pred, truth);
  report.ofa = ofa(pred, truth);
  report.mse = mse(pred, truth);
  report.n = pred.size();
  report.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || truth[i] < 0 || static_cast<std::size_t>(pred[i]) >= classes ||
        static_cast<std::size_t>(truth[i]) >= classes) {
      throw DataError("evaluate: class index out of range");
    }
    ++report.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
  }
  return report;
}

/// Expected metrics of predictions drawn uniformly from `classes` classes.
inline EvalReport expected_random_baseline(std::span<const int> truth, std::size_t classes) {
  if (truth.empty()) throw DataError("random baseline: no truth labels");
  EvalReport report;
  report.n = truth.size();
  const auto k = static_cast<double>(classes);
  for (int y : truth) {
    double within = 0.0, sq = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double d = static_cast<double>(c) - y;
      within += std::abs(d) <= 1.0;
      sq += d * d;
    }
    report.ofa += within / k;
    report.mse += sq / k;
  }
  report.accuracy = 1.0 / k;
  report.ofa /= static_cast<double>(truth.size());
  report.mse /= static_cast<double>(truth.size());
  return report;
}

/// Fraction of edges whose endpoints share a label.
inline double edge_homophily(const SemanticGraph& graph, std::span<const int> labels) {
  if (labels.size() != graph.node_count()) throw DataError("edge homophily: label count does not match graph");
  if (graph.edge_count() == 0) throw DataError("edge homophily: graph has no edges");
  std::size_t same = 0;
  for (const auto& e : graph.edges()) {
    if (labels[e.u] < 0 || labels[e.v] < 0) {
      throw DataError("edge homophily: unlabeled endpoint on edge (" + std::to_string(e.u) + ", " +
                      std::to_string(e.v) + ")");
    }
    same += labels[e.u] == labels[e.v];
  }
  return static_cast<double>(same) / static_cast<double>(graph.edge_count());
}

inline double edge_homophily(const SemanticGraph& graph) { return edge_homophily(graph, graph.labels()); }

struct NeighborhoodHomophily {
  double mean = 0.0;            // over non-isolated nodes
  double min = 0.0;
  double degree_weighted = 0.0; // sum(deg * h) / sum(deg)
  std::vector<std::optional<double>> per_node;  // empty for isolated nodes
  std::vector<std::size_t> histogram;           // 10 equal bins over [0, 1]
  std::size_t counted = 0;

  nlohmann::json to_json() const {
    return {{"mean", mean}, {"min", min}, {"degree_weighted", degree_weighted}, {"histogram", histogram},
            {"counted", counted}};
  }
};

/// Per node, the fraction of its neighbors that share its label.
inline NeighborhoodHomophily neighborhood_homophily(const SemanticGraph& graph, std::span<const int> labels) {
  if (labels.size() != graph.node_count()) throw DataError("neighborhood homophily: label count does not match graph");
  NeighborhoodHomophily out;
  out.per_node.resize(graph.node_count());
  out.histogram.assign(10, 0);
  out.min = std::numeric_limits<double>::infinity();
  double total = 0.0, weighted = 0.0, degrees = 0.0;
  for (std::size_t u = 0; u < graph.node_count(); ++u) {
    const auto nbrs = graph.neighbors(u);
    if (nbrs.empty()) continue;
    if (labels[u] < 0) throw DataError("neighborhood homophily: node " + std::to_string(u) + " is unlabeled");
    std::size_t same = 0;
    for (const auto& nb : nbrs) {
      if (labels[nb.node] < 0) {
        throw DataError("neighborhood homophily: node " + std::to_string(nb.node) + " is unlabeled");
      }
      same += labels[nb.node] == labels[u];
    }
    const double h = static_cast<double>(same) / static_cast<double>(nbrs.size());
    out.per_node[u] = h;
    total += h;
    weighted += h * static_cast<double>(nbrs.size());
    degrees += static_cast<double>(nbrs.size());
    out.min = std::min(out.min, h);
    ++out.histogram[std::min<std::size_t>(9, static_cast<std::size_t>(h * 10.0))];
    ++out.counted;
  }
  if (out.counted == 0) throw DataError("no neighborhoods: every node is isolated");
  out.mean = total / static_cast<double>(out.counted);
  out.degree_weighted = weighted / degrees;
  return out;
}

inline NeighborhoodHomophily neighborhood_homophily(const SemanticGraph& graph) {
  return neighborhood_homophily(graph, graph.labels());
}

}  // namespace sesame
