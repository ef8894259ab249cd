#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sesame/corpus.hpp"
#include "sesame/error.hpp"
#include "sesame/gnn.hpp"
#include "sesame/metrics.hpp"
#include "sesame/random.hpp"
#include "sesame/simgraph.hpp"

namespace sesame {

struct PlantedSpec {
  std::size_t n = 500;
  std::size_t k = 7;
  std::size_t dim = 64;
  double separation = 0.2;   // pairwise cosine of cluster centers
  double noise = 0.5;        // norm of the within-cluster perturbation before renormalizing
  double label_noise = 0.1;  // probability that a point's WER class is redrawn uniformly
  std::uint64_t seed = 42;
  BucketSpec buckets;

  void validate() const {
    if (k != buckets.classes()) {
      throw UsageError("planted class count " + std::to_string(k) + " does not match bucket count " +
                       std::to_string(buckets.classes()));
    }
    if (n < 5 * k) throw UsageError("planted data needs n >= 5k (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw UsageError("within-cluster noise must be >= 0");
    if (!(label_noise >= 0.0 && label_noise < 1.0)) throw UsageError("label noise must lie in [0, 1)");
    const double floor = -1.0 / static_cast<double>(k - 1);
    if (dim < k || !(separation >= floor - 1e-12 && separation < 1.0)) {
      throw UsageError("infeasible separation " + std::to_string(separation) + " for " + std::to_string(k) +
                       " centers in dimension " + std::to_string(dim) + " (needs dim >= k and cosine in [" +
                       std::to_string(floor) + ", 1))");
    }
  }
};

/// Equal-size bucket bounds for k classes over (0, 1].
inline BucketSpec uniform_buckets(std::size_t k) {
  std::vector<double> bounds;
  for (std::size_t i = 1; i <= k; ++i) bounds.push_back(static_cast<double>(i) / static_cast<double>(k));
  return BucketSpec(bounds);
}

struct PlantedData {
  Corpus corpus;                 // wer and class_label filled in
  EmbeddingMatrix embeddings;    // unit-norm rows
  std::vector<int> true_labels;  // cluster of each point
  std::vector<int> labels;       // bucketized WER (differs from true_labels under label noise)
  EmbeddingMatrix centers;
};

namespace detail {

/// k unit vectors with pairwise cosine exactly `separation`: a regular
/// simplex blended with the direction orthogonal to it.
inline std::vector<std::vector<double>> planted_centers(std::size_t k, std::size_t dim, double separation, Rng& rng) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < k) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += v[i] * b[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * b[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  std::vector<double> mean(dim, 0.0);
  for (const auto& b : basis) {
    for (std::size_t i = 0; i < dim; ++i) mean[i] += b[i] / static_cast<double>(k);
  }
  const double mean_norm = std::sqrt(1.0 / static_cast<double>(k));
  const double inv = 1.0 / static_cast<double>(k - 1);
  const double gamma = std::clamp((separation + inv) / (1.0 + inv), 0.0, 1.0);
  const double simplex_norm = std::sqrt(1.0 - 1.0 / static_cast<double>(k));

  std::vector<std::vector<double>> centers;
  for (const auto& b : basis) {
    std::vector<double> c(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      c[i] = std::sqrt(1.0 - gamma) * (b[i] - mean[i]) / simplex_norm + std::sqrt(gamma) * mean[i] / mean_norm;
    }
    centers.push_back(std::move(c));
  }
  return centers;
}

inline double planted_wer(int cls, const BucketSpec& buckets, Rng& rng) {
  const auto c = static_cast<std::size_t>(cls);
  const double lo = buckets.lower_bound(c);
  const double hi = buckets.upper_bounds()[c];
  const double width = hi - lo;
  const double wer = 0.5 * (lo + hi) + rng.normal() * width / 6.0;
  return std::clamp(wer, c == 0 ? 0.0 : lo + 0.01 * width, hi);
}

}  // namespace detail

inline PlantedData generate_planted(const PlantedSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, 0x504c4e54);
  const auto centers = detail::planted_centers(spec.k, spec.dim, spec.separation, rng);

  PlantedData data;
  data.embeddings = EmbeddingMatrix(spec.n, spec.dim);
  data.centers = EmbeddingMatrix(spec.k, spec.dim);
  for (std::size_t c = 0; c < spec.k; ++c) {
    for (std::size_t i = 0; i < spec.dim; ++i) data.centers.row(c)[i] = static_cast<float>(centers[c][i]);
  }
  const double scale = spec.noise / std::sqrt(static_cast<double>(spec.dim));
  for (std::size_t p = 0; p < spec.n; ++p) {
    // Round-robin assignment keeps class sizes within one of each other.
    const int cls = static_cast<int>(p % spec.k);
    std::vector<double> x(spec.dim);
    double norm = 0.0;
    for (std::size_t i = 0; i < spec.dim; ++i) {
      x[i] = centers[static_cast<std::size_t>(cls)][i] + scale * rng.normal();
      norm += x[i] * x[i];
    }
    norm = std::sqrt(norm);
    auto row = data.embeddings.row(p);
    for (std::size_t i = 0; i < spec.dim; ++i) row[i] = static_cast<float>(x[i] / norm);

    int observed = cls;
    if (spec.label_noise > 0.0 && rng.bernoulli(spec.label_noise)) observed = static_cast<int>(rng.below(spec.k));
    const double wer = detail::planted_wer(observed, spec.buckets, rng);

    Utterance u;
    u.id = "planted-" + std::to_string(p);
    u.text = "planted utterance " + std::to_string(p);
    u.wer = wer;
    u.class_label = bucketize(wer, spec.buckets);
    data.true_labels.push_back(cls);
    data.labels.push_back(*u.class_label);
    data.corpus.push_back(std::move(u));
  }
  return data;
}

struct RecoveryReport {
  std::map<std::string, EvalReport> architectures;
  EvalReport random_baseline;
  double edge_homophily = 0.0;
  std::size_t edges = 0;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"random", random_baseline.to_json()}, {"edge_homophily", edge_homophily}, {"edges", edges}};
    for (const auto& [name, report] : architectures) j[name] = report.to_json();
    return j;
  }
};

/// Builds the graph over planted data, trains each architecture and scores
/// it on the validation split against the bucketized labels.
inline RecoveryReport planted_recovery_report(const PlantedSpec& spec, const GnnConfig& base,
                                              const GraphOptions& graph_options = {},
                                              const std::vector<Architecture>& architectures = {
                                                  Architecture::gcn, Architecture::gin, Architecture::sage,
                                                  Architecture::gat}) {
  const PlantedData data = generate_planted(spec);
  const SemanticGraph graph = build_graph(data.embeddings, data.labels, graph_options);

  RecoveryReport report;
  report.edges = graph.edge_count();
  report.edge_homophily = graph.edge_count() ? edge_homophily(graph) : 0.0;

  GnnConfig config = base;
  config.input_dim = spec.dim;
  config.classes = spec.k;
  const DataSplit split = validation_split(graph, config.val_fraction, config.seed);
  if (split.validation.empty()) throw UsageError("planted recovery needs a non-empty validation split");
  std::vector<int> truth;
  for (std::size_t i : split.validation) truth.push_back(data.labels[i]);
  report.random_baseline = expected_random_baseline(truth, spec.k);

  for (Architecture arch : architectures) {
    config.architecture = arch;
    TrainResult trained = train_gnn(graph, data.embeddings, config, split);
    const auto pred = predict_all(trained.model, graph, data.embeddings);
    std::vector<int> val_pred;
    for (std::size_t i : split.validation) val_pred.push_back(pred[i]);
    report.architectures[to_string(arch)] = evaluate(val_pred, truth, spec.k);
  }
  return report;
}

}  // namespace sesame
