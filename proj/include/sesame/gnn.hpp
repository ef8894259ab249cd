#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sesame/checkpoint.hpp"
#include "sesame/corpus.hpp"
#include "sesame/error.hpp"
#include "sesame/metrics.hpp"
#include "sesame/random.hpp"
#include "sesame/simgraph.hpp"
#include "sesame/tensor.hpp"

namespace sesame {

enum class Architecture { gcn, gin, sage, gat };
enum class Activation { tanh, relu };

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::gcn: return "gcn";
    case Architecture::gin: return "gin";
    case Architecture::sage: return "sage";
    case Architecture::gat: return "gat";
  }
  return "?";
}

inline Architecture parse_architecture(const std::string& s) {
  if (s == "gcn") return Architecture::gcn;
  if (s == "gin") return Architecture::gin;
  if (s == "sage") return Architecture::sage;
  if (s == "gat") return Architecture::gat;
  throw UsageError("unknown architecture \"" + s + "\" (expected gcn, gin, sage or gat)");
}

inline std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw UsageError("unknown activation \"" + s + "\"");
}

struct GnnConfig {
  Architecture architecture = Architecture::gcn;
  std::size_t layers = 4;
  std::size_t hidden_dim = 128;
  std::size_t input_dim = 768;
  std::size_t classes = 7;
  Activation activation = Activation::tanh;
  double drop_edge_p = 0.25;
  std::size_t epochs = 2100;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double val_fraction = 0.1;
  std::uint64_t seed = 42;
  std::size_t gat_heads = 1;
  std::size_t gin_hidden = 128;

  void validate() const {
    if (layers < 1) throw UsageError("gnn needs at least one message-passing layer");
    if (hidden_dim == 0 || input_dim == 0 || gin_hidden == 0) throw UsageError("gnn dimensions must be positive");
    if (classes < 2) throw UsageError("gnn needs at least 2 classes");
    if (!(drop_edge_p >= 0.0 && drop_edge_p < 1.0)) throw UsageError("drop-edge probability must lie in [0, 1)");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw UsageError("validation fraction must lie in [0, 1)");
    if (!(learning_rate > 0.0) || weight_decay < 0.0) throw UsageError("invalid optimizer settings");
    if (gat_heads < 1) throw UsageError("gat needs at least one head");
  }

  nlohmann::json to_json() const {
    return {{"architecture", to_string(architecture)},
            {"layers", layers},
            {"hidden_dim", hidden_dim},
            {"input_dim", input_dim},
            {"classes", classes},
            {"activation", to_string(activation)},
            {"drop_edge_p", drop_edge_p},
            {"epochs", epochs},
            {"learning_rate", learning_rate},
            {"weight_decay", weight_decay},
            {"val_fraction", val_fraction},
            {"seed", seed},
            {"gat_heads", gat_heads},
            {"gin_hidden", gin_hidden}};
  }

  static GnnConfig from_json(const nlohmann::json& j) {
    GnnConfig c;
    c.architecture = parse_architecture(j.at("architecture").get<std::string>());
    c.layers = j.at("layers").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.classes = j.at("classes").get<std::size_t>();
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.drop_edge_p = j.at("drop_edge_p").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.gat_heads = j.at("gat_heads").get<std::size_t>();
    c.gin_hidden = j.at("gin_hidden").get<std::size_t>();
    return c;
  }
};

// ---------------------------------------------------------------------------
// Ordinal labels.

/// Cumulative target: positions 0..label are 1, the rest 0.
inline std::vector<std::uint8_t> encode_ordinal(int label, std::size_t classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= classes) {
    throw DataError("ordinal label " + std::to_string(label) + " outside [0, " + std::to_string(classes - 1) + "]");
  }
  std::vector<std::uint8_t> target(classes, 0);
  std::fill(target.begin(), target.begin() + label + 1, 1);
  return target;
}

/// Length L of the leading run of scores above 0.5, returned as max(L-1, 0).
template <typename Scalar>
int decode_ordinal(std::span<const Scalar> scores) {
  std::size_t prefix = 0;
  while (prefix < scores.size() && scores[prefix] > Scalar(0.5)) ++prefix;
  return prefix == 0 ? 0 : static_cast<int>(prefix) - 1;
}

inline int decode_ordinal(const std::vector<double>& scores) { return decode_ordinal(std::span<const double>(scores)); }

/// Fraction of score rows whose thresholded bits are not a 1-prefix.
template <typename T>
double prefix_violation_rate(const Matrix<T>& scores) {
  if (scores.rows() == 0) return 0.0;
  std::size_t bad = 0;
  for (Index r = 0; r < scores.rows(); ++r) {
    bool seen_zero = false;
    for (Index c = 0; c < scores.cols(); ++c) {
      const bool on = scores(r, c) > T(0.5);
      if (on && seen_zero) {
        ++bad;
        break;
      }
      seen_zero = seen_zero || !on;
    }
  }
  return static_cast<double>(bad) / static_cast<double>(scores.rows());
}

// ---------------------------------------------------------------------------
// Graph operators used by the message-passing layers. Edges with
// non-positive weight carry no message.

template <typename T>
struct GraphOperators {
  std::size_t nodes = 0;
  std::shared_ptr<const SparseMatrix<T>> normalized;  // GCN: w_uv / sqrt(d_u d_v) incl. self loops
  std::shared_ptr<const SparseMatrix<T>> weighted;    // GIN: w_uv, no self loops
  std::shared_ptr<const SparseMatrix<T>> mean;        // SAGE: w_uv / sum_v w_uv
  std::shared_ptr<const AttentionNeighborhoods> attention;  // GAT: N(u) plus self, log w_uv

  static GraphOperators build(const SemanticGraph& g) {
    GraphOperators ops;
    const std::size_t n = g.node_count();
    ops.nodes = n;
    std::vector<double> degree(n, 1.0);
    std::vector<double> strength(n, 0.0);
    for (std::size_t u = 0; u < n; ++u) {
      for (const auto& nb : g.neighbors(u)) {
        if (nb.weight > 0.0f) strength[u] += nb.weight;
      }
      degree[u] += strength[u];
    }

    using Triplet = Eigen::Triplet<T>;
    std::vector<Triplet> norm_t, sum_t, mean_t;
    auto att = std::make_shared<AttentionNeighborhoods>();
    for (std::size_t u = 0; u < n; ++u) {
      const auto ui = static_cast<Index>(u);
      norm_t.emplace_back(ui, ui, static_cast<T>(1.0 / degree[u]));
      att->nodes.push_back(ui);
      att->log_weights.push_back(0.0);
      for (const auto& nb : g.neighbors(u)) {
        if (nb.weight <= 0.0f) continue;
        const auto vi = static_cast<Index>(nb.node);
        const double w = nb.weight;
        norm_t.emplace_back(ui, vi, static_cast<T>(w / std::sqrt(degree[u] * degree[nb.node])));
        sum_t.emplace_back(ui, vi, static_cast<T>(w));
        mean_t.emplace_back(ui, vi, static_cast<T>(w / strength[u]));
        att->nodes.push_back(vi);
        att->log_weights.push_back(std::log(w));
      }
      att->offsets.push_back(att->nodes.size());
    }
    auto make = [n](const std::vector<Triplet>& t) {
      auto m = std::make_shared<SparseMatrix<T>>(static_cast<Index>(n), static_cast<Index>(n));
      m->setFromTriplets(t.begin(), t.end());
      return std::shared_ptr<const SparseMatrix<T>>(std::move(m));
    };
    ops.normalized = make(norm_t);
    ops.weighted = make(sum_t);
    ops.mean = make(mean_t);
    ops.attention = std::move(att);
    return ops;
  }
};

/// Independently removes each undirected edge with probability p. The draw
/// depends only on (seed, epoch).
inline SemanticGraph drop_edge(const SemanticGraph& graph, double p, std::uint64_t seed, std::uint64_t epoch) {
  if (!(p >= 0.0 && p < 1.0)) throw UsageError("drop-edge probability must lie in [0, 1)");
  if (p == 0.0) return graph;
  Rng rng(mix_seed(seed, 0x44524f50), epoch);
  std::vector<Edge> kept;
  kept.reserve(graph.edge_count());
  for (const auto& e : graph.edges()) {
    if (!rng.bernoulli(p)) kept.push_back(e);
  }
  return SemanticGraph(graph.node_count(), std::move(kept), graph.labels(), graph.holdout_mask());
}

// ---------------------------------------------------------------------------
// Model.

template <typename T = float>
class GnnModel {
 public:
  GnnModel() = default;

  explicit GnnModel(const GnnConfig& config) : config_(config) {
    config_.validate();
    Rng rng(config_.seed, 0x494e4954);
    const auto hidden = static_cast<Index>(config_.hidden_dim);
    for (std::size_t l = 0; l < config_.layers; ++l) {
      const auto in = static_cast<Index>(l == 0 ? config_.input_dim : config_.hidden_dim);
      const std::string p = "layer" + std::to_string(l) + ".";
      switch (config_.architecture) {
        case Architecture::gcn:
          add_param(p + "weight", glorot_uniform<T>(in, hidden, rng));
          add_param(p + "bias", Matrix<T>::Zero(1, hidden));
          break;
        case Architecture::gin: {
          const auto mid = static_cast<Index>(config_.gin_hidden);
          add_param(p + "eps", Matrix<T>::Zero(1, 1));
          add_param(p + "mlp1.weight", glorot_uniform<T>(in, mid, rng));
          add_param(p + "mlp1.bias", Matrix<T>::Zero(1, mid));
          add_param(p + "mlp2.weight", glorot_uniform<T>(mid, hidden, rng));
          add_param(p + "mlp2.bias", Matrix<T>::Zero(1, hidden));
          break;
        }
        case Architecture::sage:
          add_param(p + "self.weight", glorot_uniform<T>(in, hidden, rng));
          add_param(p + "neighbor.weight", glorot_uniform<T>(in, hidden, rng));
          add_param(p + "bias", Matrix<T>::Zero(1, hidden));
          break;
        case Architecture::gat:
          for (std::size_t h = 0; h < config_.gat_heads; ++h) {
            const std::string q = p + "head" + std::to_string(h) + ".";
            add_param(q + "weight", glorot_uniform<T>(in, hidden, rng));
            add_param(q + "att_src", glorot_uniform<T>(hidden, 1, rng));
            add_param(q + "att_dst", glorot_uniform<T>(hidden, 1, rng));
          }
          add_param(p + "bias", Matrix<T>::Zero(1, hidden));
          break;
      }
    }
    add_param("output.weight", glorot_uniform<T>(hidden, static_cast<Index>(config_.classes), rng));
    add_param("output.bias", Matrix<T>::Zero(1, static_cast<Index>(config_.classes)));
  }

  GnnModel(const GnnModel& other) : config_(other.config_), params_(other.params_) { reindex(); }
  GnnModel& operator=(const GnnModel& other) {
    config_ = other.config_;
    params_ = other.params_;
    reindex();
    return *this;
  }
  GnnModel(GnnModel&&) = default;
  GnnModel& operator=(GnnModel&&) = default;

  const GnnConfig& config() const { return config_; }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }
  const std::vector<Parameter<T>>& named_parameters() const { return params_; }

  Parameter<T>& param(const std::string& name) {
    const auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("model has no parameter " + name);
    return params_[it->second];
  }

  /// One message-passing layer applied to node features `h`.
  Tensor<T> layer_forward(Tape<T>& tape, std::size_t layer, const Tensor<T>& h, const GraphOperators<T>& ops) {
    if (static_cast<std::size_t>(h.rows()) != ops.nodes) {
      throw DataError("layer input has " + std::to_string(h.rows()) + " rows for " + std::to_string(ops.nodes) +
                      " graph nodes");
    }
    const std::string p = "layer" + std::to_string(layer) + ".";
    auto P = [&](const std::string& name) { return tape.parameter(param(p + name)); };
    switch (config_.architecture) {
      case Architecture::gcn: {
        auto z = spmm(ops.normalized, matmul(h, P("weight")));
        return activate(add(z, P("bias")));
      }
      case Architecture::gin: {
        auto self = add(h, scale_by(h, P("eps")));
        auto agg = add(self, spmm(ops.weighted, h));
        auto mid = activate(add(matmul(agg, P("mlp1.weight")), P("mlp1.bias")));
        return add(matmul(mid, P("mlp2.weight")), P("mlp2.bias"));
      }
      case Architecture::sage: {
        auto self = matmul(h, P("self.weight"));
        auto nbr = matmul(spmm(ops.mean, h), P("neighbor.weight"));
        return activate(add(add(self, nbr), P("bias")));
      }
      case Architecture::gat: {
        Tensor<T> total;
        for (std::size_t k = 0; k < config_.gat_heads; ++k) {
          const std::string q = "head" + std::to_string(k) + ".";
          auto z = matmul(h, P(q + "weight"));
          auto src = matmul(z, P(q + "att_src"));
          auto dst = matmul(z, P(q + "att_dst"));
          auto head = attention_aggregate(z, src, dst, ops.attention);
          total = k == 0 ? head : add(total, head);
        }
        if (config_.gat_heads > 1) total = scale(total, T(1) / static_cast<T>(config_.gat_heads));
        return activate(add(total, P("bias")));
      }
    }
    throw UsageError("unknown architecture");
  }

  /// Class logits (nodes x classes); apply sigmoid for per-class scores.
  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& features, const GraphOperators<T>& ops) {
    if (static_cast<std::size_t>(features.cols()) != config_.input_dim) {
      throw DataError("feature dimension " + std::to_string(features.cols()) + " does not match model input dimension " +
                      std::to_string(config_.input_dim));
    }
    Tensor<T> h = features;
    for (std::size_t l = 0; l < config_.layers; ++l) h = layer_forward(tape, l, h, ops);
    return add(matmul(h, tape.parameter(param("output.weight"))), tape.parameter(param("output.bias")));
  }

  Matrix<T> scores(const Matrix<T>& features, const GraphOperators<T>& ops) {
    Tape<T> tape;
    auto logits = forward(tape, tape.constant(features), ops);
    return logits.value().unaryExpr([](T x) { return stable_sigmoid(x); });
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.meta = {{"kind", "gnn"}, {"config", config_.to_json()}};
    for (const auto& p : params_) ckpt.tensors.push_back({p.name, p.value.template cast<float>()});
    return ckpt;
  }

  static GnnModel from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.meta.value("kind", "") != "gnn") throw FormatError("checkpoint does not hold a GNN model");
    GnnModel model(GnnConfig::from_json(ckpt.meta.at("config")));
    if (ckpt.tensors.size() != model.params_.size()) throw FormatError("checkpoint tensor count does not match config");
    for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
      auto& p = model.params_[i];
      const auto& t = ckpt.tensors[i];
      if (t.name != p.name || t.value.rows() != p.value.rows() || t.value.cols() != p.value.cols()) {
        throw FormatError("checkpoint tensor " + t.name + " does not match expected " + p.name);
      }
      p.value = t.value.template cast<T>();
    }
    return model;
  }

 private:
  Tensor<T> activate(const Tensor<T>& x) const {
    return config_.activation == Activation::tanh ? sesame::tanh(x) : relu(x);
  }

  void add_param(std::string name, Matrix<T> value) {
    index_[name] = params_.size();
    params_.emplace_back(std::move(name), std::move(value));
  }

  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < params_.size(); ++i) index_[params_[i].name] = i;
  }

  GnnConfig config_;
  std::vector<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

template <typename T>
Matrix<T> to_matrix(const EmbeddingMatrix& m) {
  Matrix<T> out(static_cast<Index>(m.count), static_cast<Index>(m.dim));
  for (std::size_t r = 0; r < m.count; ++r) {
    for (std::size_t c = 0; c < m.dim; ++c) out(static_cast<Index>(r), static_cast<Index>(c)) = static_cast<T>(m.data[r * m.dim + c]);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Training.

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded random split of the labeled, non-holdout nodes.
inline DataSplit validation_split(const std::vector<int>& labels, const std::vector<bool>& holdout, double fraction,
                                  std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw UsageError("validation fraction must lie in [0, 1)");
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0 && !(i < holdout.size() && holdout[i])) labeled.push_back(i);
  }
  Rng rng(seed, 0x53504c54);
  rng.shuffle(labeled);
  auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(labeled.size())));
  if (fraction > 0.0 && n_val == 0 && labeled.size() >= 2) n_val = 1;
  if (n_val >= labeled.size()) n_val = labeled.empty() ? 0 : labeled.size() - 1;
  DataSplit split;
  split.validation.assign(labeled.begin(), labeled.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(labeled.begin() + static_cast<std::ptrdiff_t>(n_val), labeled.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

inline DataSplit validation_split(const SemanticGraph& graph, double fraction, std::uint64_t seed) {
  return validation_split(graph.labels(), graph.holdout_mask(), fraction, seed);
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // loss of the optimization step (edges dropped)
  double val_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double train_ofa = 0.0;
  double val_ofa = 0.0;

  nlohmann::json to_json() const {
    return {{"epoch", epoch},         {"train_loss", train_loss}, {"val_loss", val_loss},
            {"train_accuracy", train_accuracy}, {"val_accuracy", val_accuracy}, {"train_ofa", train_ofa},
            {"val_ofa", val_ofa}};
  }
};

struct TrainResult {
  GnnModel<float> model;  // parameters of the best-validation-loss epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  DataSplit split;
};

namespace detail {

template <typename T>
Matrix<T> ordinal_targets(const std::vector<int>& labels, std::size_t classes) {
  Matrix<T> targets = Matrix<T>::Zero(static_cast<Index>(labels.size()), static_cast<Index>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    const auto bits = encode_ordinal(labels[i], classes);
    for (std::size_t c = 0; c < classes; ++c) targets(static_cast<Index>(i), static_cast<Index>(c)) = bits[c];
  }
  return targets;
}

template <typename T>
std::vector<int> decode_rows(const Matrix<T>& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Index r = 0; r < scores.rows(); ++r) {
    out[static_cast<std::size_t>(r)] =
        decode_ordinal(std::span<const T>(scores.data() + r * scores.cols(), static_cast<std::size_t>(scores.cols())));
  }
  return out;
}

template <typename T>
double bce_value(const Matrix<T>& logits, const Matrix<T>& targets, const std::vector<std::size_t>& rows) {
  double total = 0.0;
  for (std::size_t r : rows) {
    for (Index c = 0; c < logits.cols(); ++c) {
      const double x = logits(static_cast<Index>(r), c);
      total += std::max(x, 0.0) - x * targets(static_cast<Index>(r), c) + std::log1p(std::exp(-std::abs(x)));
    }
  }
  return total / (static_cast<double>(rows.size()) * static_cast<double>(logits.cols()));
}

}  // namespace detail

/// Full-batch training with drop-edge, minimizing mean BCE between the
/// sigmoid outputs and cumulative ordinal targets over the training split.
inline TrainResult train_gnn(const SemanticGraph& graph, const EmbeddingMatrix& features, const GnnConfig& config,
                             const DataSplit& split) {
  config.validate();
  if (features.count != graph.node_count()) throw DataError("feature rows do not match graph node count");
  if (features.dim != config.input_dim) {
    throw DataError("feature dimension " + std::to_string(features.dim) + " does not match configured input dimension " +
                    std::to_string(config.input_dim));
  }
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    if (graph.is_holdout(i)) continue;
    const int label = graph.label(i);
    if (label < 0) throw DataError("training node " + std::to_string(i) + " has no label");
    if (static_cast<std::size_t>(label) >= config.classes) {
      throw DataError("label " + std::to_string(label) + " of node " + std::to_string(i) + " exceeds class count");
    }
  }
  if (split.train.empty()) throw DataError("no training nodes");

  TrainResult result;
  result.split = split;
  result.model = GnnModel<float>(config);
  GnnModel<float> model(config);
  Adam<float> adam(model.parameters(),
                   AdamConfig{.learning_rate = config.learning_rate, .weight_decay = config.weight_decay});

  const Matrix<float> x = detail::to_matrix<float>(features);
  const Matrix<float> targets = detail::ordinal_targets<float>(graph.labels(), config.classes);
  const std::vector<Index> train_rows(split.train.begin(), split.train.end());
  const auto full_ops = GraphOperators<float>::build(graph);

  std::vector<int> train_truth, val_truth;
  for (std::size_t i : split.train) train_truth.push_back(graph.label(i));
  for (std::size_t i : split.validation) val_truth.push_back(graph.label(i));

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    try {
      const auto ops = config.drop_edge_p > 0.0
                           ? GraphOperators<float>::build(drop_edge(graph, config.drop_edge_p, config.seed, epoch))
                           : full_ops;
      Tape<float> tape;
      auto logits = model.forward(tape, tape.constant(x), ops);
      auto loss = bce_with_logits(logits, targets, train_rows);
      rec.train_loss = loss.value()(0, 0);
      adam.zero_grad();
      tape.backward(loss);
      adam.step();

      Tape<float> eval;
      auto eval_logits = model.forward(eval, eval.constant(x), full_ops);
      const Matrix<float>& lv = eval_logits.value();
      const Matrix<float> scores = lv.unaryExpr([](float v) { return stable_sigmoid(v); });
      const auto pred = detail::decode_rows(scores);
      std::vector<int> train_pred, val_pred;
      for (std::size_t i : split.train) train_pred.push_back(pred[i]);
      for (std::size_t i : split.validation) val_pred.push_back(pred[i]);
      rec.train_accuracy = accuracy(train_pred, train_truth);
      rec.train_ofa = ofa(train_pred, train_truth);
      const double train_eval_loss = detail::bce_value(lv, targets, split.train);
      if (!split.validation.empty()) {
        rec.val_loss = detail::bce_value(lv, targets, split.validation);
        rec.val_accuracy = accuracy(val_pred, val_truth);
        rec.val_ofa = ofa(val_pred, val_truth);
      } else {
        rec.val_loss = train_eval_loss;
      }
    } catch (const NumericError& e) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
    }
    if (rec.val_loss < result.best_loss) {
      result.best_loss = rec.val_loss;
      result.best_epoch = epoch;
      result.model = model;
    }
    result.history.push_back(rec);
  }
  if (config.epochs == 0) result.model = model;
  return result;
}

inline TrainResult train_gnn(const SemanticGraph& graph, const EmbeddingMatrix& features, const GnnConfig& config) {
  return train_gnn(graph, features, config, validation_split(graph, config.val_fraction, config.seed));
}

struct Prediction {
  std::size_t node = 0;
  int predicted_class = 0;
  std::vector<double> scores;
};

/// Forward pass over the whole graph; returns holdout nodes only, in node order.
inline std::vector<Prediction> predict(GnnModel<float>& model, const SemanticGraph& graph,
                                       const EmbeddingMatrix& features) {
  if (features.count != graph.node_count()) throw DataError("feature rows do not match graph node count");
  if (features.dim != model.config().input_dim) {
    throw DataError("feature dimension " + std::to_string(features.dim) + " does not match model input dimension " +
                    std::to_string(model.config().input_dim));
  }
  const auto ops = GraphOperators<float>::build(graph);
  const Matrix<float> scores = model.scores(detail::to_matrix<float>(features), ops);
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    if (!graph.is_holdout(i)) continue;
    Prediction p;
    p.node = i;
    p.scores.assign(scores.row(static_cast<Index>(i)).data(), scores.row(static_cast<Index>(i)).data() + scores.cols());
    p.predicted_class = decode_ordinal(p.scores);
    out.push_back(std::move(p));
  }
  return out;
}

/// Decoded classes for every node (no holdout filtering).
inline std::vector<int> predict_all(GnnModel<float>& model, const SemanticGraph& graph, const EmbeddingMatrix& features) {
  const auto ops = GraphOperators<float>::build(graph);
  return detail::decode_rows(model.scores(detail::to_matrix<float>(features), ops));
}

}  // namespace sesame
