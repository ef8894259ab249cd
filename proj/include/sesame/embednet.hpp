#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sesame/checkpoint.hpp"
#include "sesame/corpus.hpp"
#include "sesame/error.hpp"
#include "sesame/random.hpp"
#include "sesame/tensor.hpp"

namespace sesame {

struct RefinerConfig {
  double temperature = 0.1;
  std::size_t batch_size = 64;
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
};

/// Supervised contrastive loss of a batch of unit-norm rows. Labels define
/// the positives; anchors without a positive contribute nothing.
inline double contrastive_loss(const Matrix<double>& embeddings, const std::vector<int>& labels, double temperature) {
  if (embeddings.rows() < 2) throw DataError("contrastive loss needs a batch of at least 2");
  if (static_cast<Index>(labels.size()) != embeddings.rows()) {
    throw DataError("contrastive loss: label count does not match batch size");
  }
  if (!(temperature > 0.0)) throw UsageError("contrastive loss: temperature must be positive");
  for (Index r = 0; r < embeddings.rows(); ++r) {
    const double norm = embeddings.row(r).norm();
    if (std::abs(norm - 1.0) > 1e-3) {
      throw DataError("contrastive loss: row " + std::to_string(r) + " is not L2-normalized (norm " +
                      std::to_string(norm) + ")");
    }
  }
  return detail::contrastive_terms(embeddings, labels, temperature).loss;
}

/// Two-layer MLP dim -> dim -> dim with a relu in between; outputs are
/// L2-normalized rows.
template <typename T = float>
class RefinerModel {
 public:
  RefinerModel() = default;

  RefinerModel(std::size_t dim, std::uint64_t seed) : dim_(dim) {
    Rng rng(seed, 0x52454649);
    const auto d = static_cast<Index>(dim);
    w1_ = Parameter<T>("refiner.w1", glorot_uniform<T>(d, d, rng));
    b1_ = Parameter<T>("refiner.b1", Matrix<T>::Zero(1, d));
    w2_ = Parameter<T>("refiner.w2", glorot_uniform<T>(d, d, rng));
    b2_ = Parameter<T>("refiner.b2", Matrix<T>::Zero(1, d));
  }

  std::size_t dim() const { return dim_; }

  std::vector<Parameter<T>*> parameters() { return {&w1_, &b1_, &w2_, &b2_}; }

  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& x) {
    auto h = relu(add(matmul(x, tape.parameter(w1_)), tape.parameter(b1_)));
    auto out = add(matmul(h, tape.parameter(w2_)), tape.parameter(b2_));
    return l2_normalize_rows(out);
  }

  Matrix<T> forward_values(const Matrix<T>& x) const {
    Matrix<T> h = ((x * w1_.value).rowwise() + b1_.value.row(0)).cwiseMax(T(0));
    Matrix<T> out = (h * w2_.value).rowwise() + b2_.value.row(0);
    for (Index r = 0; r < out.rows(); ++r) {
      const double n = std::sqrt(out.row(r).template cast<double>().squaredNorm() + 1e-12);
      out.row(r) = (out.row(r).template cast<double>() / n).template cast<T>();
    }
    return out;
  }

  EmbeddingMatrix apply(const EmbeddingMatrix& input) const {
    if (input.dim != dim_) {
      throw DataError("refiner expects dimension " + std::to_string(dim_) + ", got " + std::to_string(input.dim));
    }
    Matrix<T> x(static_cast<Index>(input.count), static_cast<Index>(input.dim));
    for (std::size_t r = 0; r < input.count; ++r) {
      for (std::size_t c = 0; c < input.dim; ++c) x(static_cast<Index>(r), static_cast<Index>(c)) = input.data[r * input.dim + c];
    }
    const Matrix<T> y = forward_values(x);
    EmbeddingMatrix out(input.count, input.dim);
    for (std::size_t r = 0; r < input.count; ++r) {
      for (std::size_t c = 0; c < input.dim; ++c) {
        out.data[r * input.dim + c] = static_cast<float>(y(static_cast<Index>(r), static_cast<Index>(c)));
      }
    }
    return out;
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.meta = {{"kind", "refiner"}, {"dim", dim_}};
    for (const auto* p : {&w1_, &b1_, &w2_, &b2_}) ckpt.tensors.push_back({p->name, p->value.template cast<float>()});
    return ckpt;
  }

  static RefinerModel from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.meta.value("kind", "") != "refiner") throw FormatError("checkpoint does not hold a refiner model");
    RefinerModel m;
    m.dim_ = ckpt.meta.at("dim").template get<std::size_t>();
    const auto d = static_cast<Index>(m.dim_);
    auto load = [&](Parameter<T>& p, const std::string& name, Index rows, Index cols) {
      const auto& v = ckpt.tensor(name);
      if (v.rows() != rows || v.cols() != cols) throw FormatError("refiner tensor " + name + " has wrong shape");
      p = Parameter<T>(name, v.template cast<T>());
    };
    load(m.w1_, "refiner.w1", d, d);
    load(m.b1_, "refiner.b1", 1, d);
    load(m.w2_, "refiner.w2", d, d);
    load(m.b2_, "refiner.b2", 1, d);
    return m;
  }

 private:
  std::size_t dim_ = 0;
  Parameter<T> w1_, b1_, w2_, b2_;
};

struct RefinerResult {
  RefinerModel<float> model;
  EmbeddingMatrix refined;
  std::vector<double> epoch_loss;
  std::vector<int> excluded_classes;  // fewer than 2 labeled members
};

/// Trains the refiner on rows with label >= 0 using class-balanced batches
/// and returns the model together with all rows passed through it.
inline RefinerResult refine_embeddings(const EmbeddingMatrix& embeddings, const std::vector<int>& labels,
                                       const RefinerConfig& config) {
  if (labels.size() != embeddings.count) throw DataError("refiner: label count does not match embedding count");
  if (!(config.temperature > 0.0)) throw UsageError("refiner temperature must be positive");
  if (config.batch_size < 2) throw UsageError("refiner batch size must be at least 2");

  RefinerResult result;
  result.model = RefinerModel<float>(embeddings.dim, config.seed);

  std::map<int, std::vector<std::size_t>> members;
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) {
      members[labels[i]].push_back(i);
      ++labeled;
    }
  }
  std::vector<int> eligible;
  for (const auto& [label, rows] : members) {
    if (rows.size() >= 2) {
      eligible.push_back(label);
    } else {
      result.excluded_classes.push_back(label);
    }
  }

  if (!eligible.empty() && config.epochs > 0) {
    Rng rng(config.seed, 0x42415443);
    Adam<float> adam(result.model.parameters(), AdamConfig{.learning_rate = config.learning_rate});
    const std::size_t per_class = std::max<std::size_t>(2, config.batch_size / eligible.size());
    const std::size_t steps = std::max<std::size_t>(1, (labeled + config.batch_size - 1) / config.batch_size);

    // Each class draws from its own shuffled pool and reshuffles when exhausted.
    std::map<int, std::vector<std::size_t>> pools;
    std::map<int, std::size_t> cursor;
    for (int label : eligible) {
      pools[label] = members[label];
      rng.shuffle(pools[label]);
      cursor[label] = 0;
    }

    const auto dim = static_cast<Index>(embeddings.dim);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      double epoch_total = 0.0;
      for (std::size_t step = 0; step < steps; ++step) {
        std::vector<std::size_t> rows;
        std::vector<int> batch_labels;
        for (int label : eligible) {
          auto& pool = pools[label];
          const std::size_t take = std::min(per_class, pool.size());
          for (std::size_t t = 0; t < take; ++t) {
            if (cursor[label] == pool.size()) {
              rng.shuffle(pool);
              cursor[label] = 0;
            }
            rows.push_back(pool[cursor[label]++]);
            batch_labels.push_back(label);
          }
        }
        Matrix<float> x(static_cast<Index>(rows.size()), dim);
        for (std::size_t r = 0; r < rows.size(); ++r) {
          const auto src = embeddings.row(rows[r]);
          for (Index c = 0; c < dim; ++c) x(static_cast<Index>(r), c) = src[static_cast<std::size_t>(c)];
        }
        Tape<float> tape;
        auto z = result.model.forward(tape, tape.constant(std::move(x)));
        auto loss = supervised_contrastive(z, batch_labels, config.temperature);
        adam.zero_grad();
        tape.backward(loss);
        adam.step();
        epoch_total += loss.value()(0, 0);
      }
      result.epoch_loss.push_back(epoch_total / static_cast<double>(steps));
    }
  }

  result.refined = result.model.apply(embeddings);
  return result;
}

struct ClassCosines {
  double intra = 0.0;
  double inter = 0.0;
};

/// Mean pairwise cosine between rows of the same label and of different labels.
inline ClassCosines mean_class_cosines(const EmbeddingMatrix& m, const std::vector<int>& labels) {
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  std::vector<double> norms(m.count);
  for (std::size_t i = 0; i < m.count; ++i) {
    double s = 0.0;
    for (float v : m.row(i)) s += static_cast<double>(v) * v;
    norms[i] = std::sqrt(s);
  }
  for (std::size_t i = 0; i < m.count; ++i) {
    for (std::size_t j = i + 1; j < m.count; ++j) {
      double dot = 0.0;
      const auto a = m.row(i);
      const auto b = m.row(j);
      for (std::size_t c = 0; c < m.dim; ++c) dot += static_cast<double>(a[c]) * b[c];
      const double cos = dot / (norms[i] * norms[j]);
      if (labels[i] == labels[j]) {
        intra += cos;
        ++n_intra;
      } else {
        inter += cos;
        ++n_inter;
      }
    }
  }
  return {n_intra ? intra / static_cast<double>(n_intra) : 0.0, n_inter ? inter / static_cast<double>(n_inter) : 0.0};
}

}  // namespace sesame
