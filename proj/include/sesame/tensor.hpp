#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "sesame/error.hpp"
#include "sesame/random.hpp"

namespace sesame {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using SparseMatrix = Eigen::SparseMatrix<T, Eigen::RowMajor>;

using Index = Eigen::Index;

/// Trainable matrix with its accumulated gradient.
template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;

  Parameter() = default;
  Parameter(std::string n, Matrix<T> v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix<T>::Zero(value.rows(), value.cols());
  }
};

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  const Matrix<T>& value() const { return tape_->value(id_); }
  const Matrix<T>& grad() const { return tape_->grad(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Tape<T>* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape<T>;
  Tensor(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

namespace detail {

inline std::string shape_of(Index r, Index c) { return "(" + std::to_string(r) + "x" + std::to_string(c) + ")"; }

template <typename T>
std::string shape_of(const Tensor<T>& t) {
  return shape_of(t.rows(), t.cols());
}

}  // namespace detail

/// Reverse-mode recording of one forward computation. Single-threaded;
/// tensors reference the tape, so it is neither copyable nor movable.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(const Matrix<T>& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor<T> constant(Matrix<T> value) { return push(std::move(value), false, nullptr, {}, "constant"); }

  Tensor<T> parameter(Parameter<T>& p) { return push(p.value, true, &p, {}, "parameter"); }

  /// Adds an op result; `backward` runs only when some input needs gradients.
  Tensor<T> record(std::string_view op, Matrix<T> value, std::initializer_list<Tensor<T>> inputs,
                   Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) {
      if (in.tape_ != this) throw UsageError(std::string(op) + ": operand recorded on a different tape");
      needs = needs || nodes_[in.id_].requires_grad;
    }
    return push(std::move(value), needs, nullptr, needs ? std::move(backward) : Backward{}, op);
  }

  const Matrix<T>& value(std::size_t id) const { return nodes_[id].value; }

  const Matrix<T>& grad(std::size_t id) const {
    auto& node = nodes_[id];
    if (node.grad.size() == 0) node.grad = Matrix<T>::Zero(node.value.rows(), node.value.cols());
    return node.grad;
  }

  bool requires_grad(const Tensor<T>& t) const { return nodes_[t.id_].requires_grad; }

  template <typename Expr>
  void accumulate(const Tensor<T>& t, const Expr& delta) {
    auto& node = nodes_[t.id_];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = delta;
    } else {
      node.grad += delta;
    }
  }

  /// Back-propagates from a 1x1 loss and adds the result into every
  /// parameter's grad buffer.
  void backward(const Tensor<T>& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) {
      throw UsageError("backward needs a scalar loss, got " + detail::shape_of(loss));
    }
    if (!nodes_[loss.id_].requires_grad) return;
    nodes_[loss.id_].grad = Matrix<T>::Ones(1, 1);
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      auto& node = nodes_[i];
      if (node.grad.size() == 0) continue;
      if (node.backward) node.backward(node.grad);
      if (node.param) node.param->grad += node.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix<T> value;
    mutable Matrix<T> grad;
    Backward backward;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
  };

  Tensor<T> push(Matrix<T> value, bool requires_grad, Parameter<T>* param, Backward backward, std::string_view op) {
    if (!value.allFinite()) throw NumericError("non-finite value produced by " + std::string(op));
    nodes_.push_back(Node{std::move(value), Matrix<T>(), std::move(backward), param, requires_grad});
    return Tensor<T>(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Forward ops. Each records its own backward closure.

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) {
    throw DataError("matmul: shape mismatch " + detail::shape_of(a) + " x " + detail::shape_of(b));
  }
  Tape<T>* tape = a.tape();
  Matrix<T> out = a.value() * b.value();
  return tape->record("matmul", std::move(out), {a, b}, [tape, a, b](const Matrix<T>& g) {
    if (tape->requires_grad(a)) tape->accumulate(a, g * b.value().transpose());
    if (tape->requires_grad(b)) tape->accumulate(b, a.value().transpose() * g);
  });
}

/// Elementwise sum; `b` may also be a 1 x cols row or rows x 1 column that
/// is broadcast across `a`.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Tape<T>* tape = a.tape();
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    Matrix<T> out = a.value() + b.value();
    return tape->record("add", std::move(out), {a, b}, [tape, a, b](const Matrix<T>& g) {
      tape->accumulate(a, g);
      tape->accumulate(b, g);
    });
  }
  if (b.rows() == 1 && b.cols() == a.cols()) {
    Matrix<T> out = a.value().rowwise() + b.value().row(0);
    return tape->record("add", std::move(out), {a, b}, [tape, a, b](const Matrix<T>& g) {
      tape->accumulate(a, g);
      if (tape->requires_grad(b)) tape->accumulate(b, g.colwise().sum());
    });
  }
  if (b.cols() == 1 && b.rows() == a.rows()) {
    Matrix<T> out = a.value().colwise() + b.value().col(0);
    return tape->record("add", std::move(out), {a, b}, [tape, a, b](const Matrix<T>& g) {
      tape->accumulate(a, g);
      if (tape->requires_grad(b)) tape->accumulate(b, g.rowwise().sum());
    });
  }
  throw DataError("add: shape mismatch " + detail::shape_of(a) + " + " + detail::shape_of(b));
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DataError("sub: shape mismatch " + detail::shape_of(a) + " - " + detail::shape_of(b));
  }
  Tape<T>* tape = a.tape();
  Matrix<T> out = a.value() - b.value();
  return tape->record("sub", std::move(out), {a, b}, [tape, a, b](const Matrix<T>& g) {
    tape->accumulate(a, g);
    if (tape->requires_grad(b)) tape->accumulate(b, -g);
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Tape<T>* tape = a.tape();
  Matrix<T> out = a.value() * factor;
  return tape->record("scale", std::move(out), {a},
                      [tape, a, factor](const Matrix<T>& g) { tape->accumulate(a, g * factor); });
}

/// a * s for a trainable 1x1 tensor s.
template <typename T>
Tensor<T> scale_by(const Tensor<T>& a, const Tensor<T>& s) {
  if (s.rows() != 1 || s.cols() != 1) throw DataError("scale_by: factor must be 1x1, got " + detail::shape_of(s));
  Tape<T>* tape = a.tape();
  Matrix<T> out = a.value() * s.value()(0, 0);
  return tape->record("scale_by", std::move(out), {a, s}, [tape, a, s](const Matrix<T>& g) {
    if (tape->requires_grad(a)) tape->accumulate(a, g * s.value()(0, 0));
    if (tape->requires_grad(s)) {
      const double dot = (g.template cast<double>().cwiseProduct(a.value().template cast<double>())).sum();
      Matrix<T> ds(1, 1);
      ds(0, 0) = static_cast<T>(dot);
      tape->accumulate(s, ds);
    }
  });
}

template <typename T>
Tensor<T> elementwise_mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DataError("elementwise_mul: shape mismatch " + detail::shape_of(a) + " * " + detail::shape_of(b));
  }
  Tape<T>* tape = a.tape();
  Matrix<T> out = a.value().cwiseProduct(b.value());
  return tape->record("elementwise_mul", std::move(out), {a, b}, [tape, a, b](const Matrix<T>& g) {
    if (tape->requires_grad(a)) tape->accumulate(a, g.cwiseProduct(b.value()));
    if (tape->requires_grad(b)) tape->accumulate(b, g.cwiseProduct(a.value()));
  });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  Tape<T>* tape = a.tape();
  Matrix<T> out = a.value().array().tanh().matrix();
  const std::size_t id = tape->size();
  return tape->record("tanh", std::move(out), {a}, [tape, a, id](const Matrix<T>& g) {
    const auto& y = tape->value(id);
    tape->accumulate(a, (g.array() * (T(1) - y.array().square())).matrix());
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  Tape<T>* tape = a.tape();
  Matrix<T> out = a.value().cwiseMax(T(0));
  return tape->record("relu", std::move(out), {a}, [tape, a](const Matrix<T>& g) {
    tape->accumulate(a, (a.value().array() > T(0)).select(g, T(0)).matrix());
  });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope = T(0.2)) {
  Tape<T>* tape = a.tape();
  Matrix<T> out = (a.value().array() > T(0)).select(a.value(), a.value() * slope).matrix();
  return tape->record("leaky_relu", std::move(out), {a}, [tape, a, slope](const Matrix<T>& g) {
    tape->accumulate(a, (a.value().array() > T(0)).select(g, g * slope).matrix());
  });
}

/// Logistic function kept strictly inside (0, 1) even where it saturates.
template <typename T>
T stable_sigmoid(T x) {
  constexpr T lo = std::numeric_limits<T>::min();
  constexpr T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
  if (x >= T(0)) return std::min(T(1) / (T(1) + std::exp(-x)), hi);
  const T e = std::exp(x);
  return std::max(e / (T(1) + e), lo);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  Tape<T>* tape = a.tape();
  Matrix<T> out = a.value().unaryExpr([](T x) { return stable_sigmoid(x); });
  const std::size_t id = tape->size();
  return tape->record("sigmoid", std::move(out), {a}, [tape, a, id](const Matrix<T>& g) {
    const auto& y = tape->value(id);
    tape->accumulate(a, (g.array() * y.array() * (T(1) - y.array())).matrix());
  });
}

template <typename T>
Tensor<T> row_softmax(const Tensor<T>& a) {
  Tape<T>* tape = a.tape();
  Matrix<T> out(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    const T shift = a.value().row(r).maxCoeff();
    double total = 0.0;
    for (Index c = 0; c < a.cols(); ++c) {
      out(r, c) = std::exp(a.value()(r, c) - shift);
      total += out(r, c);
    }
    out.row(r) /= static_cast<T>(total);
  }
  const std::size_t id = tape->size();
  return tape->record("row_softmax", std::move(out), {a}, [tape, a, id](const Matrix<T>& g) {
    const auto& y = tape->value(id);
    Matrix<T> dx(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      const T dot = static_cast<T>((g.row(r).template cast<double>().cwiseProduct(y.row(r).template cast<double>())).sum());
      dx.row(r) = y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    tape->accumulate(a, dx);
  });
}

/// Column means, 1 x cols.
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& a) {
  if (a.rows() == 0) throw DataError("mean_rows: empty input");
  Tape<T>* tape = a.tape();
  Matrix<T> out = (a.value().template cast<double>().colwise().sum() / static_cast<double>(a.rows())).template cast<T>();
  return tape->record("mean_rows", std::move(out), {a}, [tape, a](const Matrix<T>& g) {
    Matrix<T> dx = g.replicate(a.rows(), 1) / static_cast<T>(a.rows());
    tape->accumulate(a, dx);
  });
}

template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows()) {
    throw DataError("concat_cols: row mismatch " + detail::shape_of(a) + " | " + detail::shape_of(b));
  }
  Tape<T>* tape = a.tape();
  Matrix<T> out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  return tape->record("concat_cols", std::move(out), {a, b}, [tape, a, b](const Matrix<T>& g) {
    if (tape->requires_grad(a)) tape->accumulate(a, g.leftCols(a.cols()));
    if (tape->requires_grad(b)) tape->accumulate(b, g.rightCols(b.cols()));
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  Tape<T>* tape = a.tape();
  Matrix<T> out(1, 1);
  out(0, 0) = static_cast<T>(a.value().template cast<double>().sum());
  return tape->record("sum", std::move(out), {a}, [tape, a](const Matrix<T>& g) {
    tape->accumulate(a, Matrix<T>::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.value().size() == 0) throw DataError("mean: empty input");
  const auto count = static_cast<double>(a.value().size());
  Tape<T>* tape = a.tape();
  Matrix<T> out(1, 1);
  out(0, 0) = static_cast<T>(a.value().template cast<double>().sum() / count);
  return tape->record("mean", std::move(out), {a}, [tape, a, count](const Matrix<T>& g) {
    tape->accumulate(a, Matrix<T>::Constant(a.rows(), a.cols(), static_cast<T>(g(0, 0) / count)));
  });
}

/// Constant sparse matrix times tensor.
template <typename T>
Tensor<T> spmm(std::shared_ptr<const SparseMatrix<T>> s, const Tensor<T>& a) {
  if (s->cols() != a.rows()) {
    throw DataError("spmm: shape mismatch " + detail::shape_of(s->rows(), s->cols()) + " x " + detail::shape_of(a));
  }
  Tape<T>* tape = a.tape();
  Matrix<T> out = (*s) * a.value();
  return tape->record("spmm", std::move(out), {a},
                      [tape, a, s](const Matrix<T>& g) { tape->accumulate(a, Matrix<T>(s->transpose() * g)); });
}

/// Row-wise x / sqrt(|x|^2 + eps).
template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& a, double eps = 1e-12) {
  Tape<T>* tape = a.tape();
  std::vector<double> norms(static_cast<std::size_t>(a.rows()));
  Matrix<T> out(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    const double n = std::sqrt(a.value().row(r).template cast<double>().squaredNorm() + eps);
    norms[static_cast<std::size_t>(r)] = n;
    out.row(r) = (a.value().row(r).template cast<double>() / n).template cast<T>();
  }
  return tape->record("l2_normalize_rows", std::move(out), {a}, [tape, a, norms](const Matrix<T>& g) {
    Matrix<T> dx(a.rows(), a.cols());
    for (Index r = 0; r < a.rows(); ++r) {
      const double n = norms[static_cast<std::size_t>(r)];
      const auto x = a.value().row(r).template cast<double>();
      const auto gr = g.row(r).template cast<double>();
      const double xg = x.dot(gr);
      dx.row(r) = ((gr - x * (xg / (n * n))) / n).template cast<T>();
    }
    tape->accumulate(a, dx);
  });
}

/// Mean binary cross-entropy between sigmoid(logits) and targets over the
/// listed rows, computed from logits for stability.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Matrix<T>& targets, const std::vector<Index>& rows) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols()) {
    throw DataError("bce_with_logits: target shape " + detail::shape_of(targets.rows(), targets.cols()) +
                    " does not match logits " + detail::shape_of(logits));
  }
  if (rows.empty()) throw DataError("bce_with_logits: no rows selected");
  Tape<T>* tape = logits.tape();
  const auto count = static_cast<double>(rows.size()) * static_cast<double>(logits.cols());
  double total = 0.0;
  for (Index r : rows) {
    for (Index c = 0; c < logits.cols(); ++c) {
      const double x = logits.value()(r, c);
      const double t = targets(r, c);
      total += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    }
  }
  Matrix<T> out(1, 1);
  out(0, 0) = static_cast<T>(total / count);
  return tape->record("bce_with_logits", std::move(out), {logits},
                      [tape, logits, targets, rows, count](const Matrix<T>& g) {
                        Matrix<T> dx = Matrix<T>::Zero(logits.rows(), logits.cols());
                        const double scale = g(0, 0) / count;
                        for (Index r : rows) {
                          for (Index c = 0; c < logits.cols(); ++c) {
                            const double p = stable_sigmoid<double>(logits.value()(r, c));
                            dx(r, c) = static_cast<T>((p - targets(r, c)) * scale);
                          }
                        }
                        tape->accumulate(logits, dx);
                      });
}

// ---------------------------------------------------------------------------
// Supervised contrastive loss.

namespace detail {

struct ContrastiveTerms {
  double loss = 0.0;
  Matrix<double> grad_similarity;  // dL/dS where S = Z Z^T / tau
};

/// For each anchor i with same-label positives P(i):
///   loss_i = -1/|P(i)| * sum_p log softmax_{a != i}(S_i)_p
/// averaged over anchors with a non-empty P(i); 0 if there are none.
template <typename Derived>
ContrastiveTerms contrastive_terms(const Eigen::MatrixBase<Derived>& z, const std::vector<int>& labels,
                                   double temperature) {
  const Index b = z.rows();
  const Matrix<double> zd = z.template cast<double>();
  const Matrix<double> s = (zd * zd.transpose()) / temperature;
  ContrastiveTerms out;
  out.grad_similarity = Matrix<double>::Zero(b, b);

  std::vector<Index> anchors;
  for (Index i = 0; i < b; ++i) {
    for (Index p = 0; p < b; ++p) {
      if (p != i && labels[static_cast<std::size_t>(p)] == labels[static_cast<std::size_t>(i)]) {
        anchors.push_back(i);
        break;
      }
    }
  }
  if (anchors.empty()) return out;
  const double inv_anchors = 1.0 / static_cast<double>(anchors.size());

  std::vector<double> q(static_cast<std::size_t>(b));
  for (Index i : anchors) {
    double shift = -std::numeric_limits<double>::infinity();
    for (Index a = 0; a < b; ++a) {
      if (a != i) shift = std::max(shift, s(i, a));
    }
    double denom = 0.0;
    for (Index a = 0; a < b; ++a) {
      q[static_cast<std::size_t>(a)] = a == i ? 0.0 : std::exp(s(i, a) - shift);
      denom += q[static_cast<std::size_t>(a)];
    }
    const double lse = shift + std::log(denom);
    std::size_t positives = 0;
    double term = 0.0;
    for (Index p = 0; p < b; ++p) {
      if (p != i && labels[static_cast<std::size_t>(p)] == labels[static_cast<std::size_t>(i)]) {
        ++positives;
        term += s(i, p) - lse;
      }
    }
    const double inv_pos = 1.0 / static_cast<double>(positives);
    out.loss += -term * inv_pos * inv_anchors;
    for (Index a = 0; a < b; ++a) {
      if (a == i) continue;
      const bool positive = labels[static_cast<std::size_t>(a)] == labels[static_cast<std::size_t>(i)];
      out.grad_similarity(i, a) = inv_anchors * (q[static_cast<std::size_t>(a)] / denom - (positive ? inv_pos : 0.0));
    }
  }
  return out;
}

}  // namespace detail

template <typename T>
Tensor<T> supervised_contrastive(const Tensor<T>& z, const std::vector<int>& labels, double temperature) {
  if (static_cast<Index>(labels.size()) != z.rows()) throw DataError("contrastive: label count does not match batch");
  if (z.rows() < 2) throw DataError("contrastive: batch needs at least 2 rows");
  if (!(temperature > 0.0)) throw UsageError("contrastive: temperature must be positive");
  Tape<T>* tape = z.tape();
  auto terms = detail::contrastive_terms(z.value(), labels, temperature);
  Matrix<T> out(1, 1);
  out(0, 0) = static_cast<T>(terms.loss);
  auto gs = std::make_shared<Matrix<double>>(std::move(terms.grad_similarity));
  return tape->record("supervised_contrastive", std::move(out), {z}, [tape, z, gs, temperature](const Matrix<T>& g) {
    const Matrix<double> sym = (*gs + gs->transpose()) * (g(0, 0) / temperature);
    tape->accumulate(z, Matrix<T>((sym * z.value().template cast<double>()).template cast<T>()));
  });
}

// ---------------------------------------------------------------------------
// Edge-softmax aggregation for attention layers.

/// Per-node attention neighborhoods in CSR form. Each node's list must
/// include itself; log_weight is added to the attention logit.
struct AttentionNeighborhoods {
  std::vector<std::size_t> offsets{0};
  std::vector<Index> nodes;
  std::vector<double> log_weights;

  std::size_t node_count() const { return offsets.size() - 1; }
};

namespace detail {

/// alpha_uv = softmax over N(u) of leaky_relu(src_u + dst_v) + log w_uv.
template <typename T>
std::vector<double> attention_softmax(const Matrix<T>& src, const Matrix<T>& dst, const AttentionNeighborhoods& nb,
                                      double slope, std::vector<double>* pre_activation = nullptr) {
  std::vector<double> alpha(nb.nodes.size());
  if (pre_activation) pre_activation->resize(nb.nodes.size());
  for (std::size_t u = 0; u < nb.node_count(); ++u) {
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t j = nb.offsets[u]; j < nb.offsets[u + 1]; ++j) {
      const double pre = static_cast<double>(src(static_cast<Index>(u), 0)) + static_cast<double>(dst(nb.nodes[j], 0));
      if (pre_activation) (*pre_activation)[j] = pre;
      alpha[j] = (pre > 0.0 ? pre : slope * pre) + nb.log_weights[j];
      shift = std::max(shift, alpha[j]);
    }
    double total = 0.0;
    for (std::size_t j = nb.offsets[u]; j < nb.offsets[u + 1]; ++j) {
      alpha[j] = std::exp(alpha[j] - shift);
      total += alpha[j];
    }
    for (std::size_t j = nb.offsets[u]; j < nb.offsets[u + 1]; ++j) alpha[j] /= total;
  }
  return alpha;
}

}  // namespace detail

/// out_u = sum_v alpha_uv z_v with alpha from detail::attention_softmax.
/// src and dst are n x 1 per-node logit halves.
template <typename T>
Tensor<T> attention_aggregate(const Tensor<T>& z, const Tensor<T>& src, const Tensor<T>& dst,
                              std::shared_ptr<const AttentionNeighborhoods> nb, double slope = 0.2) {
  const auto n = static_cast<Index>(nb->node_count());
  if (z.rows() != n || src.rows() != n || dst.rows() != n || src.cols() != 1 || dst.cols() != 1) {
    throw DataError("attention_aggregate: shape mismatch z" + detail::shape_of(z) + " src" + detail::shape_of(src) +
                    " dst" + detail::shape_of(dst) + " for " + std::to_string(n) + " nodes");
  }
  Tape<T>* tape = z.tape();
  auto pre = std::make_shared<std::vector<double>>();
  auto alpha = std::make_shared<std::vector<double>>(detail::attention_softmax(src.value(), dst.value(), *nb, slope, pre.get()));
  Matrix<T> out = Matrix<T>::Zero(n, z.cols());
  for (Index u = 0; u < n; ++u) {
    for (std::size_t j = nb->offsets[static_cast<std::size_t>(u)]; j < nb->offsets[static_cast<std::size_t>(u) + 1]; ++j) {
      out.row(u) += static_cast<T>((*alpha)[j]) * z.value().row(nb->nodes[j]);
    }
  }
  return tape->record("attention_aggregate", std::move(out), {z, src, dst},
                      [tape, z, src, dst, nb, alpha, pre, slope](const Matrix<T>& g) {
                        const Index rows = z.rows();
                        Matrix<T> dz = Matrix<T>::Zero(rows, z.cols());
                        Matrix<T> dsrc = Matrix<T>::Zero(rows, 1);
                        Matrix<T> ddst = Matrix<T>::Zero(rows, 1);
                        std::vector<double> dalpha;
                        for (Index u = 0; u < rows; ++u) {
                          const std::size_t begin = nb->offsets[static_cast<std::size_t>(u)];
                          const std::size_t end = nb->offsets[static_cast<std::size_t>(u) + 1];
                          dalpha.assign(end - begin, 0.0);
                          double weighted = 0.0;
                          for (std::size_t j = begin; j < end; ++j) {
                            const Index v = nb->nodes[j];
                            dalpha[j - begin] = g.row(u).template cast<double>().dot(z.value().row(v).template cast<double>());
                            weighted += (*alpha)[j] * dalpha[j - begin];
                            dz.row(v) += static_cast<T>((*alpha)[j]) * g.row(u);
                          }
                          for (std::size_t j = begin; j < end; ++j) {
                            const double de = (*alpha)[j] * (dalpha[j - begin] - weighted);
                            const double dpre = (*pre)[j] > 0.0 ? de : slope * de;
                            dsrc(u, 0) += static_cast<T>(dpre);
                            ddst(nb->nodes[j], 0) += static_cast<T>(dpre);
                          }
                        }
                        tape->accumulate(z, dz);
                        tape->accumulate(src, dsrc);
                        tape->accumulate(dst, ddst);
                      });
}

// ---------------------------------------------------------------------------
// Initialization and optimization.

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
template <typename T>
Matrix<T> glorot_uniform(Index rows, Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix<T> m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<T>(rng.uniform(-bound, bound));
  }
  return m;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

/// Adam with decoupled weight decay: p <- p - lr*wd*p is applied before the
/// moment update of each step.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    for (auto* p : params_) {
      m_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->grad.setZero();
  }

  void step() {
    for (auto* p : params_) {
      if (!p->grad.allFinite()) throw NumericError("non-finite gradient for parameter " + p->name);
    }
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    const auto lr = static_cast<T>(config_.learning_rate);
    const auto decay = static_cast<T>(config_.learning_rate * config_.weight_decay);
    const auto b1 = static_cast<T>(config_.beta1);
    const auto b2 = static_cast<T>(config_.beta2);
    const auto eps = static_cast<T>(config_.epsilon);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& value = params_[i]->value;
      const auto& g = params_[i]->grad;
      if (config_.weight_decay != 0.0) value -= decay * value;
      m_[i] = b1 * m_[i] + (T(1) - b1) * g;
      v_[i] = b2 * v_[i] + (T(1) - b2) * g.cwiseProduct(g);
      value.array() -= lr * (m_[i].array() / static_cast<T>(c1)) / ((v_[i].array() / static_cast<T>(c2)).sqrt() + eps);
    }
  }

  std::size_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Parameter<T>*> params_;
  AdamConfig config_;
  std::vector<Matrix<T>> m_;
  std::vector<Matrix<T>> v_;
  std::size_t steps_ = 0;
};

}  // namespace sesame
