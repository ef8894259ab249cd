#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"

namespace {

using namespace sesame;
using sesame::testing::gradient_check;
using sesame::testing::random_matrix;
using M = Matrix<double>;

const std::vector<Architecture> kArchitectures{Architecture::gcn, Architecture::gin, Architecture::sage,
                                               Architecture::gat};

GnnConfig small_config(Architecture arch, std::size_t input = 4, std::size_t classes = 3) {
  GnnConfig c;
  c.architecture = arch;
  c.layers = 2;
  c.hidden_dim = 5;
  c.gin_hidden = 6;
  c.input_dim = input;
  c.classes = classes;
  c.seed = 3;
  return c;
}

// ---------------------------------------------------------------------------
// Dense per-node reference of one layer, written from the update rules.

M act(const M& x, Activation a) { return a == Activation::tanh ? M(x.array().tanh()) : M(x.cwiseMax(0.0)); }

M reference_layer(GnnModel<double>& model, std::size_t layer, const M& h, const SemanticGraph& g) {
  const auto& cfg = model.config();
  const std::string p = "layer" + std::to_string(layer) + ".";
  const auto n = static_cast<Index>(g.node_count());
  std::vector<std::vector<std::pair<std::size_t, double>>> nbrs(g.node_count());
  for (const auto& e : g.edges()) {
    nbrs[e.u].emplace_back(e.v, e.weight);
    nbrs[e.v].emplace_back(e.u, e.weight);
  }
  std::vector<double> degree(g.node_count(), 1.0);
  for (std::size_t u = 0; u < g.node_count(); ++u) {
    for (auto [v, w] : nbrs[u]) degree[u] += w;
  }
  switch (cfg.architecture) {
    case Architecture::gcn: {
      M agg = M::Zero(n, h.cols());
      for (Index u = 0; u < n; ++u) {
        const auto uu = static_cast<std::size_t>(u);
        agg.row(u) += h.row(u) / degree[uu];
        for (auto [v, w] : nbrs[uu]) agg.row(u) += w / std::sqrt(degree[uu] * degree[v]) * h.row(static_cast<Index>(v));
      }
      M out = agg * model.param(p + "weight").value;
      out.rowwise() += model.param(p + "bias").value.row(0);
      return act(out, cfg.activation);
    }
    case Architecture::gin: {
      const double eps = model.param(p + "eps").value(0, 0);
      M agg = (1.0 + eps) * h;
      for (Index u = 0; u < n; ++u) {
        for (auto [v, w] : nbrs[static_cast<std::size_t>(u)]) agg.row(u) += w * h.row(static_cast<Index>(v));
      }
      M mid = agg * model.param(p + "mlp1.weight").value;
      mid.rowwise() += model.param(p + "mlp1.bias").value.row(0);
      M out = act(mid, cfg.activation) * model.param(p + "mlp2.weight").value;
      out.rowwise() += model.param(p + "mlp2.bias").value.row(0);
      return out;
    }
    case Architecture::sage: {
      M mean = M::Zero(n, h.cols());
      for (Index u = 0; u < n; ++u) {
        double total = 0.0;
        for (auto [v, w] : nbrs[static_cast<std::size_t>(u)]) {
          mean.row(u) += w * h.row(static_cast<Index>(v));
          total += w;
        }
        if (total > 0.0) mean.row(u) /= total;
      }
      M out = h * model.param(p + "self.weight").value + mean * model.param(p + "neighbor.weight").value;
      out.rowwise() += model.param(p + "bias").value.row(0);
      return act(out, cfg.activation);
    }
    case Architecture::gat: {
      M total = M::Zero(n, static_cast<Index>(cfg.hidden_dim));
      for (std::size_t head = 0; head < cfg.gat_heads; ++head) {
        const std::string q = p + "head" + std::to_string(head) + ".";
        const M z = h * model.param(q + "weight").value;
        const M& a_src = model.param(q + "att_src").value;
        const M& a_dst = model.param(q + "att_dst").value;
        for (Index u = 0; u < n; ++u) {
          std::vector<std::pair<Index, double>> cand{{u, 1.0}};
          for (auto [v, w] : nbrs[static_cast<std::size_t>(u)]) cand.emplace_back(static_cast<Index>(v), w);
          std::vector<double> logits;
          for (auto [v, w] : cand) {
            const double s = z.row(u).dot(a_src.col(0)) + z.row(v).dot(a_dst.col(0));
            logits.push_back((s > 0 ? s : 0.2 * s) + std::log(w));
          }
          const double mx = *std::max_element(logits.begin(), logits.end());
          double denom = 0.0;
          for (double l : logits) denom += std::exp(l - mx);
          for (std::size_t j = 0; j < cand.size(); ++j) {
            total.row(u) += std::exp(logits[j] - mx) / denom * z.row(cand[j].first);
          }
        }
      }
      total /= static_cast<double>(cfg.gat_heads);
      total.rowwise() += model.param(p + "bias").value.row(0);
      return act(total, cfg.activation);
    }
  }
  return {};
}

void randomize(GnnModel<double>& model, Rng& rng) {
  for (auto* p : model.parameters()) p->value = random_matrix(p->value.rows(), p->value.cols(), rng, 0.5);
}

// ---------------------------------------------------------------------------

TEST(Ordinal, EncodeExamples) {
  EXPECT_EQ(encode_ordinal(3, 7), (std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0, 0}));
  EXPECT_EQ(encode_ordinal(0, 7), (std::vector<std::uint8_t>{1, 0, 0, 0, 0, 0, 0}));
  EXPECT_EQ(encode_ordinal(6, 7), std::vector<std::uint8_t>(7, 1));
  EXPECT_THROW(encode_ordinal(7, 7), DataError);
  EXPECT_THROW(encode_ordinal(-1, 7), DataError);
}

TEST(Ordinal, DecodeExamples) {
  EXPECT_EQ(decode_ordinal(std::vector<double>{0.9, 0.8, 0.6, 0.4, 0.2, 0.1, 0.05}), 2);
  EXPECT_EQ(decode_ordinal(std::vector<double>(7, 0.3)), 0);
  EXPECT_EQ(decode_ordinal(std::vector<double>{0.4, 0.9, 0.9}), 0);  // prefix rule, not a count
  EXPECT_EQ(decode_ordinal(std::vector<double>{0.9, 0.3, 0.9}), 0);
  for (int y = 0; y < 7; ++y) {
    std::vector<double> scores;
    for (auto bit : encode_ordinal(y, 7)) scores.push_back(bit ? 0.99 : 0.01);
    EXPECT_EQ(decode_ordinal(scores), y);
  }
}

TEST(Ordinal, PrefixViolationRate) {
  M s(4, 3);
  s << 0.9, 0.8, 0.1,  //
      0.9, 0.1, 0.8,   //
      0.1, 0.9, 0.1,   //
      0.1, 0.1, 0.1;
  EXPECT_DOUBLE_EQ(prefix_violation_rate(s), 0.5);
}

TEST(GnnConfig, DefaultsAndValidation) {
  const GnnConfig c;
  EXPECT_EQ(c.layers, 4u);
  EXPECT_EQ(c.hidden_dim, 128u);
  EXPECT_EQ(c.input_dim, 768u);
  EXPECT_EQ(c.classes, 7u);
  EXPECT_EQ(c.activation, Activation::tanh);
  EXPECT_DOUBLE_EQ(c.drop_edge_p, 0.25);
  EXPECT_EQ(c.epochs, 2100u);
  EXPECT_DOUBLE_EQ(c.learning_rate, 1e-3);
  EXPECT_DOUBLE_EQ(c.weight_decay, 1e-4);
  EXPECT_DOUBLE_EQ(c.val_fraction, 0.1);
  EXPECT_EQ(c.gat_heads, 1u);
  EXPECT_EQ(GnnConfig::from_json(c.to_json()).to_json(), c.to_json());
  GnnConfig bad = c;
  bad.drop_edge_p = 1.0;
  EXPECT_THROW(bad.validate(), UsageError);
  bad = c;
  bad.layers = 0;
  EXPECT_THROW(bad.validate(), UsageError);
  EXPECT_THROW(parse_architecture("mlp"), UsageError);
}

TEST(Layers, GcnHandExamples) {
  GnnModel<double> model(small_config(Architecture::gcn, 2));
  Rng rng(1);
  randomize(model, rng);
  model.param("layer0.bias").value.setZero();
  const M& w = model.param("layer0.weight").value;

  const SemanticGraph single(1, {}, {0}, {});
  M h1 = random_matrix(1, 2, rng);
  Tape<double> t1;
  auto out1 = model.layer_forward(t1, 0, t1.constant(h1), GraphOperators<double>::build(single));
  EXPECT_TRUE(out1.value().isApprox(M((h1 * w).array().tanh()), 1e-12));

  const SemanticGraph pair(2, {{0, 1, 1.0f}}, {0, 0}, {});
  M h2 = random_matrix(2, 2, rng);
  Tape<double> t2;
  auto out2 = model.layer_forward(t2, 0, t2.constant(h2), GraphOperators<double>::build(pair));
  const M mixed = (0.5 * h2.row(0) + 0.5 * h2.row(1)) * w;
  EXPECT_TRUE(out2.value().row(0).isApprox(M(mixed.array().tanh()), 1e-12));
  EXPECT_TRUE(out2.value().row(1).isApprox(M(mixed.array().tanh()), 1e-12));
}

TEST(Layers, ZeroWeightsGiveZero) {
  for (auto arch : kArchitectures) {
    GnnModel<double> model(small_config(arch));
    for (auto* p : model.parameters()) p->value.setZero();
    Rng rng(2);
    const auto g = sesame::testing::random_graph(6, 0.5, 3, rng);
    Tape<double> tape;
    auto out = model.layer_forward(tape, 0, tape.constant(random_matrix(6, 4, rng)), GraphOperators<double>::build(g));
    EXPECT_TRUE(out.value().isZero()) << to_string(arch);
  }
}

TEST(Layers, MatchDenseReference) {
  for (auto arch : kArchitectures) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      auto cfg = small_config(arch);
      cfg.gat_heads = 1 + seed % 2;
      if (seed == 3) cfg.activation = Activation::relu;
      GnnModel<double> model(cfg);
      Rng rng(seed + 100);
      randomize(model, rng);
      const auto g = sesame::testing::random_graph(9, 0.3, 3, rng);
      const M h = random_matrix(9, 4, rng);
      Tape<double> tape;
      auto out = model.layer_forward(tape, 0, tape.constant(h), GraphOperators<double>::build(g));
      const M expected = reference_layer(model, 0, h, g);
      EXPECT_TRUE(out.value().isApprox(expected, 1e-10)) << to_string(arch) << " seed " << seed;
    }
  }
}

TEST(Layers, RowCountMismatchRejected) {
  GnnModel<double> model(small_config(Architecture::gcn));
  const SemanticGraph g(3, {}, {}, {});
  Tape<double> tape;
  EXPECT_THROW(model.layer_forward(tape, 0, tape.constant(M::Zero(4, 4)), GraphOperators<double>::build(g)),
               DataError);
  EXPECT_THROW(model.forward(tape, tape.constant(M::Zero(3, 5)), GraphOperators<double>::build(g)), DataError);
}

TEST(Layers, GatAttentionRowsSumToOne) {
  Rng rng(5);
  const auto g = sesame::testing::random_graph(30, 0.2, 3, rng);
  const auto ops = GraphOperators<double>::build(g);
  const M src = random_matrix(30, 1, rng, 3.0);
  const M dst = random_matrix(30, 1, rng, 3.0);
  const auto alpha = detail::attention_softmax(src, dst, *ops.attention, 0.2);
  for (std::size_t u = 0; u < 30; ++u) {
    double total = 0.0;
    for (std::size_t j = ops.attention->offsets[u]; j < ops.attention->offsets[u + 1]; ++j) total += alpha[j];
    EXPECT_NEAR(total, 1.0, 1e-6);
    EXPECT_EQ(ops.attention->offsets[u + 1] - ops.attention->offsets[u], g.degree(u) + 1);
  }
}

TEST(Layers, BceGradientMatchesFiniteDifferences) {
  for (auto arch : kArchitectures) {
    GnnModel<double> model(small_config(arch));
    Rng rng(21);
    randomize(model, rng);
    const auto g = sesame::testing::random_graph(10, 0.3, 3, rng);
    const auto ops = GraphOperators<double>::build(g);
    const M x = random_matrix(10, 4, rng);
    const M targets = detail::ordinal_targets<double>(g.labels(), 3);
    const std::vector<Index> rows{0, 1, 2, 3, 4, 5, 6, 7};
    const auto check = gradient_check(model.parameters(), [&](Tape<double>& t) {
      return bce_with_logits(model.forward(t, t.constant(x), ops), targets, rows);
    });
    EXPECT_TRUE(check.ok()) << to_string(arch) << " worst " << check.worst;
  }
}

TEST(Layers, NodePermutationEquivariance) {
  for (auto arch : kArchitectures) {
    GnnModel<double> model(small_config(arch));
    Rng rng(31);
    randomize(model, rng);
    const std::size_t n = 12;
    const auto g = sesame::testing::random_graph(n, 0.3, 3, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<Edge> edges;
    for (const auto& e : g.edges()) {
      edges.push_back({static_cast<std::uint32_t>(perm[e.u]), static_cast<std::uint32_t>(perm[e.v]), e.weight});
    }
    const SemanticGraph pg(n, edges, {}, {});
    const M x = random_matrix(static_cast<Index>(n), 4, rng);
    M px(x.rows(), x.cols());
    for (std::size_t i = 0; i < n; ++i) px.row(static_cast<Index>(perm[i])) = x.row(static_cast<Index>(i));
    const M out = model.scores(x, GraphOperators<double>::build(g));
    const M pout = model.scores(px, GraphOperators<double>::build(pg));
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_TRUE(pout.row(static_cast<Index>(perm[i])).isApprox(out.row(static_cast<Index>(i)), 1e-10))
          << to_string(arch);
    }
  }
}

SemanticGraph chain_graph(std::size_t edges_wanted) {
  std::vector<Edge> edges;
  const std::uint32_t n = 200;
  for (std::uint32_t u = 0; u < n && edges.size() < edges_wanted; ++u) {
    for (std::uint32_t v = u + 1; v < n && edges.size() < edges_wanted; ++v) edges.push_back({u, v, 0.8f});
  }
  return SemanticGraph(n, std::move(edges), {}, {});
}

TEST(DropEdge, StatisticsAndDeterminism) {
  const auto g = chain_graph(10000);
  ASSERT_EQ(g.edge_count(), 10000u);
  EXPECT_EQ(drop_edge(g, 0.0, 1, 0), g);

  const double sd_high = std::sqrt(10000 * 0.999 * 0.001);
  const auto nearly_all = drop_edge(g, 0.999, 1, 0);
  EXPECT_LE(static_cast<double>(nearly_all.edge_count()), 10.0 + 5.0 * sd_high);

  const double sd = std::sqrt(10000 * 0.25 * 0.75);
  for (std::uint64_t epoch = 0; epoch < 5; ++epoch) {
    const auto kept = drop_edge(g, 0.25, 7, epoch);
    EXPECT_NEAR(static_cast<double>(kept.edge_count()), 7500.0, 5.0 * sd);
    EXPECT_EQ(kept, drop_edge(g, 0.25, 7, epoch));
    for (const auto& e : kept.edges()) EXPECT_FLOAT_EQ(e.weight, 0.8f);
  }
  EXPECT_NE(drop_edge(g, 0.25, 7, 0), drop_edge(g, 0.25, 7, 1));
  EXPECT_THROW(drop_edge(g, 1.0, 7, 0), UsageError);
}

EmbeddingMatrix to_embeddings(const M& m) {
  EmbeddingMatrix e(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) e.row(static_cast<std::size_t>(r))[static_cast<std::size_t>(c)] = static_cast<float>(m(r, c));
  }
  return e;
}

TEST(TrainGnn, ConstantLabelsAreLearnedQuickly) {
  Rng rng(8);
  auto g0 = sesame::testing::random_graph(40, 0.1, 1, rng);
  const SemanticGraph g(40, g0.edges(), std::vector<int>(40, 3), {});
  auto cfg = small_config(Architecture::gcn, 8, 7);
  cfg.hidden_dim = 16;
  cfg.epochs = 200;
  const auto result = train_gnn(g, to_embeddings(random_matrix(40, 8, rng)), cfg);
  ASSERT_EQ(result.history.size(), 200u);
  bool reached = false;
  for (const auto& rec : result.history) reached = reached || rec.train_accuracy == 1.0;
  EXPECT_TRUE(reached);
  EXPECT_EQ(result.history.back().train_accuracy, 1.0);
}

TEST(TrainGnn, SameSeedSameParameters) {
  Rng rng(9);
  const auto g = sesame::testing::random_graph(30, 0.2, 4, rng);
  const auto x = to_embeddings(random_matrix(30, 6, rng));
  auto cfg = small_config(Architecture::gat, 6, 4);
  cfg.epochs = 30;
  const auto a = train_gnn(g, x, cfg);
  const auto b = train_gnn(g, x, cfg);
  for (std::size_t i = 0; i < a.model.named_parameters().size(); ++i) {
    EXPECT_EQ(a.model.named_parameters()[i].value, b.model.named_parameters()[i].value);
  }
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
  EXPECT_LE(a.best_epoch, 29u);
  EXPECT_EQ(a.history[a.best_epoch].val_loss, a.best_loss);
}

TEST(TrainGnn, NonFiniteLossAbortsWithEpoch) {
  Rng rng(10);
  const auto g = sesame::testing::random_graph(10, 0.3, 3, rng);
  EmbeddingMatrix x(10, 4);
  for (float& v : x.data) v = 3e38f;
  auto cfg = small_config(Architecture::sage, 4, 3);
  cfg.epochs = 5;
  try {
    train_gnn(g, x, cfg);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos) << e.what();
  }
}

TEST(TrainGnn, RejectsMismatchedInputs) {
  Rng rng(11);
  const auto g = sesame::testing::random_graph(10, 0.3, 3, rng);
  auto cfg = small_config(Architecture::gcn, 4, 3);
  EXPECT_THROW(train_gnn(g, to_embeddings(random_matrix(9, 4, rng)), cfg), DataError);
  EXPECT_THROW(train_gnn(g, to_embeddings(random_matrix(10, 5, rng)), cfg), DataError);
  const SemanticGraph unlabeled(10, g.edges(), {}, {});
  EXPECT_THROW(train_gnn(unlabeled, to_embeddings(random_matrix(10, 4, rng)), cfg), DataError);
}

TEST(TrainGnn, ValidationSplitIsSeededAndDisjoint) {
  std::vector<int> labels(100, 1);
  labels[5] = -1;
  std::vector<bool> holdout(100, false);
  holdout[7] = true;
  const auto a = validation_split(labels, holdout, 0.1, 4);
  const auto b = validation_split(labels, holdout, 0.1, 4);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.validation.size(), 10u);
  EXPECT_EQ(a.train.size(), 88u);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  for (auto v : a.validation) EXPECT_TRUE(all.insert(v).second);
  EXPECT_FALSE(all.count(5));
  EXPECT_FALSE(all.count(7));
}

TEST(TrainGnn, PlantedGraphBeatsRandomBaseline) {
  PlantedSpec spec;
  const auto data = generate_planted(spec);
  const auto graph = build_graph(data.embeddings, data.labels, GraphOptions{});
  GnnConfig cfg;
  cfg.input_dim = spec.dim;
  cfg.epochs = 300;
  const auto result = train_gnn(graph, data.embeddings, cfg);
  const auto& best = result.history[result.best_epoch];
  EXPECT_GE(best.val_accuracy, 3.0 / 7.0);
  EXPECT_GE(best.val_ofa, best.val_accuracy);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  sesame::testing::ScratchDir dir("ckpt");
  for (auto arch : kArchitectures) {
    auto cfg = small_config(arch);
    cfg.gat_heads = 2;
    GnnModel<float> model(cfg);
    save_checkpoint(dir.file("m.sckp"), model.to_checkpoint());
    const auto bytes = sesame::testing::slurp(dir.file("m.sckp"));
    EXPECT_EQ(bytes.substr(0, 4), "SCKP");
    auto back = GnnModel<float>::from_checkpoint(load_checkpoint(dir.file("m.sckp")));
    EXPECT_EQ(back.config().to_json(), cfg.to_json());
    for (std::size_t i = 0; i < model.named_parameters().size(); ++i) {
      EXPECT_EQ(back.named_parameters()[i].value, model.named_parameters()[i].value);
    }
    save_checkpoint(dir.file("n.sckp"), back.to_checkpoint());
    EXPECT_EQ(sesame::testing::slurp(dir.file("n.sckp")), bytes);
  }
  sesame::testing::write_text(dir.file("bad.sckp"), "SCKX");
  EXPECT_THROW(load_checkpoint(dir.file("bad.sckp")), FormatError);
}

TEST(Predict, DuplicatedHoldoutMatchesItsTwin) {
  Rng rng(12);
  const std::size_t n = 15;
  const auto base = sesame::testing::random_graph(n, 0.25, 3, rng);
  const std::size_t twin = 4;
  std::vector<Edge> edges = base.edges();
  for (const auto& nb : base.neighbors(twin)) edges.push_back({static_cast<std::uint32_t>(nb.node), 15u, nb.weight});
  std::vector<int> labels = base.labels();
  labels.push_back(kUnlabeled);
  std::vector<bool> mask(n, false);
  mask.push_back(true);
  const SemanticGraph g(n + 1, edges, labels, mask);
  M x = random_matrix(static_cast<Index>(n + 1), 4, rng);
  x.row(static_cast<Index>(n)) = x.row(static_cast<Index>(twin));
  for (auto arch : kArchitectures) {
    GnnModel<float> model(small_config(arch));
    const auto preds = predict(model, g, to_embeddings(x));
    ASSERT_EQ(preds.size(), 1u);
    EXPECT_EQ(preds[0].node, n);
    const auto all = model.scores(x.cast<float>(), GraphOperators<float>::build(g));
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(preds[0].scores[c], all(static_cast<Index>(twin), static_cast<Index>(c)), 1e-6) << to_string(arch);
    }
  }
}

TEST(Predict, IsolatedHoldoutDependsOnlyOnItsFeatures) {
  Rng rng(13);
  const auto base = sesame::testing::random_graph(8, 0.4, 3, rng);
  std::vector<int> labels = base.labels();
  labels.push_back(kUnlabeled);
  std::vector<bool> mask(8, false);
  mask.push_back(true);
  const SemanticGraph g(9, base.edges(), labels, mask);
  const M x = random_matrix(9, 4, rng);
  const SemanticGraph alone(1, {}, {kUnlabeled}, {true});
  for (auto arch : kArchitectures) {
    GnnModel<float> model(small_config(arch));
    const auto in_graph = predict(model, g, to_embeddings(x));
    const auto by_itself = predict(model, alone, to_embeddings(x.bottomRows(1)));
    ASSERT_EQ(in_graph.size(), 1u);
    ASSERT_EQ(by_itself.size(), 1u);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(in_graph[0].scores[c], by_itself[0].scores[c], 1e-6);
    EXPECT_THROW(predict(model, g, to_embeddings(random_matrix(9, 5, rng))), DataError);
  }
}

TEST(Predict, PlantedHoldoutWithinOneClass) {
  PlantedSpec spec;
  const auto data = generate_planted(spec);
  const std::size_t train_n = 400;
  std::vector<std::size_t> train_rows(train_n), holdout_rows;
  std::iota(train_rows.begin(), train_rows.end(), 0);
  for (std::size_t i = train_n; i < spec.n; ++i) holdout_rows.push_back(i);
  const auto train_x = detail::select_rows(data.embeddings, train_rows);
  const auto holdout_x = detail::select_rows(data.embeddings, holdout_rows);
  const std::vector<int> train_labels(data.labels.begin(), data.labels.begin() + train_n);
  const auto graph = build_graph(train_x, train_labels, GraphOptions{});
  GnnConfig cfg;
  cfg.input_dim = spec.dim;
  cfg.epochs = 300;
  auto trained = train_gnn(graph, train_x, cfg);
  const auto ext = extend_graph(graph, train_x, holdout_x, GraphOptions{});
  const auto preds = predict(trained.model, ext.graph, concat_rows(train_x, holdout_x));
  ASSERT_EQ(preds.size(), holdout_rows.size());
  std::vector<int> p, t;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    p.push_back(preds[i].predicted_class);
    t.push_back(data.labels[holdout_rows[i]]);
  }
  EXPECT_GE(ofa(p, t), 0.6);
}

}  // namespace
