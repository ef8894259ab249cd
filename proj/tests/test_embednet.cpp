#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"

namespace {

using namespace sesame;
using sesame::testing::direct_contrastive;
using sesame::testing::random_matrix;
using M = Matrix<double>;

M normalized_rows(M m) {
  for (Index r = 0; r < m.rows(); ++r) m.row(r).normalize();
  return m;
}

std::vector<std::vector<double>> as_rows(const M& m) {
  std::vector<std::vector<double>> out;
  for (Index r = 0; r < m.rows(); ++r) out.emplace_back(m.row(r).data(), m.row(r).data() + m.cols());
  return out;
}

TEST(ContrastiveLoss, IdenticalPairIsZero) {
  M z(2, 3);
  z << 0.6, 0.8, 0.0,  //
      0.6, 0.8, 0.0;
  EXPECT_NEAR(contrastive_loss(z, {1, 1}, 1.0), 0.0, 1e-12);
}

TEST(ContrastiveLoss, NoPositivesIsZero) {
  M z(2, 2);
  z << 1.0, 0.0,  //
      0.0, 1.0;
  EXPECT_DOUBLE_EQ(contrastive_loss(z, {0, 1}, 0.5), 0.0);
}

TEST(ContrastiveLoss, MatchesDirectDefinition) {
  M z(4, 2);
  const double s = std::sqrt(0.5);
  z << 1.0, 0.0,  //
      s, s,       //
      0.0, 1.0,   //
      -1.0, 0.0;
  const std::vector<int> labels{0, 0, 1, 1};
  for (double tau : {0.1, 0.5, 1.0}) {
    EXPECT_NEAR(contrastive_loss(z, labels, tau), direct_contrastive(as_rows(z), labels, tau), 1e-10);
  }
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const M r = normalized_rows(random_matrix(9, 5, rng));
    std::vector<int> l(9);
    for (auto& x : l) x = static_cast<int>(rng.below(3));
    EXPECT_NEAR(contrastive_loss(r, l, 0.2), direct_contrastive(as_rows(r), l, 0.2), 1e-9);
  }
}

TEST(ContrastiveLoss, NonNegativeAndPermutationInvariant) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const M z = normalized_rows(random_matrix(8, 4, rng));
    std::vector<int> labels(8);
    for (auto& x : labels) x = static_cast<int>(rng.below(2));
    const double loss = contrastive_loss(z, labels, 0.1);
    EXPECT_GE(loss, 0.0);
    std::vector<Index> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    M pz(8, 4);
    std::vector<int> pl(8);
    for (Index i = 0; i < 8; ++i) {
      pz.row(i) = z.row(perm[static_cast<std::size_t>(i)]);
      pl[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    }
    EXPECT_NEAR(contrastive_loss(pz, pl, 0.1), loss, 1e-10);
  }
}

TEST(ContrastiveLoss, Errors) {
  M z(2, 2);
  z << 2.0, 0.0,  //
      0.0, 1.0;
  EXPECT_THROW(contrastive_loss(z, {0, 0}, 0.1), DataError);
  EXPECT_THROW(contrastive_loss(M::Identity(1, 2), {0}, 0.1), DataError);
  EXPECT_THROW(contrastive_loss(M::Identity(2, 2), {0, 0}, 0.0), UsageError);
  EXPECT_THROW(contrastive_loss(M::Identity(2, 2), {0}, 0.1), DataError);
}

TEST(ContrastiveLoss, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Parameter<double> x("x", random_matrix(7, 4, rng));
    std::vector<int> labels{0, 0, 1, 1, 2, 2, 0};
    const auto check = sesame::testing::gradient_check({&x}, [&](Tape<double>& t) {
      return supervised_contrastive(l2_normalize_rows(t.parameter(x)), labels, 0.3);
    });
    EXPECT_TRUE(check.ok()) << check.worst;
  }
}

TEST(Refiner, GradientThroughMlpMatchesFiniteDifferences) {
  Rng rng(6);
  RefinerModel<double> model(4, 9);
  const M x = sesame::testing::random_away_from_zero(6, 4, rng);
  const std::vector<int> labels{0, 0, 1, 1, 2, 2};
  const auto check = sesame::testing::gradient_check(model.parameters(), [&](Tape<double>& t) {
    return supervised_contrastive(model.forward(t, t.constant(x)), labels, 0.5);
  });
  EXPECT_TRUE(check.ok()) << check.worst;
}

TEST(Refiner, ZeroEpochsIsTheInitialMlp) {
  const auto emb = sesame::testing::random_embeddings(12, 6, 1);
  RefinerConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 17;
  const auto result = refine_embeddings(emb, std::vector<int>(12, 0), cfg);
  EXPECT_TRUE(result.epoch_loss.empty());
  const RefinerModel<float> fresh(6, 17);
  EXPECT_EQ(result.refined, fresh.apply(emb));
  for (std::size_t r = 0; r < emb.count; ++r) {
    double n = 0.0;
    for (float v : result.refined.row(r)) n += static_cast<double>(v) * v;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-5);
  }
}

// Two noisy clusters whose class split is not aligned with the dominant direction.
std::pair<EmbeddingMatrix, std::vector<int>> two_clusters(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 80, dim = 16;
  EmbeddingMatrix m(n, dim);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % 2);
    auto row = m.row(i);
    for (std::size_t c = 0; c < dim; ++c) row[c] = static_cast<float>(rng.normal());
    row[0] += 4.0f;
    row[1] += labels[i] ? 0.8f : -0.8f;
  }
  return {m, labels};
}

TEST(Refiner, SeparatesTwoClusters) {
  const auto [emb, labels] = two_clusters(8);
  const auto before = mean_class_cosines(emb, labels);
  RefinerConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 32;
  const auto result = refine_embeddings(emb, labels, cfg);
  const auto after = mean_class_cosines(result.refined, labels);
  EXPECT_GE(after.intra - after.inter, 0.2);
  EXPECT_GT(after.intra - after.inter, before.intra - before.inter);
  EXPECT_LT(result.epoch_loss.back(), result.epoch_loss.front());
}

TEST(Refiner, DeterministicAndCheckpointRoundTrip) {
  const auto [emb, labels] = two_clusters(9);
  RefinerConfig cfg;
  cfg.epochs = 10;
  const auto a = refine_embeddings(emb, labels, cfg);
  const auto b = refine_embeddings(emb, labels, cfg);
  EXPECT_EQ(a.refined, b.refined);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);

  sesame::testing::ScratchDir dir("refiner");
  save_checkpoint(dir.file("r.sckp"), a.model.to_checkpoint());
  const auto back = RefinerModel<float>::from_checkpoint(load_checkpoint(dir.file("r.sckp")));
  EXPECT_EQ(back.apply(emb), a.refined);
  EXPECT_THROW(back.apply(sesame::testing::random_embeddings(3, 5, 1)), DataError);
}

TEST(Refiner, SingletonClassesAreExcluded) {
  const auto emb = sesame::testing::random_embeddings(6, 4, 2);
  RefinerConfig cfg;
  cfg.epochs = 2;
  const auto result = refine_embeddings(emb, {0, 0, 1, 2, 2, -1}, cfg);
  EXPECT_EQ(result.excluded_classes, std::vector<int>{1});
  EXPECT_EQ(result.epoch_loss.size(), 2u);
  EXPECT_EQ(result.refined.count, 6u);
}

}  // namespace
