#include "kge/linalg.hpp"
#include "kge/scoring.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace kge;
namespace fs = std::filesystem;

TEST(Init, NormalMomentsMatchRequest) {
  const Matrix m = init_normal(200, 200, 0.2, 1.0, 5);
  const double mean = m.mean();
  const double var = (m.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.2, 0.02);
  EXPECT_NEAR(var, 1.0, 0.03);
}

TEST(Init, ZeroStdIsConstantAndNegativeThrows) {
  EXPECT_TRUE((init_normal(3, 4, 1.5, 0.0, 1).array() == 1.5).all());
  EXPECT_ANY_THROW(init_normal(3, 4, 0.0, -1.0, 1));
}

TEST(Init, XavierBound) {
  const Index rows = 30, cols = 50;
  const double bound = std::sqrt(2.0) * std::sqrt(6.0 / (rows + cols));
  const Matrix m = init_xavier(rows, cols, std::sqrt(2.0), 3);
  EXPECT_LE(m.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(m.cwiseAbs().maxCoeff(), 0.9 * bound);
  // uniform on [-a, a] has variance a^2 / 3
  EXPECT_NEAR(m.array().square().mean(), bound * bound / 3.0, 0.1 * bound * bound / 3.0);
}

TEST(Init, SeedDeterminism) {
  EXPECT_EQ(init_normal(4, 4, 0, 1, 9), init_normal(4, 4, 0, 1, 9));
  EXPECT_NE(init_normal(4, 4, 0, 1, 9), init_normal(4, 4, 0, 1, 10));
}

TEST(ParamStore, FrozenParamsHaveNoGradBuffer) {
  ParamStore store;
  auto& a = store.add("a", Matrix::Ones(3, 3));
  auto& b = store.add("b", Matrix::Ones(3, 3), true);
  EXPECT_TRUE(a.has_grad());
  EXPECT_FALSE(b.has_grad());
  EXPECT_THROW(b.grad_mut(), std::logic_error);
  EXPECT_EQ(store.grad_bytes(), 9 * sizeof(double));
  EXPECT_EQ(store.trainable_count(), 9u);
}

TEST(ParamStore, RejectsDuplicatesAndNonFinite) {
  ParamStore store;
  store.add("a", Matrix::Zero(1, 1));
  EXPECT_ANY_THROW(store.add("a", Matrix::Zero(1, 1)));
  Matrix bad = Matrix::Zero(2, 2);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(store.add("nan", bad), NumericalError);
}

TEST(ParamStore, SnapshotRestore) {
  ParamStore store;
  auto& a = store.add("a", Matrix::Constant(2, 2, 1.0));
  const auto snap = store.snapshot();
  a.value.setConstant(7.0);
  store.restore(snap);
  EXPECT_TRUE((a.value.array() == 1.0).all());
}

// Hand-unrolled reference of the bias-corrected update for a scalar.
TEST(Adam, MatchesReferenceRecurrence) {
  ParamStore store;
  auto& p = store.add("x", Matrix::Constant(1, 1, 0.5));
  AdamConfig cfg{0.1, 0.9, 0.999, 1e-8};
  Adam adam(store, cfg);
  double x = 0.5, m = 0, v = 0;
  const double grads[] = {1.0, -2.0, 0.5, 3.0};
  for (int t = 1; t <= 4; ++t) {
    const double g = grads[t - 1];
    p.grad_mut()(0, 0) = g;
    adam.step();
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(p.value(0, 0), x, 1e-12);
    EXPECT_EQ(p.grad(0, 0), 0.0);
  }
  EXPECT_EQ(adam.steps(), 4);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore store;
  auto& p = store.add("x", Matrix::Zero(3, 1));
  p.grad_mut() << 5.0, -0.01, 0.0;
  Adam adam(store, AdamConfig{0.01});
  adam.step();
  EXPECT_NEAR(p.value(0), -0.01, 1e-9);
  EXPECT_NEAR(p.value(1), 0.01, 1e-6);
  EXPECT_EQ(p.value(2), 0.0);
}

TEST(Adam, FrozenParamsUntouchedAndUnallocated) {
  ParamStore store;
  store.add("train", Matrix::Ones(4, 4));
  auto& frozen = store.add("frozen", Matrix::Constant(8, 8, 2.0), true);
  Adam adam(store);
  EXPECT_EQ(adam.moment_bytes(), 2 * 16 * sizeof(double));
  store.at("train").grad_mut().setOnes();
  adam.step();
  EXPECT_TRUE((frozen.value.array() == 2.0).all());
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  ParamStore store;
  auto& p = store.add("x", Matrix::Constant(2, 2, 0.3));
  Adam adam(store, AdamConfig{0.0});
  p.grad_mut().setConstant(1.0);
  adam.step();
  EXPECT_TRUE((p.value.array() == 0.3).all());
}

TEST(Adam, ConvergesOnQuadratic) {
  ParamStore store;
  auto& p = store.add("x", Matrix::Constant(5, 1, 3.0));
  Adam adam(store, AdamConfig{0.05});
  for (int i = 0; i < 2000; ++i) {
    p.grad_mut() = 2.0 * (p.value.array() - 1.0).matrix();
    adam.step();
  }
  EXPECT_LT((p.value.array() - 1.0).abs().maxCoeff(), 1e-3);
}

TEST(GradCheck, AcceptsCorrectAndFlagsWrongGradient) {
  ParamStore store;
  auto& p = store.add("x", init_normal(4, 3, 0, 1, 2));
  auto loss = [&] { return LossEval{p.value.array().cube().sum() + p.value.squaredNorm(), 0}; };
  p.grad_mut() = (3.0 * p.value.array().square() + 2.0 * p.value.array()).matrix();
  EXPECT_LT(grad_check(store, loss).max_rel_error, 1e-7);
  p.grad_mut()(1, 1) += 0.1;
  EXPECT_GT(grad_check(store, loss).max_rel_error, 1e-3);
}

TEST(GradCheck, SkipsRegimeChanges) {
  ParamStore store;
  auto& p = store.add("x", Matrix::Zero(1, 1));
  auto loss = [&] { return LossEval{std::abs(p.value(0, 0)), p.value(0, 0) > 0 ? 1u : 0u}; };
  p.grad_mut()(0, 0) = 0.0;
  const auto r = grad_check(store, loss);
  EXPECT_EQ(r.checked, 0u);
  EXPECT_EQ(r.skipped, 1u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ParamStore store;
  store.add("E", init_normal(5, 7, 0, 1, 1), false, 0.01);
  store.add("W", init_xavier(5, 5, 1.4, 2), true);
  const auto path = fs::temp_directory_path() / "kge_test_ckpt.bin";
  save_checkpoint(path, store, {{"model", "transe"}, {"seed", "42"}});
  const auto ckpt = load_checkpoint(path);
  EXPECT_EQ(ckpt.metadata.at("seed"), "42");
  ASSERT_EQ(ckpt.tensors.size(), 2u);
  EXPECT_TRUE(ckpt.tensors[1].frozen);

  ParamStore other;
  other.add("E", Matrix::Zero(5, 7));
  other.add("W", Matrix::Zero(5, 5), true);
  restore_params(other, ckpt);
  EXPECT_EQ(other.at("E").value, store.at("E").value);
  EXPECT_EQ(other.at("W").value, store.at("W").value);
  EXPECT_TRUE(fs::exists(path.string() + ".manifest"));
}

TEST(Checkpoint, ShapeAndNameMismatch) {
  ParamStore store;
  store.add("E", Matrix::Ones(2, 2));
  const auto path = fs::temp_directory_path() / "kge_test_ckpt2.bin";
  save_checkpoint(path, store, {});
  ParamStore wrong_shape;
  wrong_shape.add("E", Matrix::Ones(3, 2));
  EXPECT_THROW(restore_params(wrong_shape, load_checkpoint(path)), ShapeError);
  ParamStore missing;
  missing.add("F", Matrix::Ones(2, 2));
  EXPECT_THROW(restore_params(missing, load_checkpoint(path)), VocabularyError);
}

TEST(Checkpoint, TruncatedFileIsRejected) {
  ParamStore store;
  store.add("E", Matrix::Ones(10, 10));
  const auto path = fs::temp_directory_path() / "kge_test_ckpt3.bin";
  save_checkpoint(path, store, {});
  fs::resize_file(path, fs::file_size(path) - 16);
  EXPECT_ANY_THROW(load_checkpoint(path));
  std::ofstream(path) << "not a checkpoint";
  EXPECT_ANY_THROW(load_checkpoint(path));
}

TEST(Scoring, TranseAgainstLoop) {
  const Vector s = init_normal(9, 1, 0, 1, 1), r = init_normal(9, 1, 0, 1, 2), o = init_normal(9, 1, 0, 1, 3);
  double d = 0;
  for (Index k = 0; k < 9; ++k) d += std::abs(s(k) + r(k) - o(k));
  EXPECT_NEAR(transe_distance(s, r, o), d, 1e-12);
  EXPECT_THROW(transe_distance(s, Vector(Vector::Zero(4)), o), ShapeError);
}

TEST(Scoring, TranseIsZeroForPerfectTranslation) {
  const Vector s = init_normal(6, 1, 0, 1, 4), r = init_normal(6, 1, 0, 1, 5);
  const Vector o = s + r;
  EXPECT_NEAR(transe_distance(s, r, o), 0.0, 1e-12);
  const Vector g = transe_grad(s, r, Vector(o + Vector::Constant(6, 1e-3)));
  EXPECT_TRUE((g.array() == -1.0).all());
}

TEST(Scoring, TranseGradSignOfZeroIsZero) {
  Vector s(3), r(3), o(3);
  s << 1, 2, 3;
  r << 0, 0, 0;
  o << 1, 1, 4;
  const Vector g = transe_grad(s, r, o);
  EXPECT_EQ(g(0), 0.0);
  EXPECT_EQ(g(1), 1.0);
  EXPECT_EQ(g(2), -1.0);
}

TEST(Scoring, DistmultIsSymmetricTrilinear) {
  const Vector s = init_normal(5, 1, 0, 1, 6), r = init_normal(5, 1, 0, 1, 7), o = init_normal(5, 1, 0, 1, 8);
  double v = 0;
  for (Index k = 0; k < 5; ++k) v += s(k) * r(k) * o(k);
  EXPECT_NEAR(distmult_score(s, r, o), v, 1e-12);
  EXPECT_NEAR(distmult_score(s, r, o), distmult_score(o, r, s), 1e-12);
}

TEST(Scoring, SpikeDistanceAndHinge) {
  Vector ts(2), to(2), dp(2);
  ts << 0.3, 0.9;
  to << 0.1, 0.2;
  dp << 0.2, 0.2;
  EXPECT_NEAR(spike_distance(ts, dp, to), 0.5, 1e-12);
  EXPECT_EQ(hinge_loss(1.0, 3.0, 1.0), 0.0);
  EXPECT_EQ(hinge_loss(2.0, 1.0, 1.0), 2.0);
  EXPECT_EQ(hinge_loss(1.0, 2.0, 1.0), 0.0);
}

TEST(Scoring, L1ToColumns) {
  const Matrix c = init_normal(4, 6, 0, 1, 9);
  const Vector q = init_normal(4, 1, 0, 1, 10);
  const Vector d = l1_to_columns(c, q);
  for (Index j = 0; j < 6; ++j) EXPECT_NEAR(d(j), (c.col(j) - q).lpNorm<1>(), 1e-12);
}
