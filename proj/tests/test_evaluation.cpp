#include "kge/evaluation.hpp"

#include <gtest/gtest.h>

#include <Eigen/SVD>

#include <set>

using namespace kge;

namespace {

// Rank by sorting: position among unfiltered candidates, ties averaged.
double brute_force_rank(const Model& model, const Matrix& enc, const KnowledgeGraph& kg, const Triple& t, Side side) {
  std::set<Triple> known;
  for (Split s : {Split::Train, Split::Valid, Split::Test}) known.insert(kg.split(s).begin(), kg.split(s).end());
  const double truth = model.score(enc, t);
  const bool lower = model.orientation() == Orientation::LowerIsBetter;
  std::vector<double> others;
  for (EntityId e = 0; e < kg.num_entities(); ++e) {
    Triple c = t;
    (side == Side::Object ? c.object : c.subject) = e;
    if (c == t || known.count(c)) continue;
    others.push_back(model.score(enc, c));
  }
  std::sort(others.begin(), others.end());
  if (!lower) std::reverse(others.begin(), others.end());
  double better = 0, tied = 0;
  for (double s : others) {
    if (s == truth) tied += 1;
    else if (lower ? s < truth : s > truth) better += 1;
  }
  return 1 + better + tied / 2;
}

}  // namespace

TEST(RealisticRank, HandComputedCases) {
  Vector s(5);
  s << 0.5, 0.1, 0.5, 0.9, 0.3;
  // lower is better: truth 0 has 0.1 and 0.3 better, one tie
  EXPECT_DOUBLE_EQ(realistic_rank(s, 0, {}, Orientation::LowerIsBetter), 3.5);
  const std::vector<EntityId> filt{1, 2};
  EXPECT_DOUBLE_EQ(realistic_rank(s, 0, filt, Orientation::LowerIsBetter), 2.0);
  EXPECT_DOUBLE_EQ(realistic_rank(s, 3, {}, Orientation::HigherIsBetter), 1.0);
  // the truth is never filtered out
  const std::vector<EntityId> self{3};
  EXPECT_DOUBLE_EQ(realistic_rank(s, 3, self, Orientation::HigherIsBetter), 1.0);
}

TEST(RealisticRank, AllTiedGivesMiddleRank) {
  const Vector s = Vector::Constant(9, 1.0);
  EXPECT_DOUBLE_EQ(realistic_rank(s, 4, {}, Orientation::LowerIsBetter), 5.0);
}

TEST(Evaluation, MatchesBruteForceOracle) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto kg = gen_small_kg(40, 3, 120, 15, 15, seed);
    for (ModelKind kind : {ModelKind::TransE, ModelKind::DistMult, ModelKind::RgcnTransE, ModelKind::SpikE}) {
      ModelConfig cfg;
      cfg.kind = kind;
      cfg.dim = 6;
      cfg.seed = seed;
      cfg.spike.inputs = 5;
      Model model(cfg, kg);
      const auto report = evaluate_split(model, kg, Split::Test);
      ASSERT_EQ(report.queries.size(), 2 * kg.test().size());
      const Matrix enc = model.encode_all();
      for (const auto& q : report.queries) {
        EXPECT_DOUBLE_EQ(q.rank, brute_force_rank(model, enc, kg, q.triple, q.side)) << to_string(kind);
      }
    }
  }
}

TEST(Evaluation, ThreadCountDoesNotChangeResults) {
  const auto kg = gen_small_kg(40, 3, 120, 15, 15, 5);
  ModelConfig cfg;
  cfg.dim = 8;
  Model model(cfg, kg);
  const auto a = evaluate_split(model, kg, Split::Test, 1);
  const auto b = evaluate_split(model, kg, Split::Test, 4);
  ASSERT_EQ(a.queries.size(), b.queries.size());
  for (std::size_t i = 0; i < a.queries.size(); ++i) EXPECT_EQ(a.queries[i].rank, b.queries[i].rank);
  EXPECT_EQ(a.mrr, b.mrr);
}

TEST(Evaluation, MetricsAreOrderedAndBounded) {
  const auto kg = gen_small_kg(30, 2, 80, 10, 10, 6);
  ModelConfig cfg;
  cfg.dim = 8;
  Model model(cfg, kg);
  for (Split s : {Split::Train, Split::Valid, Split::Test}) {
    const auto r = evaluate_split(model, kg, s);
    EXPECT_GT(r.mrr, 0.0);
    EXPECT_LE(r.mrr, 1.0);
    EXPECT_LE(r.hits1, r.hits3);
    EXPECT_GE(r.mrr, r.hits1);
    EXPECT_EQ(r.split, s);
  }
}

TEST(Evaluation, PerfectEmbeddingRanksFirst) {
  Dictionary e, r;
  for (const char* n : {"a", "b", "c", "d"}) e.intern(n);
  r.intern("p");
  KnowledgeGraph kg(e, r, {{0, 0, 1}}, {}, {{2, 0, 3}});
  ModelConfig cfg;
  cfg.dim = 2;
  Model model(cfg, kg);
  auto& E = model.params().at("E").value;
  E << 0, 0, 5, 5,  //
      0, 10, 20, 30;
  model.relations().value << 0, 10;
  const auto report = evaluate_split(model, kg, Split::Test);
  EXPECT_DOUBLE_EQ(report.mrr, 1.0);
}

TEST(Evaluation, SummarizeByHand) {
  RankingReport r;
  r.queries = {{{}, Side::Object, 1.0}, {{}, Side::Subject, 2.0}, {{}, Side::Object, 4.0}, {{}, Side::Object, 3.0}};
  summarize(r);
  EXPECT_DOUBLE_EQ(r.mrr, (1.0 + 0.5 + 0.25 + 1.0 / 3.0) / 4.0);
  EXPECT_DOUBLE_EQ(r.hits1, 0.25);
  EXPECT_DOUBLE_EQ(r.hits3, 0.75);
}

TEST(FilterIndex, KnownBothSides) {
  const auto kg = gen_small_kg(20, 2, 40, 5, 5, 8);
  const FilterIndex f(kg);
  EXPECT_EQ(f.size(), kg.num_triples());
  const Triple t = kg.test()[0];
  const auto objs = f.known(t, Side::Object);
  const auto subs = f.known(t, Side::Subject);
  EXPECT_NE(std::find(objs.begin(), objs.end(), t.object), objs.end());
  EXPECT_NE(std::find(subs.begin(), subs.end(), t.subject), subs.end());
}

TEST(Pca, MatchesSvdProjection) {
  const Matrix pts = init_normal(6, 40, 0, 1, 3);
  const Matrix proj = pca_project(pts, 2);
  const Matrix centered = pts.colwise() - pts.rowwise().mean();
  Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinU);
  for (int c = 0; c < 2; ++c) {
    Vector u = svd.matrixU().col(c);
    for (Index i = 0; i < u.size(); ++i) {
      if (std::abs(u(i)) > 1e-12) {
        if (u(i) < 0) u = -u;
        break;
      }
    }
    const Vector expect = (u.transpose() * centered).transpose();
    EXPECT_LT((proj.row(c).transpose() - expect).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Pca, CollinearPointsPadWithZeros) {
  Matrix pts(3, 5);
  for (Index j = 0; j < 5; ++j) pts.col(j) = Vector::Constant(3, double(j));
  const Matrix proj = pca_project(pts, 2);
  EXPECT_TRUE(proj.row(1).isZero());
  EXPECT_FALSE(proj.row(0).isZero());
}

TEST(Suggestions, SortedBestFirst) {
  const auto kg = gen_small_kg(20, 2, 40, 5, 5, 8);
  ModelConfig cfg;
  cfg.dim = 4;
  Model model(cfg, kg);
  const Matrix enc = model.encode_all();
  const auto s = neighbor_suggestions(model, enc, enc.col(0), 0, 5);
  ASSERT_EQ(s.size(), 5u);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s[i - 1].second, s[i].second);
}
