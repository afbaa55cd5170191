#include "kge/model.hpp"
#include "kge/scoring.hpp"
#include "kge/training.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>

using namespace kge;

namespace {

const ModelKind kAllKinds[] = {ModelKind::TransE, ModelKind::DistMult, ModelKind::RgcnTransE, ModelKind::RgcnDistMult,
                               ModelKind::SpikE,  ModelKind::Hybrid,   ModelKind::SRGCN};

ModelConfig small_config(ModelKind kind, std::uint64_t seed) {
  ModelConfig c;
  c.kind = kind;
  c.dim = 4;
  c.dropout = 0.0;
  c.seed = seed;
  c.spike.inputs = 6;
  return c;
}

struct Batch {
  std::vector<Triple> pos, neg;
};

Batch make_batch(const KnowledgeGraph& kg, std::size_t n, int k, std::uint64_t seed) {
  Rng rng(seed);
  Batch b;
  for (std::size_t i = 0; i < n && i < kg.train().size(); ++i) {
    b.pos.push_back(kg.train()[i]);
    auto neg = sample_negatives(kg.train()[i], k, kg.num_entities(), rng);
    b.neg.insert(b.neg.end(), neg.begin(), neg.end());
  }
  return b;
}

}  // namespace

void PrintTo(ModelKind kind, std::ostream* os) { *os << to_string(kind); }

class ModelGradient : public ::testing::TestWithParam<ModelKind> {};

TEST_P(ModelGradient, AnalyticMatchesFiniteDifferences) {
  const ModelKind kind = GetParam();
  const bool spiking = is_spiking(kind);
  int checked_instances = 0;
  for (std::uint64_t seed = 1; seed <= 24; ++seed) {
    const auto kg = gen_small_kg(12, 2, 30, 1, 1, seed);
    auto cfg = small_config(kind, seed);
    cfg.frozen = seed % 2 == 0;
    cfg.l2_mode = seed % 3 == 0 ? L2Mode::Mean : L2Mode::Sum;
    Model model(cfg, kg);
    const auto batch = make_batch(kg, 6, 3, seed);
    const double gamma = spiking ? 0.5 : 2.0;
    auto loss = [&] {
      const auto r = model.batch_loss(batch.pos, batch.neg, gamma, false, nullptr, false);
      return LossEval{r.loss, r.regime};
    };
    model.params().zero_grad();
    model.batch_loss(batch.pos, batch.neg, gamma, false, nullptr, true);
    const auto r = grad_check(model.params(), loss, GradCheckOptions{spiking ? 1e-7 : 1e-6, 40, seed});
    if (r.checked == 0) continue;
    ++checked_instances;
    EXPECT_LT(r.max_rel_error, spiking ? 1e-3 : 1e-4) << to_string(kind) << " seed " << seed;
  }
  EXPECT_GE(checked_instances, 20);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, ModelGradient, ::testing::ValuesIn(kAllKinds),
                         [](const auto& info) {
                           auto s = to_string(info.param);
                           std::replace(s.begin(), s.end(), '-', '_');
                           return s;
                         });

TEST(Model, FrozenWeightsBitIdenticalAfterTraining) {
  for (ModelKind kind : {ModelKind::RgcnTransE, ModelKind::RgcnDistMult, ModelKind::Hybrid, ModelKind::SRGCN}) {
    const auto kg = gen_small_kg(20, 3, 60, 5, 5, 3);
    auto cfg = small_config(kind, 5);
    cfg.frozen = true;
    cfg.dropout = kind == ModelKind::SRGCN ? 0.0 : 0.2;
    Model model(cfg, kg);
    std::vector<std::pair<std::string, Matrix>> before;
    for (const auto& p : model.params()) {
      if (p.frozen) before.emplace_back(p.name, p.value);
    }
    ASSERT_FALSE(before.empty()) << to_string(kind);
    TrainConfig tc;
    tc.batch_size = 16;
    tc.negatives = 3;
    tc.lr = 1e-2;
    Adam adam(model.params(), AdamConfig{tc.lr});
    Rng rng(1);
    for (int epoch = 0; epoch < 3; ++epoch) train_epoch(model, kg, tc, adam, rng);
    for (const auto& [name, value] : before) {
      const auto& now = model.params().at(name).value;
      EXPECT_EQ(std::memcmp(now.data(), value.data(), sizeof(double) * std::size_t(value.size())), 0) << name;
    }
    EXPECT_NE(model.params().at(is_spiking(kind) ? "spike.w" : "E").value.sum(), 0.0);
  }
}

TEST(Model, TrainedRgcnWeightsMove) {
  const auto kg = gen_small_kg(20, 3, 60, 5, 5, 3);
  auto cfg = small_config(ModelKind::RgcnTransE, 5);
  cfg.frozen = false;
  Model model(cfg, kg);
  const Matrix w0 = model.params().at("rgcn0.W0").value;
  TrainConfig tc;
  tc.negatives = 3;
  Adam adam(model.params(), AdamConfig{1e-2});
  Rng rng(1);
  train_epoch(model, kg, tc, adam, rng);
  EXPECT_NE(model.params().at("rgcn0.W0").value, w0);
}

TEST(Model, FrozenAndTrainedShareInitialForward) {
  const auto kg = gen_small_kg(20, 3, 60, 5, 5, 3);
  auto cfg = small_config(ModelKind::RgcnTransE, 9);
  cfg.frozen = true;
  Model a(cfg, kg);
  cfg.frozen = false;
  Model b(cfg, kg);
  EXPECT_EQ(a.encode_all(), b.encode_all());
  const auto batch = make_batch(kg, 8, 2, 1);
  EXPECT_EQ(a.batch_loss(batch.pos, batch.neg, 1.0, false, nullptr, false).loss,
            b.batch_loss(batch.pos, batch.neg, 1.0, false, nullptr, false).loss);
}

TEST(Model, ScoreCandidatesMatchesPerTripleScore) {
  const auto kg = gen_small_kg(15, 2, 30, 3, 3, 2);
  for (ModelKind kind : kAllKinds) {
    Model model(small_config(kind, 1), kg);
    const Matrix enc = model.encode_all();
    const Triple t = kg.train()[0];
    for (Side side : {Side::Subject, Side::Object}) {
      const Vector s = model.score_candidates(enc, t, side);
      for (EntityId e = 0; e < kg.num_entities(); ++e) {
        Triple c = t;
        (side == Side::Object ? c.object : c.subject) = e;
        EXPECT_NEAR(s(e), model.score(enc, c), 1e-9) << to_string(kind);
      }
    }
  }
}

TEST(Model, ScoreMatchesDecoderFormulas) {
  const auto kg = gen_small_kg(15, 2, 30, 3, 3, 2);
  const Triple t = kg.train()[1];
  {
    Model m(small_config(ModelKind::TransE, 1), kg);
    const Matrix& e = m.params().at("E").value;
    EXPECT_NEAR(m.score(m.encode_all(), t), transe_distance(e.col(t.subject), m.relation(t.predicate), e.col(t.object)),
                1e-12);
    EXPECT_EQ(m.orientation(), Orientation::LowerIsBetter);
  }
  {
    Model m(small_config(ModelKind::DistMult, 1), kg);
    const Matrix& e = m.params().at("E").value;
    EXPECT_NEAR(m.score(m.encode_all(), t), distmult_score(e.col(t.subject), m.relation(t.predicate), e.col(t.object)),
                1e-12);
    EXPECT_EQ(m.orientation(), Orientation::HigherIsBetter);
  }
  {
    Model m(small_config(ModelKind::SpikE, 1), kg);
    const Matrix enc = m.encode_all();
    EXPECT_NEAR(m.score(enc, t), spike_distance(enc.col(t.subject), m.relation(t.predicate), enc.col(t.object)), 1e-12);
  }
}

TEST(Model, SpikingModelsHaveNoL2AndDeltaRelations) {
  const auto kg = gen_small_kg(15, 2, 30, 3, 3, 2);
  Model m(small_config(ModelKind::SpikE, 1), kg);
  EXPECT_TRUE(m.params().contains("Delta"));
  EXPECT_FALSE(m.params().contains("E"));
  for (const auto& p : m.params()) EXPECT_EQ(p.l2_weight, 0.0);
}

TEST(Model, HingeIsZeroWhenNegativesAreFar) {
  const auto kg = gen_small_kg(15, 2, 30, 3, 3, 2);
  auto cfg = small_config(ModelKind::TransE, 1);
  cfg.l2_weight = 0.0;
  Model m(cfg, kg);
  const auto batch = make_batch(kg, 5, 2, 3);
  // a margin of -1000 leaves nothing active
  const auto r = m.batch_loss(batch.pos, batch.pos, -1000.0, false, nullptr, false);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.active_pairs, 0u);
}

TEST(Model, HingeIsMeanOverPairs) {
  const auto kg = gen_small_kg(15, 2, 30, 3, 3, 2);
  auto cfg = small_config(ModelKind::TransE, 1);
  cfg.l2_weight = 0.0;
  Model m(cfg, kg);
  const auto batch = make_batch(kg, 5, 3, 4);
  const Matrix enc = m.encode_all();
  double expect = 0.0;
  for (std::size_t i = 0; i < batch.pos.size(); ++i) {
    for (int j = 0; j < 3; ++j) {
      expect += hinge_loss(m.score(enc, batch.pos[i]), m.score(enc, batch.neg[i * 3 + std::size_t(j)]), 1.0);
    }
  }
  expect /= double(batch.neg.size());
  EXPECT_NEAR(m.batch_loss(batch.pos, batch.neg, 1.0, false, nullptr, false).loss, expect, 1e-12);
}

TEST(Model, MismatchedNegativeCountThrows) {
  const auto kg = gen_small_kg(15, 2, 30, 3, 3, 2);
  Model m(small_config(ModelKind::TransE, 1), kg);
  auto batch = make_batch(kg, 4, 2, 1);
  batch.neg.pop_back();
  EXPECT_ANY_THROW(m.batch_loss(batch.pos, batch.neg, 1.0, false, nullptr, false));
}

TEST(Model, InvalidConfigsAreRejected) {
  const auto kg = gen_small_kg(15, 2, 30, 3, 3, 2);
  auto cfg = small_config(ModelKind::TransE, 1);
  cfg.dim = 0;
  EXPECT_THROW(Model(cfg, kg), ConfigError);
  EXPECT_THROW(parse_model_kind("complex"), ConfigError);
}

TEST(Model, SameSeedSameParameters) {
  const auto kg = gen_small_kg(15, 2, 30, 3, 3, 2);
  for (ModelKind kind : kAllKinds) {
    Model a(small_config(kind, 7), kg), b(small_config(kind, 7), kg);
    auto ia = a.params().begin();
    for (const auto& p : b.params()) {
      EXPECT_EQ(ia->value, p.value) << p.name;
      ++ia;
    }
  }
}
