#include "kge/run_config.hpp"
#include "kge/training.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace kge;
namespace fs = std::filesystem;

TEST(Negatives, CorruptExactlyOneSideAndNeverKeepTheOriginal) {
  Rng rng(1);
  const Triple t{3, 1, 7};
  int subject_side = 0;
  const auto negs = sample_negatives(t, 2000, 10, rng);
  ASSERT_EQ(negs.size(), 2000u);
  std::vector<int> hits(10, 0);
  for (const auto& n : negs) {
    EXPECT_EQ(n.predicate, 1);
    const bool s = n.subject != t.subject;
    const bool o = n.object != t.object;
    EXPECT_NE(s, o);
    subject_side += s;
    ++hits[std::size_t(s ? n.subject : n.object)];
  }
  EXPECT_NEAR(subject_side / 2000.0, 0.5, 0.05);
  for (int e = 0; e < 10; ++e) EXPECT_GT(hits[std::size_t(e)], 0) << e;
}

TEST(Negatives, NeedTwoEntities) {
  Rng rng(1);
  EXPECT_THROW(sample_negatives(Triple{0, 0, 0}, 1, 1, rng), ConfigError);
}

TEST(Training, LossDecreasesOnSmallGraph) {
  const auto kg = gen_small_kg(30, 3, 150, 10, 10, 2);
  ModelConfig mc;
  mc.dim = 16;
  mc.l2_mode = L2Mode::Sum;
  Model model(mc, kg);
  TrainConfig tc;
  tc.lr = 1e-2;
  Adam adam(model.params(), AdamConfig{tc.lr});
  Rng rng(3);
  const double first = train_epoch(model, kg, tc, adam, rng);
  double last = first;
  for (int i = 0; i < 30; ++i) last = train_epoch(model, kg, tc, adam, rng);
  EXPECT_LT(last, 0.5 * first);
}

TEST(Training, FitKeepsTheBestSnapshot) {
  const auto kg = gen_small_kg(30, 3, 150, 10, 10, 2);
  ModelConfig mc;
  mc.dim = 16;
  Model model(mc, kg);
  TrainConfig tc;
  tc.lr = 1e-2;
  tc.max_epochs = 20;
  tc.eval_every = 5;
  const auto res = fit(model, kg, tc);
  ASSERT_EQ(res.log.size(), 20u);
  double best = 0.0;
  for (const auto& e : res.log) {
    if (!std::isnan(e.valid_mrr)) best = std::max(best, e.valid_mrr);
  }
  EXPECT_EQ(res.best_valid_mrr, best);
  EXPECT_NEAR(evaluate_split(model, kg, Split::Valid).mrr, best, 1e-12);
}

TEST(Training, SameSeedIsReproducible) {
  const auto kg = gen_small_kg(25, 2, 80, 8, 8, 4);
  auto run = [&] {
    ModelConfig mc;
    mc.kind = ModelKind::RgcnTransE;
    mc.dim = 8;
    Model model(mc, kg);
    TrainConfig tc;
    tc.max_epochs = 4;
    tc.eval_every = 2;
    return fit(model, kg, tc).best_valid_mrr;
  };
  EXPECT_EQ(run(), run());
}

TEST(Training, SubsamplingStillTrains) {
  const auto kg = gen_small_kg(30, 3, 150, 10, 10, 2);
  ModelConfig mc;
  mc.kind = ModelKind::RgcnTransE;
  mc.dim = 8;
  Model model(mc, kg);
  TrainConfig tc;
  tc.subsample = 0.5;
  Adam adam(model.params());
  Rng rng(1);
  EXPECT_TRUE(std::isfinite(train_epoch(model, kg, tc, adam, rng)));
}

TEST(Training, RejectsBadConfig) {
  const auto kg = gen_small_kg(20, 2, 40, 5, 5, 2);
  ModelConfig mc;
  Model model(mc, kg);
  Adam adam(model.params());
  Rng rng(1);
  TrainConfig tc;
  tc.negatives = 0;
  EXPECT_THROW(train_epoch(model, kg, tc, adam, rng), ConfigError);
}

TEST(Training, LogCsvHasHeaderAndRows) {
  std::vector<EpochLog> log{{1, 0.5, std::nan(""), 2.0}, {2, 0.4, 0.3, 2.0}};
  const auto path = fs::temp_directory_path() / "kge_test_log.csv";
  write_log_csv(path, log);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,loss,valid_mrr,wall_ms");
  std::getline(in, line);
  EXPECT_EQ(line, "1,0.5,,2");
}

TEST(RunConfig, KeyValueRoundTrip) {
  RunConfig rc;
  rc.dataset = "countries_s1";
  rc.model.kind = ModelKind::Hybrid;
  rc.model.dim = 64;
  rc.model.spike.inputs = 40;
  rc.train.lr = 1e-3;
  rc.train.margin = 0.75;
  rc.model.seed = rc.train.seed = 7;
  const auto back = from_kv(to_kv(rc));
  EXPECT_EQ(to_kv(back), to_kv(rc));
}

TEST(RunConfig, FileRoundTripWithComments) {
  const auto path = fs::temp_directory_path() / "kge_test_config.txt";
  {
    std::ofstream out(path);
    out << "# comment\n\nmodel = srgcn   # trailing\ndim=16\n  negatives = 5\n";
  }
  const auto rc = from_kv(read_config_file(path));
  EXPECT_EQ(rc.model.kind, ModelKind::SRGCN);
  EXPECT_EQ(rc.model.dim, 16);
  EXPECT_EQ(rc.train.negatives, 5);
  write_config_file(path, rc);
  EXPECT_EQ(to_kv(from_kv(read_config_file(path))), to_kv(rc));
}

TEST(RunConfig, BadValuesAreConfigErrors) {
  EXPECT_THROW(from_kv({{"dim", "abc"}}), ConfigError);
  EXPECT_THROW(from_kv({{"nonsense", "1"}}), ConfigError);
  EXPECT_THROW(from_kv({{"frozen", "maybe"}}), ConfigError);
  EXPECT_THROW(from_kv({{"subsample", "0"}}), ConfigError);
  EXPECT_THROW(from_kv({{"model", "complex"}}), ConfigError);
}

TEST(RunConfig, SeedDefaultsTo42) {
  RunConfig rc;
  EXPECT_EQ(rc.model.seed, 42u);
  EXPECT_EQ(rc.train.seed, 42u);
}

TEST(RunConfig, RecommendedSettings) {
  auto spike = from_kv(recommended_settings("countries_s1", ModelKind::SpikE, true, true));
  EXPECT_EQ(spike.model.dim, 32);
  EXPECT_EQ(spike.model.spike.inputs, 40);
  EXPECT_DOUBLE_EQ(spike.train.lr, 1e-2);
  auto umls = from_kv(recommended_settings("umls", ModelKind::SpikE, true, true));
  EXPECT_EQ(umls.model.spike.inputs, 20);
  EXPECT_DOUBLE_EQ(umls.train.margin, 8.0);
  auto srgcn = from_kv(recommended_settings("federal-states", ModelKind::SRGCN, true, true));
  EXPECT_EQ(srgcn.model.dim, 32);
  EXPECT_EQ(srgcn.model.spike.inputs, 16);
  EXPECT_EQ(srgcn.train.negatives, 5);
  auto rgcn = from_kv(recommended_settings("umls", ModelKind::RgcnTransE, true, true));
  EXPECT_EQ(rgcn.model.dim, 128);
  EXPECT_EQ(rgcn.model.l2_mode, L2Mode::Mean);
  EXPECT_DOUBLE_EQ(rgcn.train.margin, 8.0);
  auto transe = from_kv(recommended_settings("umls", ModelKind::TransE, true, true));
  EXPECT_EQ(transe.model.dim, 64);
  EXPECT_EQ(transe.model.l2_mode, L2Mode::Sum);
  EXPECT_DOUBLE_EQ(transe.train.margin, 1.0);
}

TEST(RunConfig, DatasetRegistry) {
  EXPECT_EQ(resolve_dataset("umls", {}).num_entities(), 135);
  EXPECT_EQ(resolve_dataset("federal-states", {}).num_entities(), 27);
  EXPECT_EQ(resolve_dataset("synthetic-broodwar-like", {}).num_entities(), 32);
  EXPECT_THROW(resolve_dataset("no-such-dataset", {}), ConfigError);
  EXPECT_THROW(resolve_dataset("fb15k-237", "/nonexistent"), ConfigError);
}
