#include "kge/bench.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace kge;

namespace {

BenchConfig small_bench(int reps) {
  BenchConfig bc;
  bc.model.kind = ModelKind::RgcnTransE;
  bc.dims = {4, 8};
  bc.reps = reps;
  bc.warmup = 1;
  bc.batch_size = 8;
  bc.negatives = 2;
  return bc;
}

}  // namespace

TEST(Bench, MemorySavingEqualsClosedForm) {
  const auto kg = gen_small_kg(30, 4, 100, 5, 5, 1);
  for (bool self_loop : {true, false}) {
    auto bc = small_bench(2);
    bc.model.self_loop = self_loop;
    const auto res = bench_backward(kg, bc);
    ASSERT_EQ(res.rows.size(), 2u);
    for (const auto& row : res.rows) {
      const std::size_t n_w = std::size_t(kg.num_relations()) + (self_loop ? 1 : 0);
      EXPECT_EQ(row.trained_bytes - row.frozen_bytes, 3 * 8 * std::size_t(row.dim * row.dim) * n_w);
      EXPECT_EQ(row.predicted_saving, row.trained_bytes - row.frozen_bytes);
      EXPECT_GT(row.memory_reduction, 0.0);
      EXPECT_LT(row.memory_reduction, 1.0);
      EXPECT_LT(row.speedup, 1.0);
    }
  }
}

TEST(Bench, InverseRelationsCountTowardsTheClosedForm) {
  const auto base = gen_small_kg(30, 4, 100, 5, 5, 1);
  const KnowledgeGraph kg(base.entities(), base.relations(), base.train(), base.valid(), base.test(),
                          KnowledgeGraphOptions{true});
  const auto res = bench_backward(kg, small_bench(1));
  for (const auto& row : res.rows) {
    EXPECT_EQ(row.trained_bytes - row.frozen_bytes, 3 * 8 * std::size_t(row.dim * row.dim) * (2 * 4 + 1));
  }
}

TEST(Bench, RecordSchemaIndependentOfRepetitions) {
  const auto kg = gen_small_kg(30, 4, 100, 5, 5, 1);
  const auto one = bench_backward(kg, small_bench(1));
  const auto many = bench_backward(kg, small_bench(5));
  ASSERT_EQ(one.records.size(), many.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i) {
    EXPECT_EQ(one.records[i].phase, many.records[i].phase);
    EXPECT_EQ(one.records[i].dim, many.records[i].dim);
    EXPECT_EQ(one.records[i].frozen, many.records[i].frozen);
    EXPECT_EQ(one.records[i].grad_bytes, many.records[i].grad_bytes);
    EXPECT_EQ(one.records[i].std_ns, 0.0);
    EXPECT_GE(many.records[i].repetitions, 1);
  }
}

TEST(Bench, FrozenArmHasNoWeightBuffers) {
  const auto kg = gen_small_kg(30, 4, 100, 5, 5, 1);
  const auto res = bench_backward(kg, small_bench(1));
  for (const auto& r : res.records) {
    const std::size_t embedding_bytes = std::size_t(r.dim) * (30 + 4) * sizeof(double);
    if (r.frozen) EXPECT_EQ(r.grad_bytes, embedding_bytes);
    else EXPECT_GT(r.grad_bytes, embedding_bytes);
  }
}

TEST(Bench, RejectsShallowModels) {
  const auto kg = gen_small_kg(30, 4, 100, 5, 5, 1);
  auto bc = small_bench(1);
  bc.model.kind = ModelKind::TransE;
  EXPECT_THROW(bench_backward(kg, bc), ConfigError);
}

TEST(Bench, CsvOutputs) {
  const auto kg = gen_small_kg(30, 4, 100, 5, 5, 1);
  const auto res = bench_backward(kg, small_bench(1));
  const auto dir = std::filesystem::temp_directory_path();
  write_bench_csv(dir / "kge_bench.csv", res);
  write_speedup_csv(dir / "kge_speedup.csv", res);
  std::ifstream in(dir / "kge_bench.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "label,d,frozen,phase,mean_ns,std_ns,grad_bytes,moment_bytes,reps");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 2 * 2 * 4);
}
