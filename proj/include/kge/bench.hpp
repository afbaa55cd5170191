#pragma once

#include "kge/graph_store.hpp"
#include "kge/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace kge {

struct BenchRecord {
  std::string label;
  Index dim = 0;
  bool frozen = false;
  std::string phase;  // forward, backward, optimizer, backward+optimizer
  double mean_ns = 0.0;
  double std_ns = 0.0;
  std::size_t grad_bytes = 0;
  std::size_t moment_bytes = 0;
  int repetitions = 0;
};

struct BenchRow {
  Index dim = 0;
  double frozen_ns = 0.0;
  double trained_ns = 0.0;
  /// (t_trained − t_frozen) / t_trained
  double speedup = 0.0;
  std::size_t frozen_bytes = 0;
  std::size_t trained_bytes = 0;
  /// (m_trained − m_frozen) / m_trained from buffer accounting.
  double memory_reduction = 0.0;
  /// Bytes of every W gradient and both Adam moments: 3·8·d²·(|R'| + self-loop).
  std::size_t predicted_saving = 0;
  double predicted_reduction = 0.0;
};

struct BenchConfig {
  ModelConfig model;  // kind must be R-GCN based; the frozen flag is overridden
  std::vector<Index> dims{16, 32, 64, 128};
  int reps = 100;
  int warmup = 3;
  int batch_size = 64;
  int negatives = 10;
  double margin = 1.0;
  std::string label = "bench";
  std::uint64_t seed = 42;
};

struct BenchResult {
  std::vector<BenchRecord> records;
  std::vector<BenchRow> rows;
};

/// Times backward + optimizer for a frozen and a trained R-GCN on the same
/// batch, interleaving repetitions to share drift.
BenchResult bench_backward(const KnowledgeGraph& kg, const BenchConfig& config);

/// label,d,frozen,phase,mean_ns,std_ns,grad_bytes,moment_bytes,reps
void write_bench_csv(const std::filesystem::path& path, const BenchResult& result);
/// d,frozen_ns,trained_ns,speedup,frozen_bytes,trained_bytes,memory_reduction,predicted_reduction
void write_speedup_csv(const std::filesystem::path& path, const BenchResult& result);

}  // namespace kge
