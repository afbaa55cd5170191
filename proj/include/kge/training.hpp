#pragma once

#include "kge/evaluation.hpp"
#include "kge/graph_store.hpp"
#include "kge/linalg.hpp"
#include "kge/model.hpp"

#include <filesystem>
#include <functional>
#include <limits>
#include <vector>

namespace kge {

struct TrainConfig {
  double lr = 1e-3;
  double margin = 1.0;
  int negatives = 10;
  int batch_size = 64;
  int max_epochs = 1000;
  int eval_every = 10;
  /// Fraction of batch entities kept for encoding (1 keeps all).
  double subsample = 1.0;
  std::uint64_t seed = 42;
  int threads = 1;
};

/// k corruptions of `positive`: subject or object chosen uniformly, then
/// replaced by a uniform draw from the other entities. Not filtered.
std::vector<Triple> sample_negatives(const Triple& positive, int k, std::int32_t num_entities, Rng& rng);

/// Shuffled minibatches with paired negatives and one Adam step each. Returns
/// the mean batch loss.
double train_epoch(Model& model, const KnowledgeGraph& kg, const TrainConfig& config, Adam& adam, Rng& rng);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double valid_mrr = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

struct FitResult {
  std::vector<EpochLog> log;
  double best_valid_mrr = std::numeric_limits<double>::quiet_NaN();
  int best_epoch = 0;
};

/// Trains for max_epochs, scoring the validation split every eval_every epochs
/// and at the end. The params hold the best-scoring snapshot on return.
FitResult fit(Model& model, const KnowledgeGraph& kg, const TrainConfig& config,
              const std::function<void(const EpochLog&)>& on_epoch = {});

/// epoch,loss,valid_mrr,wall_ms
void write_log_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log);

}  // namespace kge
