#include "kge/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace kge {

std::vector<Triple> sample_negatives(const Triple& positive, int k, std::int32_t num_entities, Rng& rng) {
  if (num_entities < 2) throw ConfigError("negative sampling needs at least two entities");
  std::vector<Triple> out;
  out.reserve(static_cast<std::size_t>(k));
  std::uniform_int_distribution<std::int32_t> pick(0, num_entities - 2);
  for (int i = 0; i < k; ++i) {
    Triple t = positive;
    const bool subject = (rng() & 1u) != 0;
    EntityId& slot = subject ? t.subject : t.object;
    const EntityId original = slot;
    EntityId e = pick(rng);
    if (e >= original) ++e;
    slot = e;
    out.push_back(t);
  }
  return out;
}

double train_epoch(Model& model, const KnowledgeGraph& kg, const TrainConfig& config, Adam& adam, Rng& rng) {
  if (config.negatives < 1) throw ConfigError("negatives must be at least 1");
  if (config.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (config.margin < 0) throw ConfigError("margin must be non-negative");
  std::vector<Triple> order = kg.train();
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);

  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::vector<Triple> negatives;
  std::vector<bool> keep;
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(order.size(), start + bs);
    std::span<const Triple> positives(order.data() + start, end - start);
    negatives.clear();
    for (const auto& t : positives) {
      auto neg = sample_negatives(t, config.negatives, kg.num_entities(), rng);
      negatives.insert(negatives.end(), neg.begin(), neg.end());
    }
    const std::vector<bool>* keep_ptr = nullptr;
    if (config.subsample < 1.0) {
      std::bernoulli_distribution coin(config.subsample);
      keep.assign(static_cast<std::size_t>(kg.num_entities()), false);
      for (std::size_t e = 0; e < keep.size(); ++e) keep[e] = coin(rng);
      keep_ptr = &keep;
    }
    const auto res = model.batch_loss(positives, negatives, config.margin, true, &rng, true, keep_ptr);
    adam.step();
    total += res.loss;
    ++batches;
  }
  for (const auto& p : model.params()) check_finite(p.value, p.name);
  return batches ? total / static_cast<double>(batches) : 0.0;
}

FitResult fit(Model& model, const KnowledgeGraph& kg, const TrainConfig& config,
              const std::function<void(const EpochLog&)>& on_epoch) {
  if (kg.valid().empty()) throw ConfigError("fit needs a nonempty validation split");
  if (config.eval_every < 1) throw ConfigError("eval_every must be at least 1");
  FitResult result;
  Adam adam(model.params(), AdamConfig{config.lr});
  Rng rng(config.seed);
  const FilterIndex filter(kg);
  std::vector<Matrix> best;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = train_epoch(model, kg, config, adam, rng);
    if (!std::isfinite(entry.loss)) throw NumericalError("training loss became non-finite at epoch " + std::to_string(epoch));
    if (epoch % config.eval_every == 0 || epoch == config.max_epochs) {
      entry.valid_mrr = evaluate_split(model, kg, Split::Valid, filter, config.threads).mrr;
      if (std::isnan(result.best_valid_mrr) || entry.valid_mrr > result.best_valid_mrr) {
        result.best_valid_mrr = entry.valid_mrr;
        result.best_epoch = epoch;
        best = model.params().snapshot();
      }
    }
    entry.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  if (!best.empty()) model.params().restore(best);
  return result;
}

void write_log_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,loss,valid_mrr,wall_ms\n" << std::setprecision(10);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.loss << ',';
    if (!std::isnan(e.valid_mrr)) out << e.valid_mrr;
    out << ',' << e.wall_ms << '\n';
  }
}

}  // namespace kge
