#include "kge/bench.hpp"
#include "kge/linalg.hpp"
#include "kge/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace kge {

namespace {

using Clock = std::chrono::steady_clock;

double ns_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::nano>(b - a).count();
}

struct Stat {
  std::vector<double> samples;
  double mean() const {
    double s = 0.0;
    for (double x : samples) s += x;
    return samples.empty() ? 0.0 : s / static_cast<double>(samples.size());
  }
  double stddev() const {
    if (samples.size() < 2) return 0.0;
    const double m = mean();
    double v = 0.0;
    for (double x : samples) v += (x - m) * (x - m);
    return std::sqrt(v / static_cast<double>(samples.size() - 1));
  }
};

struct Arm {
  std::unique_ptr<Model> model;
  std::unique_ptr<Adam> adam;
  Stat forward, backward, optimizer, total;
};

}  // namespace

BenchResult bench_backward(const KnowledgeGraph& kg, const BenchConfig& config) {
  if (!uses_rgcn(config.model.kind)) throw ConfigError("bench needs an R-GCN based model");
  if (config.reps < 1) throw ConfigError("bench needs at least one repetition");
  if (kg.train().empty()) throw ConfigError("bench needs training triples");

  Rng batch_rng(config.seed);
  std::vector<Triple> positives = kg.train();
  for (std::size_t i = positives.size(); i > 1; --i) {
    std::swap(positives[i - 1], positives[static_cast<std::size_t>(batch_rng() % i)]);
  }
  positives.resize(std::min(positives.size(), static_cast<std::size_t>(config.batch_size)));
  std::vector<Triple> negatives;
  for (const auto& t : positives) {
    auto neg = sample_negatives(t, config.negatives, kg.num_entities(), batch_rng);
    negatives.insert(negatives.end(), neg.begin(), neg.end());
  }

  BenchResult result;
  for (Index d : config.dims) {
    Arm arms[2];  // 0 frozen, 1 trained
    for (int a = 0; a < 2; ++a) {
      ModelConfig mc = config.model;
      mc.dim = d;
      mc.frozen = a == 0;
      arms[a].model = std::make_unique<Model>(mc, kg);
      arms[a].adam = std::make_unique<Adam>(arms[a].model->params(), AdamConfig{});
    }
    for (int rep = 0; rep < config.warmup + config.reps; ++rep) {
      for (int k = 0; k < 2; ++k) {
        Arm& arm = arms[(rep + k) % 2];
        Rng dropout_rng(config.seed + static_cast<std::uint64_t>(rep));
        const auto t0 = Clock::now();
        arm.model->batch_loss(positives, negatives, config.margin, true, &dropout_rng, true, nullptr, true);
        const auto t1 = Clock::now();
        arm.model->encoder_backward();
        const auto t2 = Clock::now();
        arm.adam->step();
        const auto t3 = Clock::now();
        if (rep < config.warmup) continue;
        arm.forward.samples.push_back(ns_between(t0, t1));
        arm.backward.samples.push_back(ns_between(t1, t2));
        arm.optimizer.samples.push_back(ns_between(t2, t3));
        arm.total.samples.push_back(ns_between(t1, t3));
      }
    }

    BenchRow row;
    row.dim = d;
    for (int a = 0; a < 2; ++a) {
      Arm& arm = arms[a];
      const std::size_t gb = arm.model->params().grad_bytes();
      const std::size_t mb = arm.adam->moment_bytes();
      const bool frozen = a == 0;
      const std::pair<const char*, const Stat*> phases[] = {
          {"forward", &arm.forward}, {"backward", &arm.backward}, {"optimizer", &arm.optimizer},
          {"backward+optimizer", &arm.total}};
      for (const auto& [phase, stat] : phases) {
        result.records.push_back({config.label, d, frozen, phase, stat->mean(), stat->stddev(), gb, mb, config.reps});
      }
      (frozen ? row.frozen_ns : row.trained_ns) = arm.total.mean();
      (frozen ? row.frozen_bytes : row.trained_bytes) = gb + mb;
    }
    row.speedup = (row.trained_ns - row.frozen_ns) / row.trained_ns;
    row.memory_reduction = static_cast<double>(row.trained_bytes - row.frozen_bytes) /
                           static_cast<double>(row.trained_bytes);
    const auto n_w = static_cast<std::size_t>(kg.neighbors().num_relations()) + (config.model.self_loop ? 1u : 0u);
    const auto layers = static_cast<std::size_t>(config.model.layers);
    row.predicted_saving = 3u * sizeof(double) * static_cast<std::size_t>(d * d) * n_w * layers;
    row.predicted_reduction = static_cast<double>(row.predicted_saving) / static_cast<double>(row.trained_bytes);
    result.rows.push_back(row);
  }
  return result;
}

void write_bench_csv(const std::filesystem::path& path, const BenchResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label,d,frozen,phase,mean_ns,std_ns,grad_bytes,moment_bytes,reps\n" << std::setprecision(10);
  for (const auto& r : result.records) {
    out << r.label << ',' << r.dim << ',' << (r.frozen ? 1 : 0) << ',' << r.phase << ',' << r.mean_ns << ','
        << r.std_ns << ',' << r.grad_bytes << ',' << r.moment_bytes << ',' << r.repetitions << '\n';
  }
}

void write_speedup_csv(const std::filesystem::path& path, const BenchResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "d,frozen_ns,trained_ns,speedup,frozen_bytes,trained_bytes,memory_reduction,predicted_reduction\n"
      << std::setprecision(10);
  for (const auto& r : result.rows) {
    out << r.dim << ',' << r.frozen_ns << ',' << r.trained_ns << ',' << r.speedup << ',' << r.frozen_bytes << ','
        << r.trained_bytes << ',' << r.memory_reduction << ',' << r.predicted_reduction << '\n';
  }
}

}  // namespace kge
