#pragma once

#include "kge/graph_store.hpp"
#include "kge/linalg.hpp"

#include <algorithm>
#include <span>
#include <string>
#include <vector>

namespace kge {

struct NlifConfig {
  double tau = 0.5;
  double u_th = 1.0;
};

/// First threshold crossing of a non-leaky integrate-and-fire neuron.
/// `causal` is the length of the time-sorted input prefix that arrived before
/// the spike; `a`, `b` and `t_ref` are the sums behind the closed form,
/// kept for the gradient.
struct SpikeResult {
  double t = 0.0;
  std::size_t causal = 0;
  bool spiked = false;
  double a = 0.0;
  double b = 0.0;
  double t_ref = 0.0;
};

/// `times` must be sorted ascending. `expt[j]` = exp((times[j] - times[0]) / tau).
SpikeResult nlif_scan(const double* w, const double* times, const double* expt, std::size_t n, const NlifConfig& cfg);

SpikeResult nlif_spike_time(std::span<const double> weights, std::span<const double> times, const NlifConfig& cfg);
inline SpikeResult nlif_spike_time(const Vector& weights, const Vector& times, const NlifConfig& cfg) {
  return nlif_spike_time(std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())),
                         std::span<const double>(times.data(), static_cast<std::size_t>(times.size())), cfg);
}

/// t_max + 3 tau.
inline double no_spike_sentinel(double t_max, const NlifConfig& cfg) { return t_max + 3.0 * cfg.tau; }

struct SpikeGrad {
  Vector dw;  // ∂t/∂w_j
  Vector dt;  // ∂t/∂t_j
};

/// Zero outside the causal prefix. For a neuron that did not spike the
/// weight gradient is zero and the spike time follows the latest input.
SpikeGrad nlif_spike_grad(std::span<const double> weights, std::span<const double> times, const SpikeResult& r,
                          const NlifConfig& cfg);
inline SpikeGrad nlif_spike_grad(const Vector& weights, const Vector& times, const SpikeResult& r,
                                 const NlifConfig& cfg) {
  return nlif_spike_grad(std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())),
                         std::span<const double>(times.data(), static_cast<std::size_t>(times.size())), r, cfg);
}

/// Evenly spaced over [lo, hi].
Vector input_spike_times(int count, double lo = -1.0, double hi = 1.0);

/// δ·max(0, u_th + margin − Σw) for one neuron.
inline double nonspike_penalty(double weight_sum, double u_th, double delta, double margin = 0.0) {
  return delta * std::max(0.0, u_th + margin - weight_sum);
}

struct SpikeConfig {
  int inputs = 20;
  NlifConfig nlif;
  double t_lo = -1.0;
  double t_hi = 1.0;
  double init_mean = 0.2;
  double init_std = 1.0;
  double frozen_mean = 1.0;
  double frozen_std = 5.0;
  double delta = 1e-2;
};

/// One nLIF population per entity driven by a fixed input raster. The weights
/// live in a single (inputs × dim·N) param; column e·dim + i feeds neuron i of
/// entity e.
class SpikePopulations {
 public:
  SpikePopulations(ParamStore& store, const std::string& name, std::int32_t num_entities, Index dim,
                   const SpikeConfig& config, Rng& rng);

  Index dim() const { return dim_; }
  const Vector& input_times() const { return times_; }
  const SpikeConfig& config() const { return config_; }
  Param& weights() { return *w_; }
  const Param& weights() const { return *w_; }

  /// Spike times (dim × entities.size()) of the requested populations.
  const Matrix& forward(std::span<const EntityId> entities);
  /// Accumulates weight gradients from ∂L/∂t for the last forward.
  void backward(const Matrix& upstream);
  /// Non-spike penalty over the populations of the last forward.
  double penalty(bool accumulate_grad);
  /// Causal prefix lengths of the last forward, folded into a fingerprint.
  std::uint64_t regime() const;

  Matrix spike_times_all() const;
  SpikeResult neuron(EntityId e, Index i) const;

 private:
  Param* w_;
  std::int32_t num_entities_;
  Index dim_;
  SpikeConfig config_;
  Vector times_;
  Vector expt_;
  std::vector<EntityId> entities_;
  std::vector<SpikeResult> results_;
  Matrix out_;
};

/// Fully spiking convolution: output neuron i of entity s integrates every
/// neighbour spike t_{j,n} with weight W_p(i,n)/|N_s^p| plus its own initial
/// spikes t_{s,n} with weight W_0(i,n). The weights are frozen.
class SrgcnLayer {
 public:
  SrgcnLayer(ParamStore& store, const std::string& prefix, std::int32_t num_relations, Index dim, bool self_loop,
             const SpikeConfig& config, Rng& rng);

  struct Event {
    double t;
    EntityId source;
    std::int32_t neuron;
    std::int32_t relation;  // -1 for the self-loop
    double scale;
  };

  /// `t_init` holds one column of initial spike times per entity; only columns
  /// of `entities` and their neighbours are read.
  const Matrix& forward(const Matrix& t_init, const NeighborIndex& index, std::span<const EntityId> entities);
  /// Accumulates ∂L/∂t_init into `dt` (same shape as t_init).
  void backward(const Matrix& upstream, Matrix& dt) const;

  /// Per entity, the fraction of aggregated events that arrived before the
  /// output spikes of its population (summed over neurons); mean and standard
  /// deviation over the entities of the last forward.
  std::pair<double, double> causal_fraction() const;
  std::uint64_t regime() const;

  /// Events of entity k of the last forward, sorted by time.
  const std::vector<Event>& events(std::size_t k) const { return events_[k]; }
  double event_weight(const Event& ev, Index i) const;
  const SpikeResult& result(std::size_t k, Index i) const {
    return results_[k * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i)];
  }
  Param& weight(RelationId p) { return *w_[static_cast<std::size_t>(p)]; }
  bool has_self_loop() const { return w0_ != nullptr; }
  Param& self_weight() { return *w0_; }

 private:
  Index dim_;
  SpikeConfig config_;
  std::vector<Param*> w_;
  Param* w0_ = nullptr;
  std::vector<EntityId> entities_;
  std::vector<std::vector<Event>> events_;
  std::vector<std::vector<double>> expt_;
  std::vector<SpikeResult> results_;
  Matrix out_;
};

}  // namespace kge
