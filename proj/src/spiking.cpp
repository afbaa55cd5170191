#include "kge/spiking.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace kge {

SpikeResult nlif_scan(const double* w, const double* times, const double* expt, std::size_t n, const NlifConfig& cfg) {
  SpikeResult r;
  if (n == 0) {
    r.t = no_spike_sentinel(0.0, cfg);
    return r;
  }
  r.t_ref = times[0];
  double a = 0.0, b = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    a += w[k];
    b += w[k] * expt[k];
    if (k + 1 < n && times[k + 1] == times[k]) continue;
    if (a > cfg.u_th && b > 0.0) {
      const double t = r.t_ref + cfg.tau * std::log(b / (a - cfg.u_th));
      const double upper = k + 1 < n ? times[k + 1] : std::numeric_limits<double>::infinity();
      if (t >= times[k] && t < upper) {
        r.t = t;
        r.causal = k + 1;
        r.spiked = true;
        r.a = a;
        r.b = b;
        return r;
      }
    }
  }
  r.t = no_spike_sentinel(times[n - 1], cfg);
  r.causal = n;
  r.a = a;
  r.b = b;
  return r;
}

SpikeResult nlif_spike_time(std::span<const double> weights, std::span<const double> times, const NlifConfig& cfg) {
  if (weights.size() != times.size()) throw ShapeError("nlif_spike_time: weights and times differ in length");
  std::vector<double> expt(times.size());
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (j > 0 && times[j] < times[j - 1]) throw std::invalid_argument("nlif_spike_time: input times must be sorted");
    expt[j] = std::exp((times[j] - times[0]) / cfg.tau);
  }
  return nlif_scan(weights.data(), times.data(), expt.data(), times.size(), cfg);
}

SpikeGrad nlif_spike_grad(std::span<const double> weights, std::span<const double> times, const SpikeResult& r,
                          const NlifConfig& cfg) {
  const auto n = static_cast<Index>(times.size());
  SpikeGrad g{Vector::Zero(n), Vector::Zero(n)};
  if (n == 0) return g;
  if (!r.spiked) {
    g.dt(n - 1) = 1.0;
    return g;
  }
  const double inv_margin = 1.0 / (r.a - cfg.u_th);
  for (std::size_t j = 0; j < r.causal; ++j) {
    const double e = std::exp((times[j] - r.t_ref) / cfg.tau);
    g.dw(static_cast<Index>(j)) = cfg.tau * (e / r.b - inv_margin);
    g.dt(static_cast<Index>(j)) = weights[j] * e / r.b;
  }
  return g;
}

Vector input_spike_times(int count, double lo, double hi) {
  if (count < 1) throw ConfigError("need at least one input neuron");
  if (count == 1) return Vector::Constant(1, lo);
  return Vector::LinSpaced(count, lo, hi);
}

// ---------------------------------------------------------- SpikePopulations

SpikePopulations::SpikePopulations(ParamStore& store, const std::string& name, std::int32_t num_entities, Index dim,
                                   const SpikeConfig& config, Rng& rng)
    : num_entities_(num_entities), dim_(dim), config_(config) {
  if (dim < 1) throw ConfigError("spike populations need a positive dimension");
  times_ = input_spike_times(config.inputs, config.t_lo, config.t_hi);
  expt_ = ((times_.array() - times_(0)) / config.nlif.tau).exp().matrix();
  w_ = &store.add(name, init_normal(config.inputs, dim * num_entities, config.init_mean, config.init_std, rng));
}

const Matrix& SpikePopulations::forward(std::span<const EntityId> entities) {
  entities_.assign(entities.begin(), entities.end());
  results_.resize(entities_.size() * static_cast<std::size_t>(dim_));
  out_.resize(dim_, static_cast<Index>(entities_.size()));
  const auto n = static_cast<std::size_t>(times_.size());
  for (std::size_t k = 0; k < entities_.size(); ++k) {
    const Index base = static_cast<Index>(entities_[k]) * dim_;
    for (Index i = 0; i < dim_; ++i) {
      auto& r = results_[k * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i)];
      r = nlif_scan(w_->value.col(base + i).data(), times_.data(), expt_.data(), n, config_.nlif);
      out_(i, static_cast<Index>(k)) = r.t;
    }
  }
  return out_;
}

void SpikePopulations::backward(const Matrix& upstream) {
  require_shape(upstream, dim_, static_cast<Index>(entities_.size()), "spike backward upstream");
  Matrix& grad = w_->grad_mut();
  const double tau = config_.nlif.tau;
  for (std::size_t k = 0; k < entities_.size(); ++k) {
    const Index base = static_cast<Index>(entities_[k]) * dim_;
    for (Index i = 0; i < dim_; ++i) {
      const double g = upstream(i, static_cast<Index>(k));
      const auto& r = results_[k * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i)];
      if (g == 0.0 || !r.spiked) continue;
      const double inv_margin = 1.0 / (r.a - config_.nlif.u_th);
      auto col = grad.col(base + i);
      for (std::size_t j = 0; j < r.causal; ++j) {
        col(static_cast<Index>(j)) += g * tau * (expt_(static_cast<Index>(j)) / r.b - inv_margin);
      }
    }
  }
}

double SpikePopulations::penalty(bool accumulate_grad) {
  if (config_.delta == 0.0) return 0.0;
  double total = 0.0;
  Matrix* grad = accumulate_grad ? &w_->grad_mut() : nullptr;
  for (EntityId e : entities_) {
    for (Index i = 0; i < dim_; ++i) {
      const Index c = static_cast<Index>(e) * dim_ + i;
      const double term = nonspike_penalty(w_->value.col(c).sum(), config_.nlif.u_th, config_.delta);
      if (term > 0.0) {
        total += term;
        if (grad) grad->col(c).array() -= config_.delta;
      }
    }
  }
  return total;
}

std::uint64_t SpikePopulations::regime() const {
  std::uint64_t h = 0;
  for (const auto& r : results_) h = hash_mix(h, r.causal * 2 + (r.spiked ? 1 : 0));
  return h;
}

Matrix SpikePopulations::spike_times_all() const {
  Matrix out(dim_, num_entities_);
  const auto n = static_cast<std::size_t>(times_.size());
  for (EntityId e = 0; e < num_entities_; ++e) {
    for (Index i = 0; i < dim_; ++i) {
      out(i, e) = nlif_scan(w_->value.col(e * dim_ + i).data(), times_.data(), expt_.data(), n, config_.nlif).t;
    }
  }
  return out;
}

SpikeResult SpikePopulations::neuron(EntityId e, Index i) const {
  return nlif_scan(w_->value.col(e * dim_ + i).data(), times_.data(), expt_.data(),
                   static_cast<std::size_t>(times_.size()), config_.nlif);
}

// ---------------------------------------------------------------- SrgcnLayer

SrgcnLayer::SrgcnLayer(ParamStore& store, const std::string& prefix, std::int32_t num_relations, Index dim,
                       bool self_loop, const SpikeConfig& config, Rng& rng)
    : dim_(dim), config_(config) {
  for (std::int32_t p = 0; p < num_relations; ++p) {
    w_.push_back(&store.add(prefix + ".W" + std::to_string(p),
                            init_normal(dim, dim, config.frozen_mean, config.frozen_std, rng), true));
  }
  if (self_loop) w0_ = &store.add(prefix + ".Wself", init_normal(dim, dim, config.frozen_mean, config.frozen_std, rng), true);
}

double SrgcnLayer::event_weight(const Event& ev, Index i) const {
  const Param& w = ev.relation < 0 ? *w0_ : *w_[static_cast<std::size_t>(ev.relation)];
  return w.value(i, ev.neuron) * ev.scale;
}

const Matrix& SrgcnLayer::forward(const Matrix& t_init, const NeighborIndex& index, std::span<const EntityId> entities) {
  if (t_init.rows() != dim_) throw ShapeError("srgcn forward: input has wrong row count");
  const auto m = entities.size();
  entities_.assign(entities.begin(), entities.end());
  events_.assign(m, {});
  expt_.assign(m, {});
  results_.resize(m * static_cast<std::size_t>(dim_));
  out_.resize(dim_, static_cast<Index>(m));
  std::vector<double> times, weights;

  for (std::size_t k = 0; k < m; ++k) {
    const EntityId s = entities_[k];
    auto& ev = events_[k];
    for (const auto& g : index.groups(s)) {
      if (g.relation >= static_cast<RelationId>(w_.size())) throw ShapeError("srgcn forward: relation outside the layer");
      const double scale = 1.0 / static_cast<double>(g.objects.size());
      for (EntityId j : g.objects) {
        for (Index n = 0; n < dim_; ++n) ev.push_back({t_init(n, j), j, static_cast<std::int32_t>(n), g.relation, scale});
      }
    }
    if (w0_) {
      for (Index n = 0; n < dim_; ++n) ev.push_back({t_init(n, s), s, static_cast<std::int32_t>(n), -1, 1.0});
    }
    std::stable_sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.t < b.t; });

    times.resize(ev.size());
    weights.resize(ev.size());
    auto& ex = expt_[k];
    ex.resize(ev.size());
    for (std::size_t q = 0; q < ev.size(); ++q) {
      times[q] = ev[q].t;
      ex[q] = std::exp((ev[q].t - ev.front().t) / config_.nlif.tau);
    }
    for (Index i = 0; i < dim_; ++i) {
      for (std::size_t q = 0; q < ev.size(); ++q) weights[q] = event_weight(ev[q], i);
      auto& r = results_[k * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i)];
      r = nlif_scan(weights.data(), times.data(), ex.data(), ev.size(), config_.nlif);
      out_(i, static_cast<Index>(k)) = r.t;
    }
  }
  return out_;
}

void SrgcnLayer::backward(const Matrix& upstream, Matrix& dt) const {
  require_shape(upstream, dim_, static_cast<Index>(entities_.size()), "srgcn backward upstream");
  if (dt.rows() != dim_) throw ShapeError("srgcn backward: dt has wrong row count");
  for (std::size_t k = 0; k < entities_.size(); ++k) {
    const auto& ev = events_[k];
    if (ev.empty()) continue;
    const auto& ex = expt_[k];
    for (Index i = 0; i < dim_; ++i) {
      const double g = upstream(i, static_cast<Index>(k));
      if (g == 0.0) continue;
      const auto& r = result(k, i);
      if (!r.spiked) {
        dt(ev.back().neuron, ev.back().source) += g;
        continue;
      }
      const double scale = g / r.b;
      for (std::size_t q = 0; q < r.causal; ++q) {
        dt(ev[q].neuron, ev[q].source) += scale * event_weight(ev[q], i) * ex[q];
      }
    }
  }
}

std::pair<double, double> SrgcnLayer::causal_fraction() const {
  std::vector<double> fractions;
  for (std::size_t k = 0; k < entities_.size(); ++k) {
    const auto total = events_[k].size();
    if (total == 0) continue;
    std::size_t used = 0;
    for (Index i = 0; i < dim_; ++i) used += result(k, i).causal;
    fractions.push_back(static_cast<double>(used) / static_cast<double>(total * static_cast<std::size_t>(dim_)));
  }
  if (fractions.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(fractions.begin(), fractions.end(), 0.0) / static_cast<double>(fractions.size());
  double var = 0.0;
  for (double f : fractions) var += (f - mean) * (f - mean);
  return {mean, std::sqrt(var / static_cast<double>(fractions.size()))};
}

std::uint64_t SrgcnLayer::regime() const {
  std::uint64_t h = 0;
  for (const auto& r : results_) h = hash_mix(h, r.causal * 2 + (r.spiked ? 1 : 0));
  return h;
}

}  // namespace kge
