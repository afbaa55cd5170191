#include "kge/rgcn.hpp"

#include <algorithm>
#include <map>

namespace kge {

RgcnLayer::RgcnLayer(ParamStore& store, const std::string& prefix, const RgcnLayerConfig& config, const Init& init)
    : config_(config) {
  if (config.in_dim < 1 || config.out_dim < 1) throw ConfigError("rgcn layer needs positive dimensions");
  if (config.dropout < 0 || config.dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
  w_.reserve(static_cast<std::size_t>(config.num_relations));
  for (std::int32_t p = 0; p < config.num_relations; ++p) {
    w_.push_back(&store.add(prefix + ".W" + std::to_string(p), init(config.out_dim, config.in_dim), config.frozen));
  }
  if (config.self_loop) w0_ = &store.add(prefix + ".Wself", init(config.out_dim, config.in_dim), config.frozen);
}

const Matrix& RgcnLayer::forward(const Matrix& x, const NeighborIndex& index, std::span<const EntityId> entities,
                                 bool training, Rng* rng, RgcnCache& cache) const {
  if (x.rows() != config_.in_dim) throw ShapeError("rgcn forward: input has wrong row count");
  const auto n = static_cast<Index>(entities.size());
  cache.entities.assign(entities.begin(), entities.end());
  cache.blocks.assign(static_cast<std::size_t>(config_.num_relations), {});

  for (Index k = 0; k < n; ++k) {
    for (const auto& g : index.groups(entities[static_cast<std::size_t>(k)])) {
      if (g.relation >= config_.num_relations) throw ShapeError("rgcn forward: relation outside the layer");
      auto& b = cache.blocks[static_cast<std::size_t>(g.relation)];
      b.columns.push_back(k);
      b.nbrs.push_back(g.objects);
    }
  }

  cache.pre.setZero(config_.out_dim, n);
  for (std::size_t p = 0; p < cache.blocks.size(); ++p) {
    auto& b = cache.blocks[p];
    b.relation = static_cast<RelationId>(p);
    if (b.columns.empty()) continue;
    const auto m = static_cast<Index>(b.columns.size());
    b.means.setZero(config_.in_dim, m);
    for (Index q = 0; q < m; ++q) {
      const auto& nb = b.nbrs[static_cast<std::size_t>(q)];
      for (EntityId j : nb) b.means.col(q) += x.col(j);
      b.means.col(q) /= static_cast<double>(nb.size());
    }
    const Matrix msg = w_[p]->value * b.means;
    for (Index q = 0; q < m; ++q) cache.pre.col(b.columns[static_cast<std::size_t>(q)]) += msg.col(q);
  }
  if (w0_) {
    Matrix self(config_.in_dim, n);
    for (Index k = 0; k < n; ++k) self.col(k) = x.col(entities[static_cast<std::size_t>(k)]);
    cache.pre.noalias() += w0_->value * self;
  }

  cache.mask.resize(0, 0);
  if (training && config_.dropout > 0) {
    if (!rng) throw std::invalid_argument("rgcn forward: dropout needs an rng");
    std::bernoulli_distribution keep(1.0 - config_.dropout);
    const double scale = 1.0 / (1.0 - config_.dropout);
    cache.mask.resize(config_.out_dim, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < config_.out_dim; ++i) cache.mask(i, j) = keep(*rng) ? scale : 0.0;
    cache.pre.array() *= cache.mask.array();
  }

  if (config_.activation == Activation::ReLU) {
    cache.out = cache.pre.cwiseMax(0.0);
  } else {
    cache.out = cache.pre;
  }
  return cache.out;
}

void RgcnLayer::backward(const Matrix& x, const RgcnCache& cache, const Matrix& upstream, Matrix& dx) {
  const auto n = static_cast<Index>(cache.entities.size());
  require_shape(upstream, config_.out_dim, n, "rgcn backward upstream");
  require_shape(dx, x.rows(), x.cols(), "rgcn backward dx");

  Matrix delta = upstream;
  if (config_.activation == Activation::ReLU) delta.array() *= (cache.pre.array() > 0.0).cast<double>();
  if (cache.mask.size() != 0) delta.array() *= cache.mask.array();

  for (const auto& b : cache.blocks) {
    if (b.columns.empty()) continue;
    const auto m = static_cast<Index>(b.columns.size());
    Matrix d_p(config_.out_dim, m);
    for (Index q = 0; q < m; ++q) d_p.col(q) = delta.col(b.columns[static_cast<std::size_t>(q)]);
    Param& w = *w_[static_cast<std::size_t>(b.relation)];
    const Matrix back = w.value.transpose() * d_p;
    for (Index q = 0; q < m; ++q) {
      const auto& nb = b.nbrs[static_cast<std::size_t>(q)];
      const double inv = 1.0 / static_cast<double>(nb.size());
      for (EntityId j : nb) dx.col(j) += inv * back.col(q);
    }
    if (!w.frozen) w.grad_mut().noalias() += d_p * b.means.transpose();
  }
  if (w0_) {
    const Matrix back = w0_->value.transpose() * delta;
    for (Index k = 0; k < n; ++k) dx.col(cache.entities[static_cast<std::size_t>(k)]) += back.col(k);
    if (!w0_->frozen) {
      Matrix self(config_.in_dim, n);
      for (Index k = 0; k < n; ++k) self.col(k) = x.col(cache.entities[static_cast<std::size_t>(k)]);
      w0_->grad_mut().noalias() += delta * self.transpose();
    }
  }
}

Vector RgcnLayer::embed_new(const Matrix& x, std::span<const std::pair<RelationId, EntityId>> neighbors) const {
  if (neighbors.empty()) throw InductiveError("inductive embedding needs at least one neighbour");
  std::map<RelationId, std::vector<EntityId>> grouped;
  for (const auto& [p, j] : neighbors) {
    if (p < 0 || p >= config_.num_relations) throw InductiveError("relation id outside the layer");
    if (j < 0 || j >= x.cols()) throw InductiveError("neighbour id outside the known entities");
    grouped[p].push_back(j);
  }
  Vector pre = Vector::Zero(config_.out_dim);
  for (auto& [p, js] : grouped) {
    std::sort(js.begin(), js.end());
    js.erase(std::unique(js.begin(), js.end()), js.end());
    Vector mean = Vector::Zero(config_.in_dim);
    for (EntityId j : js) mean += x.col(j);
    mean /= static_cast<double>(js.size());
    pre.noalias() += w_[static_cast<std::size_t>(p)]->value * mean;
  }
  if (config_.activation == Activation::ReLU) return pre.cwiseMax(0.0);
  return pre;
}

Vector inductive_embed(const RgcnLayer& layer, const Matrix& x_known,
                       std::span<const std::pair<RelationId, EntityId>> neighbors) {
  return layer.embed_new(x_known, neighbors);
}

}  // namespace kge
