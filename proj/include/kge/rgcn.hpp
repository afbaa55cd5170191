#pragma once

#include "kge/graph_store.hpp"
#include "kge/linalg.hpp"

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace kge {

enum class Activation { Identity, ReLU };

struct RgcnLayerConfig {
  Index in_dim = 0;
  Index out_dim = 0;
  /// Relations the layer aggregates over (doubled when inverse relations are on).
  std::int32_t num_relations = 0;
  bool self_loop = true;
  bool frozen = true;
  Activation activation = Activation::Identity;
  double dropout = 0.0;
};

/// Forward intermediates consumed by RgcnLayer::backward.
struct RgcnCache {
  struct Block {
    RelationId relation = 0;
    std::vector<Index> columns;                 // output column per row of `means`
    std::vector<std::span<const EntityId>> nbrs;
    Matrix means;                               // in_dim x columns.size()
  };
  std::vector<EntityId> entities;
  std::vector<Block> blocks;
  Matrix pre;   // pre-activation after dropout
  Matrix mask;  // empty when dropout is inactive
  Matrix out;
};

/// One relational graph convolution: out(i) = φ(Σ_p W_p mean_{j∈N_i^p} x_j + W_0 x_i).
class RgcnLayer {
 public:
  using Init = std::function<Matrix(Index rows, Index cols)>;

  RgcnLayer(ParamStore& store, const std::string& prefix, const RgcnLayerConfig& config, const Init& init);

  const RgcnLayerConfig& config() const { return config_; }
  Param& weight(RelationId p) { return *w_[static_cast<std::size_t>(p)]; }
  const Param& weight(RelationId p) const { return *w_[static_cast<std::size_t>(p)]; }
  bool has_self_loop() const { return w0_ != nullptr; }
  Param& self_weight() { return *w0_; }
  const Param& self_weight() const { return *w0_; }

  /// `x` holds one column per entity; only columns of `entities` and their
  /// neighbours are read.
  const Matrix& forward(const Matrix& x, const NeighborIndex& index, std::span<const EntityId> entities,
                        bool training, Rng* rng, RgcnCache& cache) const;

  /// Accumulates ∂L/∂x into `dx` (same shape as x) and, unless frozen, the
  /// weight gradients.
  void backward(const Matrix& x, const RgcnCache& cache, const Matrix& upstream, Matrix& dx);

  /// The layer applied to a node that is not part of the graph, from its
  /// (relation, neighbour) list only. Dropout is off and the self-loop is not used.
  Vector embed_new(const Matrix& x, std::span<const std::pair<RelationId, EntityId>> neighbors) const;

 private:
  RgcnLayerConfig config_;
  std::vector<Param*> w_;
  Param* w0_ = nullptr;
};

/// Convenience wrapper for the single-node inductive setting.
Vector inductive_embed(const RgcnLayer& layer, const Matrix& x_known,
                       std::span<const std::pair<RelationId, EntityId>> neighbors);

}  // namespace kge
