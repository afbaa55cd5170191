#pragma once

#include "kge/graph_store.hpp"
#include "kge/linalg.hpp"
#include "kge/rgcn.hpp"
#include "kge/spiking.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kge {

enum class ModelKind { TransE, DistMult, RgcnTransE, RgcnDistMult, SpikE, Hybrid, SRGCN };
enum class DecoderKind { TransE, DistMult, Spike };
enum class Orientation { LowerIsBetter, HigherIsBetter };

/// `Sum` adds λ‖θ‖² over every regularised param. `Mean` adds λ times the mean
/// square of the encoded batch embeddings plus that of the relation matrix.
enum class L2Mode { Sum, Mean };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);
std::string to_string(L2Mode mode);
L2Mode parse_l2_mode(const std::string& name);
DecoderKind decoder_of(ModelKind kind);
bool is_spiking(ModelKind kind);
bool uses_rgcn(ModelKind kind);

struct ModelConfig {
  ModelKind kind = ModelKind::TransE;
  Index dim = 64;
  bool frozen = true;
  bool self_loop = true;
  int layers = 1;
  Activation activation = Activation::Identity;
  double dropout = 0.2;
  double l2_weight = 1e-2;
  L2Mode l2_mode = L2Mode::Mean;
  SpikeConfig spike;
  std::uint64_t seed = 42;
};

/// Maps entity ids to output vectors. forward/backward operate on a sorted set
/// of distinct entities; column k of the output belongs to entities[k].
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual const Matrix& forward(std::span<const EntityId> entities, bool training, Rng* rng) = 0;
  virtual void backward(const Matrix& upstream) = 0;
  /// Extra loss on the params touched by the last forward.
  virtual double penalty(bool accumulate_grad) { (void)accumulate_grad; return 0.0; }
  virtual std::uint64_t regime() const { return 0; }
  /// Evaluation-mode outputs for every entity.
  virtual Matrix encode_all() = 0;
};

class Model {
 public:
  Model(const ModelConfig& config, const KnowledgeGraph& kg);
  ~Model();
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  const KnowledgeGraph& graph() const { return *kg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  Encoder& encoder() { return *encoder_; }
  DecoderKind decoder() const { return decoder_of(config_.kind); }
  Orientation orientation() const;
  Index dim() const { return config_.dim; }

  /// Relation embedding (R column, or Δ for spiking decoders).
  Param& relations() { return *relations_; }
  const Param& relations() const { return *relations_; }

  struct BatchLoss {
    double loss = 0.0;
    double hinge = 0.0;
    double regularizer = 0.0;
    std::size_t active_pairs = 0;
    std::uint64_t regime = 0;
  };

  /// Mean hinge over all (positive, negative) pairs plus regularisers.
  /// `negatives` holds k consecutive corruptions per positive. Optionally
  /// restrict encoding to `keep` entities (pairs touching others are dropped).
  BatchLoss batch_loss(std::span<const Triple> positives, std::span<const Triple> negatives, double gamma,
                       bool training, Rng* rng, bool accumulate_grad, const std::vector<bool>* keep = nullptr,
                       bool defer_encoder_backward = false);
  /// Runs the encoder backward held back by a deferred batch_loss.
  void encoder_backward();

  Matrix encode_all() { return encoder_->encode_all(); }
  Vector relation(RelationId p) const { return relations_->value.col(p); }

  /// Natural score of a triple given `encoded` = encode_all().
  double score(const Matrix& encoded, const Triple& t) const;
  /// Scores of every entity substituted on `side` of `t`.
  Vector score_candidates(const Matrix& encoded, const Triple& t, Side side) const;
  /// Scores of (query, p, e) for every e, given an external query vector.
  Vector score_against(const Vector& query, RelationId p, const Matrix& encoded) const;

  /// Present for R-GCN-based models.
  RgcnLayer* rgcn_layer();
  const Matrix* initial_embeddings() const;
  /// Present for spiking models.
  SpikePopulations* populations();
  SrgcnLayer* srgcn_layer();

 private:
  double distance(const Vector& s, const Vector& r, const Vector& o) const;

  ModelConfig config_;
  const KnowledgeGraph* kg_;
  ParamStore params_;
  Param* relations_ = nullptr;
  std::unique_ptr<Encoder> encoder_;
  Matrix pending_;
  bool has_pending_ = false;
};

}  // namespace kge
