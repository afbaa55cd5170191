#include "kge/model.hpp"
#include "kge/scoring.hpp"

#include <algorithm>
#include <cmath>

namespace kge {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::TransE: return "transe";
    case ModelKind::DistMult: return "distmult";
    case ModelKind::RgcnTransE: return "rgcn-transe";
    case ModelKind::RgcnDistMult: return "rgcn-distmult";
    case ModelKind::SpikE: return "spike";
    case ModelKind::Hybrid: return "hybrid";
    case ModelKind::SRGCN: return "srgcn";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& name) {
  for (auto k : {ModelKind::TransE, ModelKind::DistMult, ModelKind::RgcnTransE, ModelKind::RgcnDistMult,
                 ModelKind::SpikE, ModelKind::Hybrid, ModelKind::SRGCN}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown model '" + name +
                    "' (expected transe, distmult, rgcn-transe, rgcn-distmult, spike, hybrid or srgcn)");
}

std::string to_string(L2Mode mode) { return mode == L2Mode::Sum ? "sum" : "mean"; }

L2Mode parse_l2_mode(const std::string& name) {
  if (name == "sum") return L2Mode::Sum;
  if (name == "mean") return L2Mode::Mean;
  throw ConfigError("unknown l2 mode '" + name + "'");
}

DecoderKind decoder_of(ModelKind kind) {
  switch (kind) {
    case ModelKind::DistMult:
    case ModelKind::RgcnDistMult: return DecoderKind::DistMult;
    case ModelKind::SpikE:
    case ModelKind::Hybrid:
    case ModelKind::SRGCN: return DecoderKind::Spike;
    default: return DecoderKind::TransE;
  }
}

bool is_spiking(ModelKind kind) { return decoder_of(kind) == DecoderKind::Spike; }

bool uses_rgcn(ModelKind kind) { return kind == ModelKind::RgcnTransE || kind == ModelKind::RgcnDistMult; }

namespace {

std::vector<EntityId> all_entities(std::int32_t n) {
  std::vector<EntityId> out(static_cast<std::size_t>(n));
  for (std::int32_t e = 0; e < n; ++e) out[static_cast<std::size_t>(e)] = e;
  return out;
}

// Entities plus their one-hop neighbourhood, sorted and distinct.
std::vector<EntityId> receptive_field(std::span<const EntityId> entities, const NeighborIndex& index) {
  std::vector<EntityId> field(entities.begin(), entities.end());
  for (EntityId e : entities) {
    for (const auto& g : index.groups(e)) field.insert(field.end(), g.objects.begin(), g.objects.end());
  }
  std::sort(field.begin(), field.end());
  field.erase(std::unique(field.begin(), field.end()), field.end());
  return field;
}

class LookupEncoder final : public Encoder {
 public:
  explicit LookupEncoder(Param& e) : e_(e) {}

  const Matrix& forward(std::span<const EntityId> entities, bool, Rng*) override {
    entities_.assign(entities.begin(), entities.end());
    out_.resize(e_.value.rows(), static_cast<Index>(entities_.size()));
    for (std::size_t k = 0; k < entities_.size(); ++k) out_.col(static_cast<Index>(k)) = e_.value.col(entities_[k]);
    return out_;
  }

  void backward(const Matrix& upstream) override {
    Matrix& g = e_.grad_mut();
    for (std::size_t k = 0; k < entities_.size(); ++k) g.col(entities_[k]) += upstream.col(static_cast<Index>(k));
  }

  Matrix encode_all() override { return e_.value; }

 private:
  Param& e_;
  std::vector<EntityId> entities_;
  Matrix out_;
};

class RgcnEncoder final : public Encoder {
 public:
  RgcnEncoder(Param& e0, std::vector<std::unique_ptr<RgcnLayer>> layers, const NeighborIndex& index)
      : e0_(e0), layers_(std::move(layers)), index_(index), caches_(layers_.size()) {}

  RgcnLayer& first() { return *layers_.front(); }
  std::size_t depth() const { return layers_.size(); }

  const Matrix& forward(std::span<const EntityId> entities, bool training, Rng* rng) override {
    const auto all = all_entities(static_cast<std::int32_t>(e0_.value.cols()));
    inputs_.resize(layers_.size());
    const Matrix* x = &e0_.value;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      inputs_[l] = x;
      x = &layers_[l]->forward(*x, index_, all, training, rng, caches_[l]);
    }
    inputs_.back() = x;
    return layers_.back()->forward(*x, index_, entities, training, rng, caches_.back());
  }

  void backward(const Matrix& upstream) override {
    Matrix grad = upstream;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      if (l == 0) {
        layers_[0]->backward(*inputs_[0], caches_[0], grad, e0_.grad_mut());
      } else {
        Matrix dx = Matrix::Zero(inputs_[l]->rows(), inputs_[l]->cols());
        layers_[l]->backward(*inputs_[l], caches_[l], grad, dx);
        grad = std::move(dx);
      }
    }
  }

  Matrix encode_all() override {
    forward(all_entities(static_cast<std::int32_t>(e0_.value.cols())), false, nullptr);
    return caches_.back().out;
  }

 private:
  Param& e0_;
  std::vector<std::unique_ptr<RgcnLayer>> layers_;
  const NeighborIndex& index_;
  std::vector<RgcnCache> caches_;
  std::vector<const Matrix*> inputs_;
};

class SpikeEncoder final : public Encoder {
 public:
  explicit SpikeEncoder(std::unique_ptr<SpikePopulations> pop) : pop_(std::move(pop)) {}
  SpikePopulations& populations() { return *pop_; }

  const Matrix& forward(std::span<const EntityId> entities, bool, Rng*) override { return pop_->forward(entities); }
  void backward(const Matrix& upstream) override { pop_->backward(upstream); }
  double penalty(bool accumulate_grad) override { return pop_->penalty(accumulate_grad); }
  std::uint64_t regime() const override { return pop_->regime(); }
  Matrix encode_all() override { return pop_->spike_times_all(); }

 private:
  std::unique_ptr<SpikePopulations> pop_;
};

// Spike times of the receptive field scattered into a full-width matrix so
// the convolution can index by entity id.
class FieldBuffer {
 public:
  void fill(SpikePopulations& pop, std::span<const EntityId> entities, const NeighborIndex& index,
            std::int32_t num_entities) {
    field_ = receptive_field(entities, index);
    const Matrix& t = pop.forward(field_);
    x_.setZero(pop.dim(), num_entities);
    for (std::size_t k = 0; k < field_.size(); ++k) x_.col(field_[k]) = t.col(static_cast<Index>(k));
  }
  void push_back(SpikePopulations& pop, const Matrix& dx) const {
    Matrix up(dx.rows(), static_cast<Index>(field_.size()));
    for (std::size_t k = 0; k < field_.size(); ++k) up.col(static_cast<Index>(k)) = dx.col(field_[k]);
    pop.backward(up);
  }
  const Matrix& x() const { return x_; }

 private:
  std::vector<EntityId> field_;
  Matrix x_;
};

class HybridEncoder final : public Encoder {
 public:
  HybridEncoder(std::unique_ptr<SpikePopulations> pop, std::unique_ptr<RgcnLayer> layer, const NeighborIndex& index,
                std::int32_t num_entities)
      : pop_(std::move(pop)), layer_(std::move(layer)), index_(index), n_(num_entities) {}
  SpikePopulations& populations() { return *pop_; }
  RgcnLayer& layer() { return *layer_; }

  const Matrix& forward(std::span<const EntityId> entities, bool training, Rng* rng) override {
    buffer_.fill(*pop_, entities, index_, n_);
    return layer_->forward(buffer_.x(), index_, entities, training, rng, cache_);
  }
  void backward(const Matrix& upstream) override {
    Matrix dx = Matrix::Zero(buffer_.x().rows(), buffer_.x().cols());
    layer_->backward(buffer_.x(), cache_, upstream, dx);
    buffer_.push_back(*pop_, dx);
  }
  double penalty(bool accumulate_grad) override { return pop_->penalty(accumulate_grad); }
  std::uint64_t regime() const override { return pop_->regime(); }
  Matrix encode_all() override {
    forward(all_entities(n_), false, nullptr);
    return cache_.out;
  }

 private:
  std::unique_ptr<SpikePopulations> pop_;
  std::unique_ptr<RgcnLayer> layer_;
  const NeighborIndex& index_;
  std::int32_t n_;
  FieldBuffer buffer_;
  RgcnCache cache_;
};

class SrgcnEncoder final : public Encoder {
 public:
  SrgcnEncoder(std::unique_ptr<SpikePopulations> pop, std::unique_ptr<SrgcnLayer> layer, const NeighborIndex& index,
               std::int32_t num_entities)
      : pop_(std::move(pop)), layer_(std::move(layer)), index_(index), n_(num_entities) {}
  SpikePopulations& populations() { return *pop_; }
  SrgcnLayer& layer() { return *layer_; }

  const Matrix& forward(std::span<const EntityId> entities, bool, Rng*) override {
    buffer_.fill(*pop_, entities, index_, n_);
    return layer_->forward(buffer_.x(), index_, entities);
  }
  void backward(const Matrix& upstream) override {
    Matrix dx = Matrix::Zero(buffer_.x().rows(), buffer_.x().cols());
    layer_->backward(upstream, dx);
    buffer_.push_back(*pop_, dx);
  }
  double penalty(bool accumulate_grad) override { return pop_->penalty(accumulate_grad); }
  std::uint64_t regime() const override { return hash_mix(pop_->regime(), layer_->regime()); }
  Matrix encode_all() override { return forward(all_entities(n_), false, nullptr); }

 private:
  std::unique_ptr<SpikePopulations> pop_;
  std::unique_ptr<SrgcnLayer> layer_;
  const NeighborIndex& index_;
  std::int32_t n_;
  FieldBuffer buffer_;
};

}  // namespace

Model::Model(const ModelConfig& config, const KnowledgeGraph& kg) : config_(config), kg_(&kg) {
  if (config.dim < 1) throw ConfigError("dim must be positive");
  if (config.layers < 1) throw ConfigError("layers must be at least 1");
  const auto n = kg.num_entities();
  const auto n_rel = kg.num_relations();
  const auto& index = kg.neighbors();
  const double gain = std::sqrt(2.0);
  const Index d = config.dim;
  Rng rng(config.seed);
  const bool spiking = is_spiking(config.kind);
  const double l2 = spiking ? 0.0 : config.l2_weight;

  // Entity-side params first so every model kind consumes the rng identically
  // up to the point where they differ.
  Param* e = nullptr;
  std::unique_ptr<SpikePopulations> pop;
  if (spiking) {
    pop = std::make_unique<SpikePopulations>(params_, "spike.w", n, d, config.spike, rng);
  } else {
    e = &params_.add("E", init_normal(d, n, 0.0, 1.0, rng), false, config.l2_mode == L2Mode::Sum ? l2 : 0.0);
  }
  relations_ = &params_.add(spiking ? "Delta" : "R", init_xavier(d, n_rel, gain, rng), false,
                            config.l2_mode == L2Mode::Sum ? l2 : 0.0);

  auto xavier = [&rng, gain](Index rows, Index cols) { return init_xavier(rows, cols, gain, rng); };
  RgcnLayerConfig lc;
  lc.in_dim = d;
  lc.out_dim = d;
  lc.num_relations = index.num_relations();
  lc.self_loop = config.self_loop;
  lc.frozen = config.frozen;
  lc.activation = config.activation;
  lc.dropout = config.dropout;

  switch (config.kind) {
    case ModelKind::TransE:
    case ModelKind::DistMult:
      encoder_ = std::make_unique<LookupEncoder>(*e);
      break;
    case ModelKind::RgcnTransE:
    case ModelKind::RgcnDistMult: {
      std::vector<std::unique_ptr<RgcnLayer>> layers;
      for (int l = 0; l < config.layers; ++l) {
        layers.push_back(std::make_unique<RgcnLayer>(params_, "rgcn" + std::to_string(l), lc, xavier));
      }
      encoder_ = std::make_unique<RgcnEncoder>(*e, std::move(layers), index);
      break;
    }
    case ModelKind::SpikE:
      encoder_ = std::make_unique<SpikeEncoder>(std::move(pop));
      break;
    case ModelKind::Hybrid: {
      lc.frozen = true;
      lc.activation = Activation::Identity;
      auto layer = std::make_unique<RgcnLayer>(params_, "rgcn0", lc, xavier);
      encoder_ = std::make_unique<HybridEncoder>(std::move(pop), std::move(layer), index, n);
      break;
    }
    case ModelKind::SRGCN: {
      auto layer = std::make_unique<SrgcnLayer>(params_, "srgcn0", index.num_relations(), d, config.self_loop,
                                                config.spike, rng);
      encoder_ = std::make_unique<SrgcnEncoder>(std::move(pop), std::move(layer), index, n);
      break;
    }
  }
}

Model::~Model() = default;

Orientation Model::orientation() const {
  return decoder() == DecoderKind::DistMult ? Orientation::HigherIsBetter : Orientation::LowerIsBetter;
}

RgcnLayer* Model::rgcn_layer() {
  if (auto* r = dynamic_cast<RgcnEncoder*>(encoder_.get())) return &r->first();
  if (auto* h = dynamic_cast<HybridEncoder*>(encoder_.get())) return &h->layer();
  return nullptr;
}

const Matrix* Model::initial_embeddings() const {
  if (!uses_rgcn(config_.kind)) return nullptr;
  return &params_.at("E").value;
}

SpikePopulations* Model::populations() {
  if (auto* s = dynamic_cast<SpikeEncoder*>(encoder_.get())) return &s->populations();
  if (auto* h = dynamic_cast<HybridEncoder*>(encoder_.get())) return &h->populations();
  if (auto* g = dynamic_cast<SrgcnEncoder*>(encoder_.get())) return &g->populations();
  return nullptr;
}

SrgcnLayer* Model::srgcn_layer() {
  if (auto* g = dynamic_cast<SrgcnEncoder*>(encoder_.get())) return &g->layer();
  return nullptr;
}

Model::BatchLoss Model::batch_loss(std::span<const Triple> positives, std::span<const Triple> negatives, double gamma,
                                   bool training, Rng* rng, bool accumulate_grad, const std::vector<bool>* keep,
                                   bool defer_encoder_backward) {
  BatchLoss result;
  if (positives.empty()) return result;
  if (negatives.size() % positives.size() != 0) throw std::invalid_argument("negatives must be k per positive");
  const std::size_t k = negatives.size() / positives.size();
  const auto n = kg_->num_entities();

  auto kept = [keep](EntityId e) { return !keep || (*keep)[static_cast<std::size_t>(e)]; };
  std::vector<EntityId> ents;
  for (auto span : {positives, negatives}) {
    for (const auto& t : span) {
      if (kept(t.subject) && kept(t.object)) {
        ents.push_back(t.subject);
        ents.push_back(t.object);
      }
    }
  }
  std::sort(ents.begin(), ents.end());
  ents.erase(std::unique(ents.begin(), ents.end()), ents.end());
  std::vector<Index> col(static_cast<std::size_t>(n), -1);
  for (std::size_t c = 0; c < ents.size(); ++c) col[static_cast<std::size_t>(ents[c])] = static_cast<Index>(c);

  const Matrix& f = encoder_->forward(ents, training, rng);
  const Matrix& rel = relations_->value;
  Matrix df;
  Matrix* drel = nullptr;
  if (accumulate_grad) {
    df.setZero(f.rows(), f.cols());
    drel = &relations_->grad_mut();
  }
  const DecoderKind dec = decoder();
  std::uint64_t regime = 0;

  // Returns the distance and, when `w` is nonzero, adds w·∂d into the buffers.
  Vector residual(config_.dim);
  auto eval = [&](const Triple& t, double w, bool track) {
    const Index cs = col[static_cast<std::size_t>(t.subject)], co = col[static_cast<std::size_t>(t.object)];
    auto fs = f.col(cs);
    auto fo = f.col(co);
    auto r = rel.col(t.predicate);
    if (dec == DecoderKind::DistMult) {
      const double d = -(fs.array() * r.array() * fo.array()).sum();
      if (w != 0.0) {
        df.col(cs).array() -= w * r.array() * fo.array();
        df.col(co).array() -= w * r.array() * fs.array();
        drel->col(t.predicate).array() -= w * fs.array() * fo.array();
      }
      return d;
    }
    if (dec == DecoderKind::TransE) {
      residual = fs + r - fo;
    } else {
      residual = fs - fo - r;
    }
    if (track) {
      for (Index i = 0; i < residual.size(); ++i) regime = hash_mix(regime, residual(i) > 0 ? 2 : residual(i) < 0 ? 1 : 0);
    }
    if (w != 0.0) {
      const Vector sg = w * residual.array().sign().matrix();
      df.col(cs) += sg;
      df.col(co) -= sg;
      if (dec == DecoderKind::TransE) {
        drel->col(t.predicate) += sg;
      } else {
        drel->col(t.predicate) -= sg;
      }
    }
    return residual.lpNorm<1>();
  };

  std::size_t pairs = 0;
  std::vector<double> d_pos(positives.size());
  std::vector<std::vector<double>> d_neg(positives.size());
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto& pos = positives[i];
    if (!kept(pos.subject) || !kept(pos.object)) continue;
    d_pos[i] = eval(pos, 0.0, true);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& neg = negatives[i * k + j];
      if (!kept(neg.subject) || !kept(neg.object)) continue;
      d_neg[i].push_back(eval(neg, 0.0, true));
      ++pairs;
    }
  }
  if (pairs == 0) return result;
  const double inv_pairs = 1.0 / static_cast<double>(pairs);

  double hinge = 0.0;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto& pos = positives[i];
    if (!kept(pos.subject) || !kept(pos.object)) continue;
    std::size_t active = 0;
    std::size_t q = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const auto& neg = negatives[i * k + j];
      if (!kept(neg.subject) || !kept(neg.object)) continue;
      const double h = hinge_loss(d_pos[i], d_neg[i][q++], gamma);
      regime = hash_mix(regime, h > 0 ? 1 : 0);
      if (h > 0) {
        hinge += h;
        ++active;
        if (accumulate_grad) eval(neg, -inv_pairs, false);
      }
    }
    result.active_pairs += active;
    if (accumulate_grad && active) eval(pos, inv_pairs * static_cast<double>(active), false);
  }
  hinge *= inv_pairs;

  double reg = 0.0;
  const bool spiking = is_spiking(config_.kind);
  if (!spiking && config_.l2_weight > 0) {
    const double lambda = config_.l2_weight;
    if (config_.l2_mode == L2Mode::Mean) {
      const double nf = static_cast<double>(f.size()), nr = static_cast<double>(rel.size());
      reg = lambda * (f.squaredNorm() / nf + rel.squaredNorm() / nr);
      if (accumulate_grad) {
        df += (2.0 * lambda / nf) * f;
        *drel += (2.0 * lambda / nr) * rel;
      }
    } else {
      for (auto& p : params_) {
        if (p.l2_weight <= 0) continue;
        reg += p.l2_weight * p.value.squaredNorm();
        if (accumulate_grad && !p.frozen) p.grad_mut() += 2.0 * p.l2_weight * p.value;
      }
    }
  }
  if (accumulate_grad) {
    if (defer_encoder_backward) {
      pending_ = std::move(df);
      has_pending_ = true;
    } else {
      encoder_->backward(df);
    }
  }
  reg += encoder_->penalty(accumulate_grad);

  result.hinge = hinge;
  result.regularizer = reg;
  result.loss = hinge + reg;
  result.regime = hash_mix(regime, encoder_->regime());
  if (!std::isfinite(result.loss)) throw NumericalError("non-finite batch loss");
  return result;
}

void Model::encoder_backward() {
  if (!has_pending_) throw std::logic_error("encoder_backward without a deferred batch");
  encoder_->backward(pending_);
  has_pending_ = false;
}

double Model::distance(const Vector& s, const Vector& r, const Vector& o) const {
  switch (decoder()) {
    case DecoderKind::TransE: return transe_distance(s, r, o);
    case DecoderKind::Spike: return spike_distance(s, r, o);
    case DecoderKind::DistMult: return -distmult_score(s, r, o);
  }
  return 0.0;
}

double Model::score(const Matrix& encoded, const Triple& t) const {
  const double d = distance(encoded.col(t.subject), relation(t.predicate), encoded.col(t.object));
  return decoder() == DecoderKind::DistMult ? -d : d;
}

Vector Model::score_candidates(const Matrix& encoded, const Triple& t, Side side) const {
  const auto r = relations_->value.col(t.predicate);
  switch (decoder()) {
    case DecoderKind::TransE:
      return side == Side::Object ? l1_to_columns(encoded, encoded.col(t.subject) + r)
                                  : l1_to_columns(encoded, encoded.col(t.object) - r);
    case DecoderKind::Spike:
      return side == Side::Object ? l1_to_columns(encoded, encoded.col(t.subject) - r)
                                  : l1_to_columns(encoded, encoded.col(t.object) + r);
    case DecoderKind::DistMult: {
      const Vector q = (side == Side::Object ? encoded.col(t.subject) : encoded.col(t.object)).cwiseProduct(r);
      return encoded.transpose() * q;
    }
  }
  return {};
}

Vector Model::score_against(const Vector& query, RelationId p, const Matrix& encoded) const {
  const auto r = relations_->value.col(p);
  switch (decoder()) {
    case DecoderKind::TransE: return l1_to_columns(encoded, query + r);
    case DecoderKind::Spike: return l1_to_columns(encoded, query - r);
    case DecoderKind::DistMult: return encoded.transpose() * query.cwiseProduct(r);
  }
  return {};
}

}  // namespace kge
