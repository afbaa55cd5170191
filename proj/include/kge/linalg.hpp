#pragma once

#include "kge/types.hpp"

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace kge {

/// A named dense tensor with an optional gradient buffer. Frozen parameters
/// never allocate `grad`.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  bool frozen = false;
  double l2_weight = 0.0;

  bool has_grad() const { return grad.size() != 0; }
  /// Gradient buffer for writing; throws std::logic_error on frozen params.
  Matrix& grad_mut();
};

/// Owns parameters with stable addresses.
class ParamStore {
 public:
  Param& add(std::string name, Matrix value, bool frozen = false, double l2_weight = 0.0);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  Param* find(const std::string& name);
  bool contains(const std::string& name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  void zero_grad();
  /// Bytes held by gradient buffers.
  std::size_t grad_bytes() const;
  std::size_t trainable_count() const;

  /// Copies values only; used for best-checkpoint retention.
  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

 private:
  std::deque<Param> params_;
  std::map<std::string, std::size_t> index_;
};

Matrix init_normal(Index rows, Index cols, double mean, double std, Rng& rng);
Matrix init_normal(Index rows, Index cols, double mean, double std, std::uint64_t seed);
/// Uniform on [-a, a] with a = gain * sqrt(6 / (fan_in + fan_out)), fan_in = cols, fan_out = rows.
Matrix init_xavier(Index rows, Index cols, double gain, Rng& rng);
Matrix init_xavier(Index rows, Index cols, double gain, std::uint64_t seed);

/// Throws NumericalError naming `what` when `m` holds NaN or Inf.
void check_finite(const Matrix& m, const std::string& what);

template <typename Derived>
void require_shape(const Eigen::MatrixBase<Derived>& m, Index rows, Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments are allocated at construction for the non-frozen params of `store`.
class Adam {
 public:
  Adam(ParamStore& store, AdamConfig config = {});

  /// One bias-corrected update over every trainable param, then zeroes grads.
  void step();
  std::size_t moment_bytes() const;
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

 private:
  struct Slot {
    Param* param;
    Matrix m, v;
  };
  ParamStore& store_;
  AdamConfig config_;
  std::vector<Slot> slots_;
  std::int64_t t_ = 0;
};

/// Loss value plus a fingerprint of the piecewise regime it was evaluated in
/// (active hinges, L1 signs, causal sets). Perturbations that change the
/// fingerprint are excluded from the finite-difference comparison.
struct LossEval {
  double value = 0.0;
  std::uint64_t regime = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  /// 0 checks every coordinate.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Compares the grads currently stored in `store` against central differences
/// of `loss`. Frozen params are skipped. The error of one coordinate is
/// |a − n| / max(|a|, |n|, r) where r = 1e4·ε_mach·|loss|/eps is the smallest
/// slope the difference quotient resolves.
GradCheckResult grad_check(ParamStore& store, const std::function<LossEval()>& loss,
                           const GradCheckOptions& options = {});

/// FNV-1a style mixing for regime fingerprints.
inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

struct CheckpointTensor {
  std::string name;
  bool frozen = false;
  Matrix value;
};

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<CheckpointTensor> tensors;
};

/// Binary file plus a `<path>.manifest` text listing.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const std::map<std::string, std::string>& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Copies tensors into same-named params; throws ShapeError on mismatch and
/// VocabularyError when a param is missing from the checkpoint.
void restore_params(ParamStore& store, const Checkpoint& ckpt);

}  // namespace kge
