#include "kge/linalg.hpp"


#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kge {

Matrix& Param::grad_mut() {
  if (frozen) throw std::logic_error("gradient write into frozen param " + name);
  if (!has_grad()) grad = Matrix::Zero(value.rows(), value.cols());
  return grad;
}

Param& ParamStore::add(std::string name, Matrix value, bool frozen, double l2_weight) {
  if (index_.count(name)) throw std::invalid_argument("duplicate param " + name);
  check_finite(value, name);
  index_.emplace(name, params_.size());
  Param& p = params_.emplace_back();
  p.name = std::move(name);
  p.value = std::move(value);
  p.frozen = frozen;
  p.l2_weight = l2_weight;
  if (!frozen) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
  return p;
}

Param& ParamStore::at(const std::string& name) {
  if (auto* p = find(name)) return *p;
  throw std::out_of_range("no param " + name);
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no param " + name);
  return params_[it->second];
}

Param* ParamStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) != 0; }

void ParamStore::zero_grad() {
  for (auto& p : params_) {
    if (p.has_grad()) p.grad.setZero();
  }
}

std::size_t ParamStore::grad_bytes() const {
  std::size_t bytes = 0;
  for (const auto& p : params_) bytes += static_cast<std::size_t>(p.grad.size()) * sizeof(double);
  return bytes;
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (!p.frozen) n += static_cast<std::size_t>(p.value.size());
  }
  return n;
}

std::vector<Matrix> ParamStore::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void ParamStore::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw ShapeError("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    require_shape(values[i], params_[i].value.rows(), params_[i].value.cols(), params_[i].name.c_str());
    params_[i].value = values[i];
  }
}

Matrix init_normal(Index rows, Index cols, double mean, double std, Rng& rng) {
  if (std < 0) throw std::invalid_argument("init_normal: negative std");
  Matrix m(rows, cols);
  if (std == 0) {
    m.setConstant(mean);
    return m;
  }
  std::normal_distribution<double> dist(mean, std);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

Matrix init_normal(Index rows, Index cols, double mean, double std, std::uint64_t seed) {
  Rng rng(seed);
  return init_normal(rows, cols, mean, std, rng);
}

Matrix init_xavier(Index rows, Index cols, double gain, Rng& rng) {
  if (rows < 1 || cols < 1) throw ShapeError("init_xavier: empty shape");
  const double a = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  if (a == 0) {
    m.setZero();
    return m;
  }
  std::uniform_real_distribution<double> dist(-a, a);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

Matrix init_xavier(Index rows, Index cols, double gain, std::uint64_t seed) {
  Rng rng(seed);
  return init_xavier(rows, cols, gain, rng);
}

void check_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericalError("non-finite values in " + what);
}

Adam::Adam(ParamStore& store, AdamConfig config) : store_(store), config_(config) {
  for (auto& p : store_) {
    if (p.frozen) continue;
    slots_.push_back({&p, Matrix::Zero(p.value.rows(), p.value.cols()), Matrix::Zero(p.value.rows(), p.value.cols())});
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const double step = config_.lr / c1;
  const double sqrt_c2 = std::sqrt(c2);
  for (auto& s : slots_) {
    auto& g = s.param->grad;
    s.m = config_.beta1 * s.m + (1.0 - config_.beta1) * g;
    s.v = config_.beta2 * s.v + (1.0 - config_.beta2) * g.cwiseAbs2();
    if (config_.lr != 0) {
      s.param->value.array() -= step * s.m.array() / (s.v.array().sqrt() / sqrt_c2 + config_.eps);
    }
    g.setZero();
  }
}

std::size_t Adam::moment_bytes() const {
  std::size_t bytes = 0;
  for (const auto& s : slots_) bytes += static_cast<std::size_t>(s.m.size() + s.v.size()) * sizeof(double);
  return bytes;
}

GradCheckResult grad_check(ParamStore& store, const std::function<LossEval()>& loss,
                           const GradCheckOptions& options) {
  GradCheckResult result;
  Rng rng(options.seed);
  const std::uint64_t base_regime = loss().regime;
  for (auto& p : store) {
    if (p.frozen) continue;
    const Matrix analytic = p.grad;
    std::vector<Index> coords(static_cast<std::size_t>(p.value.size()));
    for (Index k = 0; k < p.value.size(); ++k) coords[static_cast<std::size_t>(k)] = k;
    if (options.max_coords_per_param && coords.size() > options.max_coords_per_param) {
      for (std::size_t i = 0; i < options.max_coords_per_param; ++i) {
        const auto j = i + static_cast<std::size_t>(rng() % (coords.size() - i));
        std::swap(coords[i], coords[j]);
      }
      coords.resize(options.max_coords_per_param);
    }
    for (Index k : coords) {
      double& x = p.value.data()[k];
      const double saved = x;
      x = saved + options.eps;
      const LossEval plus = loss();
      x = saved - options.eps;
      const LossEval minus = loss();
      x = saved;
      if (plus.regime != base_regime || minus.regime != base_regime) {
        ++result.skipped;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * options.eps);
      const double a = analytic.data()[k];
      if (std::abs(a) + std::abs(numeric) <= 1e-8) continue;
      // Below this magnitude the central difference is dominated by rounding
      // of the loss itself, so the comparison is made against it instead.
      const double resolution = 1e4 * std::numeric_limits<double>::epsilon() *
                                std::max({1.0, std::abs(plus.value), std::abs(minus.value)}) / options.eps;
      const double denom = std::max({std::abs(a), std::abs(numeric), resolution});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace kge
