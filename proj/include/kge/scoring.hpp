#pragma once

#include "kge/types.hpp"

#include <algorithm>
#include <string>

namespace kge {

namespace detail {
template <typename A, typename B>
void same_length(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": dimension mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}
}  // namespace detail

/// ‖e_s + r_p − e_o‖₁
template <typename S, typename R, typename O>
typename S::Scalar transe_distance(const Eigen::MatrixBase<S>& e_s, const Eigen::MatrixBase<R>& r_p,
                                   const Eigen::MatrixBase<O>& e_o) {
  detail::same_length(e_s, r_p, "transe_distance");
  detail::same_length(e_s, e_o, "transe_distance");
  return (e_s + r_p - e_o).template lpNorm<1>();
}

/// sign(e_s + r_p − e_o) with sign(0) = 0. This is ∂d/∂e_s and ∂d/∂r_p; ∂d/∂e_o is its negation.
template <typename S, typename R, typename O>
auto transe_grad(const Eigen::MatrixBase<S>& e_s, const Eigen::MatrixBase<R>& r_p, const Eigen::MatrixBase<O>& e_o) {
  detail::same_length(e_s, r_p, "transe_grad");
  detail::same_length(e_s, e_o, "transe_grad");
  using Plain = typename S::PlainObject;
  return Plain((e_s + r_p - e_o).array().sign().matrix());
}

/// Σ_k e_s[k] r_p[k] e_o[k]
template <typename S, typename R, typename O>
typename S::Scalar distmult_score(const Eigen::MatrixBase<S>& e_s, const Eigen::MatrixBase<R>& r_p,
                                  const Eigen::MatrixBase<O>& e_o) {
  detail::same_length(e_s, r_p, "distmult_score");
  detail::same_length(e_s, e_o, "distmult_score");
  return (e_s.array() * r_p.array() * e_o.array()).sum();
}

/// ‖t_s − t_o − Δ_p‖₁
template <typename S, typename D, typename O>
typename S::Scalar spike_distance(const Eigen::MatrixBase<S>& t_s, const Eigen::MatrixBase<D>& delta_p,
                                  const Eigen::MatrixBase<O>& t_o) {
  detail::same_length(t_s, delta_p, "spike_distance");
  detail::same_length(t_s, t_o, "spike_distance");
  return (t_s - t_o - delta_p).template lpNorm<1>();
}

template <typename T>
T hinge_loss(T d_pos, T d_neg, T gamma) {
  return std::max(T(0), gamma + d_pos - d_neg);
}

/// L1 distance from `q` to every column of `candidates`.
template <typename C, typename Q>
Eigen::Matrix<typename C::Scalar, Eigen::Dynamic, 1> l1_to_columns(const Eigen::MatrixBase<C>& candidates,
                                                                   const Eigen::MatrixBase<Q>& q) {
  if (candidates.rows() != q.size()) throw ShapeError("l1_to_columns: dimension mismatch");
  return (candidates.colwise() - q).cwiseAbs().colwise().sum().transpose();
}

}  // namespace kge
