#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "gvvad/errors.hpp"

namespace gvvad {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

/// weights·x + bias.
template <typename DW, typename DB, typename DX>
Vector<typename DW::Scalar> linear_forward(const Eigen::MatrixBase<DW>& weights,
                                           const Eigen::MatrixBase<DB>& bias,
                                           const Eigen::MatrixBase<DX>& x) {
  if (x.cols() != 1 || bias.cols() != 1 || weights.cols() != x.rows() ||
      weights.rows() != bias.rows()) {
    throw ShapeError("linear_forward: weights " + shape_string(weights.rows(), weights.cols()) +
                     ", bias " + shape_string(bias.rows(), bias.cols()) + ", x " +
                     shape_string(x.rows(), x.cols()));
  }
  Vector<typename DW::Scalar> out = weights * x + bias;
  if (!out.allFinite()) throw NumericError("linear_forward produced a non-finite value");
  return out;
}

/// Logistic function without overflow for any finite input.
template <std::floating_point Scalar>
Scalar stable_sigmoid(Scalar x) noexcept {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
auto stable_sigmoid(const Eigen::ArrayBase<Derived>& x) {
  return x.unaryExpr([](typename Derived::Scalar v) { return stable_sigmoid(v); });
}

inline constexpr double default_clamp_eps = 1e-7;

/// Binary cross-entropy of a prediction clamped to [eps, 1 - eps].
template <std::floating_point Scalar>
Scalar bce(int y, Scalar y_hat, Scalar clamp_eps = Scalar(default_clamp_eps)) {
  const Scalar p = std::clamp(y_hat, clamp_eps, Scalar(1) - clamp_eps);
  return y == 1 ? -std::log(p) : -std::log1p(-p);
}

/// d bce / d y_hat, zero where the clamp is active.
template <std::floating_point Scalar>
Scalar bce_grad(int y, Scalar y_hat, Scalar clamp_eps = Scalar(default_clamp_eps)) {
  if (y_hat < clamp_eps || y_hat > Scalar(1) - clamp_eps) return Scalar(0);
  return y == 1 ? -Scalar(1) / y_hat : Scalar(1) / (Scalar(1) - y_hat);
}

/// Adam moments and hyperparameters for a flat parameter vector.
struct AdamState {
  std::uint64_t step = 0;
  VectorXd first_moment;
  VectorXd second_moment;
  double lr = 1e-3;
  double weight_decay = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_size(Eigen::Index n, double lr = 1e-3, double weight_decay = 5e-3) {
    AdamState s;
    s.first_moment = VectorXd::Zero(n);
    s.second_moment = VectorXd::Zero(n);
    s.lr = lr;
    s.weight_decay = weight_decay;
    return s;
  }
};

/// One Adam update with decoupled weight decay (params shrink by lr·wd
/// before the moment update). Bias correction uses the incremented step.
inline void adam_step(Eigen::Ref<VectorXd> params, const Eigen::Ref<const VectorXd>& grads,
                      AdamState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("adam_step: params " + std::to_string(params.size()) + ", grads " +
                     std::to_string(grads.size()) + ", moments " +
                     std::to_string(state.first_moment.size()) + "/" +
                     std::to_string(state.second_moment.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);

  params -= (state.lr * state.weight_decay) * params;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  params.array() -= state.lr * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.eps);
}

/// Central-difference gradient of a scalar function.
template <typename F>
VectorXd finite_diff_grad(F&& f, const VectorXd& theta, double h) {
  VectorXd grad(theta.size());
  VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const double up = f(probe);
    probe[i] = theta[i] - h;
    const double down = f(probe);
    probe[i] = theta[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline constexpr double relative_error_floor = 1e-6;

/// |a - b| / max(|a|, |b|, floor). The floor keeps exact zeros comparable.
inline double relative_error(double analytic, double numeric,
                             double floor = relative_error_floor) noexcept {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace gvvad
