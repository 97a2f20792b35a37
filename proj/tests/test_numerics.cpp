#include <doctest.h>

#include <cmath>
#include <limits>

#include "gvvad/milcore.hpp"
#include "gvvad/numerics.hpp"
#include "gvvad/rng.hpp"
#include "helpers.hpp"

using namespace gvvad;

namespace {

VectorXd naive_linear(const MatrixXd& w, const VectorXd& b, const VectorXd& x) {
  VectorXd out(w.rows());
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * x[c];
    out[r] = acc + b[r];
  }
  return out;
}

}  // namespace

TEST_CASE("linear_forward matches an explicit loop") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rows = static_cast<Eigen::Index>(1 + rng.below(8));
    const auto cols = static_cast<Eigen::Index>(1 + rng.below(8));
    MatrixXd w(rows, cols);
    VectorXd b(rows), x(cols);
    for (auto& v : w.reshaped()) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    for (auto& v : x) v = rng.normal();
    CHECK((linear_forward(w, b, x) - naive_linear(w, b, x)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("linear_forward rejects mismatched shapes") {
  const MatrixXd w = MatrixXd::Ones(2, 3);
  CHECK_THROWS_AS(linear_forward(w, VectorXd::Zero(2), VectorXd::Zero(4)), ShapeError);
  CHECK_THROWS_AS(linear_forward(w, VectorXd::Zero(3), VectorXd::Zero(3)), ShapeError);
}

TEST_CASE("linear_forward flags non-finite output") {
  MatrixXd w = MatrixXd::Ones(1, 1);
  w(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(linear_forward(w, VectorXd::Zero(1), VectorXd::Ones(1)), NumericError);
}

TEST_CASE("stable_sigmoid") {
  CHECK(stable_sigmoid(0.0) == 0.5);
  const double big = stable_sigmoid(800.0);
  CHECK(big > 1.0 - 1e-12);
  CHECK(big <= 1.0);
  CHECK(std::isfinite(stable_sigmoid(-800.0)));
  CHECK(stable_sigmoid(-800.0) >= 0.0);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double x = 40.0 * (rng.uniform() - 0.5);
    CHECK(std::abs(stable_sigmoid(x) + stable_sigmoid(-x) - 1.0) <= 1e-15);
  }
  const Eigen::ArrayXd xs = Eigen::ArrayXd::LinSpaced(5, -2.0, 2.0);
  const Eigen::ArrayXd ys = stable_sigmoid(xs);
  for (Eigen::Index i = 0; i < xs.size(); ++i) CHECK(ys[i] == stable_sigmoid(xs[i]));
}

TEST_CASE("bce values and clamp") {
  CHECK(bce(1, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce(0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce(1, 1.0) == doctest::Approx(1e-7).epsilon(1e-6));
  CHECK(bce(0, 0.0) == doctest::Approx(1e-7).epsilon(1e-6));
  CHECK(std::isfinite(bce(1, 0.0)));
  CHECK(bce(1, 0.0) == doctest::Approx(-std::log(1e-7)));
  CHECK(bce_grad(1, 0.0) == 0.0);
  CHECK(bce_grad(1, 0.25) == doctest::Approx(-4.0));
  CHECK(bce_grad(0, 0.75) == doctest::Approx(4.0));
}

TEST_CASE("adam: zero gradient without decay is a fixed point") {
  VectorXd theta(3);
  theta << 1.0, -2.0, 0.5;
  const VectorXd start = theta;
  auto state = AdamState::for_size(3, 1e-3, 0.0);
  for (int i = 0; i < 10; ++i) adam_step(theta, VectorXd::Zero(3), state);
  CHECK(theta == start);
  CHECK(state.step == 10);
}

TEST_CASE("adam: first step moves each coordinate by lr") {
  VectorXd theta(4);
  theta << 0.3, -1.0, 2.0, 0.0;
  VectorXd g(4);
  g << 5.0, -0.01, 100.0, -3.0;
  const VectorXd start = theta;
  auto state = AdamState::for_size(4, 1e-3, 0.0);
  adam_step(theta, g, state);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(std::abs(std::abs(theta[i] - start[i]) - 1e-3) < 1e-9);
    CHECK((theta[i] - start[i]) * g[i] < 0.0);
  }
}

TEST_CASE("adam: decoupled weight decay shrinks parameters") {
  VectorXd theta = VectorXd::Constant(2, 2.0);
  auto state = AdamState::for_size(2, 0.1, 0.5);
  adam_step(theta, VectorXd::Zero(2), state);
  CHECK(theta[0] == doctest::Approx(2.0 * (1.0 - 0.05)).epsilon(1e-15));
}

TEST_CASE("adam: minimizes a quadratic monotonically") {
  VectorXd theta = VectorXd::Constant(1, 1.0);
  auto state = AdamState::for_size(1, 1e-2, 5e-3);
  double prev = theta.squaredNorm();
  for (int i = 0; i < 100; ++i) {
    adam_step(theta, 2.0 * theta, state);
    const double now = theta.squaredNorm();
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("adam is deterministic and checks shapes") {
  auto run = [] {
    VectorXd theta(2);
    theta << 1.0, 2.0;
    auto state = AdamState::for_size(2);
    for (int i = 0; i < 20; ++i) adam_step(theta, theta.array().sin().matrix(), state);
    return theta;
  };
  CHECK(run() == run());
  VectorXd theta = VectorXd::Zero(2);
  auto state = AdamState::for_size(2);
  CHECK_THROWS_AS(adam_step(theta, VectorXd::Zero(3), state), ShapeError);
}

TEST_CASE("finite differences: simple functions") {
  const auto quad = [](const VectorXd& t) { return t.squaredNorm(); };
  VectorXd at(2);
  at << 1.0, 2.0;
  const VectorXd g = finite_diff_grad(quad, at, 1e-5);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-8));

  const VectorXd flat = finite_diff_grad([](const VectorXd&) { return 3.0; }, at, 1e-5);
  CHECK(flat.isZero(0.0));
}

TEST_CASE("relative_error floor") {
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1e-9, 0.0) == doctest::Approx(1e-3));
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("finite differences agree with backprop on a tiny MIL batch") {
  Rng rng(11);
  const std::size_t dim = 3, hidden = 2;
  std::vector<VideoSample> videos;
  for (int i = 0; i < 3; ++i) {
    videos.push_back(testing::make_sample("a" + std::to_string(i), Label::anomalous, Source::real,
                                          testing::random_features(rng, 6, dim), 1, 1, 2));
    videos.push_back(testing::make_sample("n" + std::to_string(i), Label::normal, Source::real,
                                          testing::random_features(rng, 6, dim)));
  }
  std::vector<VideoPair> batch;
  for (std::size_t i = 0; i < videos.size(); i += 2) batch.push_back({&videos[i], &videos[i + 1]});
  TrainConfig config;
  config.k_rule = TopKRule{TopKRule::Kind::fixed, 2};
  ScorerParams params = ScorerParams::initialize(hidden, dim, 5);
  params.b1.setConstant(0.3);

  const auto analytic = total_loss_and_grads(params, batch, config).grad;
  const auto loss = [&](const VectorXd& t) {
    return total_loss_and_grads(ScorerParams::unflatten(t, hidden, dim), batch, config).loss.total;
  };
  const VectorXd numeric = finite_diff_grad(loss, params.flatten(), 1e-5);
  for (Eigen::Index i = 0; i < numeric.size(); ++i) CHECK(relative_error(analytic[i], numeric[i]) < 1e-5);
}
