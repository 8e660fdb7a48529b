#include <doctest.h>

#include <cmath>

#include "lexisafe/approximator.hpp"
#include "lexisafe/errors.hpp"
#include "lexisafe/rng.hpp"

using namespace lexisafe;

namespace {

// Relative error with an absolute floor so near-zero gradients compare sanely.
double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

double max_fd_error(const MlpSpec& spec, std::uint64_t seed) {
  RngStream rng(seed, "gradcheck");
  ParamVector p = init_params(spec, rng);
  for (auto& v : p.values) v += 0.1 * (rng.uniform() - 0.5);  // nonzero biases
  std::vector<double> x(spec.input_dim), g(spec.output_dim);
  for (auto& v : x) v = 2.0 * rng.uniform() - 1.0;
  for (auto& v : g) v = 2.0 * rng.uniform() - 1.0;
  const auto grad = backward(spec, p, x, g);
  auto objective = [&](const ParamVector& q) {
    const Eigen::VectorXd y = forward(spec, q, x);
    double s = 0.0;
    for (std::size_t k = 0; k < spec.output_dim; ++k) s += g[k] * y(static_cast<Eigen::Index>(k));
    return s;
  };
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < p.size(); ++i) {
    ParamVector plus = p, minus = p;
    plus[i] += h;
    minus[i] -= h;
    worst = std::max(worst, rel_err(grad[i], (objective(plus) - objective(minus)) / (2 * h)));
  }
  return worst;
}

}  // namespace

TEST_CASE("parameter count and depth") {
  MlpSpec s{2, {3}, 1, Activation::relu};
  CHECK(s.param_count() == (2 + 1) * 3 + (3 + 1) * 1);
  CHECK(s.depth() == 2);
  CHECK_THROWS_AS((MlpSpec{0, {3}, 1}.validate()), ConfigError);
}

TEST_CASE("zero parameters give a zero output") {
  MlpSpec s{3, {5, 4}, 2, Activation::tanh};
  ParamVector p(s.param_count());
  const Eigen::VectorXd y = forward(s, p, std::vector<double>{0.3, -1.0, 2.0});
  CHECK(y.size() == 2);
  CHECK(y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity linear layer") {
  MlpSpec s{3, {}, 3};
  ParamVector p(s.param_count());
  for (std::size_t i = 0; i < 3; ++i) p[i * 3 + i] = 1.0;  // column-major identity
  const std::vector<double> x{0.5, -2.0, 7.0};
  const Eigen::VectorXd y = forward(s, p, x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y(static_cast<Eigen::Index>(i)) == x[i]);
}

TEST_CASE("forward matches a hand-rolled two-layer relu net") {
  MlpSpec s{2, {3}, 1, Activation::relu};
  RngStream rng(11, "init");
  ParamVector p = init_params(s, rng);
  for (std::size_t i = 6; i < 9; ++i) p[i] = 0.1 * static_cast<double>(i) - 0.7;  // hidden biases
  p[12] = 0.25;
  const double x0 = 0.5, x1 = -0.5;
  double out = p[12];
  for (std::size_t h = 0; h < 3; ++h) {
    // W1 is 3x2 column-major: W1(h, c) = p[c * 3 + h]
    const double z = p[0 * 3 + h] * x0 + p[1 * 3 + h] * x1 + p[6 + h];
    out += p[9 + h] * std::max(0.0, z);
  }
  const Eigen::VectorXd y = forward(s, p, std::vector<double>{x0, x1});
  CHECK(std::abs(y(0) - out) < 1e-12);
}

TEST_CASE("linear 1-1 gradient is (x, 1)") {
  MlpSpec s{1, {}, 1};
  ParamVector p(2);
  p[0] = 0.7;
  p[1] = -0.3;
  const auto g = backward(s, p, std::vector<double>{2.0}, std::vector<double>{1.0});
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == doctest::Approx(1.0));
}

TEST_CASE("dead relu units pass no gradient to their incoming weights") {
  MlpSpec s{2, {2}, 1, Activation::relu};
  ParamVector p(s.param_count());
  p[6] = 1.0;  // output weights
  p[7] = 1.0;
  const auto g = backward(s, p, std::vector<double>{1.0, 2.0}, std::vector<double>{1.0});
  for (std::size_t i = 0; i < 6; ++i) CHECK(g[i] == 0.0);  // first-layer weights and biases
  CHECK(g[8] == 1.0);                                       // output bias
}

TEST_CASE("backward matches central finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CHECK(max_fd_error(MlpSpec{2, {4}, 1, Activation::relu}, seed) < 1e-6);
    CHECK(max_fd_error(MlpSpec{4, {8, 8}, 3, Activation::tanh}, 100 + seed) < 1e-6);
    CHECK(max_fd_error(MlpSpec{2, {4, 4}, 2, Activation::relu}, 200 + seed) < 1e-6);
  }
}

TEST_CASE("batched backward equals the sum of per-sample gradients") {
  MlpSpec s{3, {5}, 2, Activation::tanh};
  RngStream rng(3, "init");
  const ParamVector p = init_params(s, rng);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 4), G = Eigen::MatrixXd::Random(2, 4);
  ForwardCache cache;
  forward_batch(s, p, X, &cache);
  std::vector<double> batch_grad(p.size());
  backward_batch(s, p, cache, G, batch_grad);
  std::vector<double> sum(p.size(), 0.0);
  for (Eigen::Index k = 0; k < 4; ++k) {
    std::vector<double> x(X.col(k).data(), X.col(k).data() + 3), g(G.col(k).data(), G.col(k).data() + 2);
    const auto gk = backward(s, p, x, g);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += gk[i];
  }
  for (std::size_t i = 0; i < sum.size(); ++i) CHECK(std::abs(sum[i] - batch_grad[i]) < 1e-12);
}

TEST_CASE("forward and backward are pure") {
  MlpSpec s{2, {4}, 2};
  RngStream rng(5, "init");
  const ParamVector p = init_params(s, rng);
  const std::vector<double> x{0.1, 0.9}, g{1.0, -1.0};
  CHECK(forward(s, p, x) == forward(s, p, x));
  CHECK(backward(s, p, x, g) == backward(s, p, x, g));
}

TEST_CASE("dimension mismatches are configuration errors") {
  MlpSpec s{2, {3}, 1};
  ParamVector p(s.param_count());
  CHECK_THROWS_AS(forward(s, p, std::vector<double>{1.0}), ConfigError);
  CHECK_THROWS_AS(forward(s, ParamVector(3), std::vector<double>{1.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(backward(s, p, std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 1.0}), ConfigError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  ParamVector p(3, 1.5);
  AdamState st = AdamState::for_params(3, 0.1);
  adam_step(st, p, std::vector<double>(3, 0.0));
  CHECK(st.step_count == 1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == 1.5);
}

TEST_CASE("adam: first step has magnitude lr against the gradient sign") {
  ParamVector p(2, 0.0);
  AdamState st = AdamState::for_params(2, 0.01);
  adam_step(st, p, std::vector<double>{3.0, -0.2});
  CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("adam minimizes a quadratic") {
  ParamVector w(1, 0.0);
  AdamState st = AdamState::for_params(1, 0.1);
  for (int k = 0; k < 100; ++k) adam_step(st, w, std::vector<double>{2.0 * (w[0] - 3.0)});
  CHECK(std::abs(w[0] - 3.0) < 0.5);
}

TEST_CASE("adam rejects non-finite gradients and names the index") {
  ParamVector p(3, 0.0);
  AdamState st = AdamState::for_params(3, 0.1);
  try {
    adam_step(st, p, std::vector<double>{0.0, 0.0, std::nan("")});
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find('2') != std::string::npos);
  }
}

TEST_CASE("soft update") {
  ParamVector target(1, 0.0), online(1, 1.0);
  soft_update(target, online, 0.005);
  CHECK(target[0] == doctest::Approx(0.005));

  ParamVector t2(2, -1.0), o2(2, 4.0);
  soft_update(t2, o2, 1.0);
  CHECK(t2 == o2);

  ParamVector t3(1, 0.0);
  const double tau = 0.1;
  for (int k = 1; k <= 20; ++k) {
    soft_update(t3, online, tau);
    CHECK(std::abs(std::abs(t3[0] - 1.0) - std::pow(1.0 - tau, k)) < 1e-12);
  }
  CHECK_THROWS_AS(soft_update(t3, ParamVector(2), 0.5), ConfigError);
}

TEST_CASE("initialization is seeded and Glorot bounded") {
  MlpSpec s{4, {6}, 2};
  RngStream a(1, "init"), b(1, "init");
  const ParamVector pa = init_params(s, a), pb = init_params(s, b);
  CHECK(pa == pb);
  const double bound = std::sqrt(6.0 / (4 + 6));
  for (std::size_t i = 0; i < 24; ++i) CHECK(std::abs(pa[i]) <= bound);
  for (std::size_t i = 24; i < 30; ++i) CHECK(pa[i] == 0.0);
}
