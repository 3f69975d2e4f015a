#include <doctest.h>

#include <cmath>

#include "semmec/nn.hpp"

using namespace semmec;

namespace {

// Plain loops over the documented parameter layout.
Eigen::VectorXd naive_forward(const std::vector<int>& sizes, std::span<const double> p,
                              const Eigen::VectorXd& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    std::vector<double> z(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      double s = p[off + static_cast<std::size_t>(in * out + o)];
      for (int i = 0; i < in; ++i) s += p[off + static_cast<std::size_t>(i * out + o)] * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = l + 2 < sizes.size() ? std::tanh(s) : s;
    }
    off += static_cast<std::size_t>((in + 1) * out);
    a = std::move(z);
  }
  return Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST_CASE("parameter count") {
  const Mlp m({2, 8, 8, 3});
  CHECK(m.param_count() == 3 * 8 + 9 * 8 + 9 * 3);
  CHECK_THROWS(Mlp({3}));
}

TEST_CASE("zero weights give zero output") {
  const Mlp m({3, 5, 2});
  CHECK(m.forward(Eigen::VectorXd(Eigen::VectorXd::Ones(3))).isZero());
}

TEST_CASE("identity single layer") {
  Mlp m({3, 3});
  std::vector<double> p(12, 0.0);
  p[0] = p[4] = p[8] = 1.0;
  m.set_params(p);
  const Eigen::VectorXd x = Eigen::Vector3d(0.3, -2.0, 5.0);
  CHECK(m.forward(x) == x);
}

TEST_CASE("forward matches an independent implementation") {
  Mlp m({4, 16, 9, 3});
  Rng rng(1);
  m.init(rng, std::sqrt(2.0), 1.0);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd x(4);
    for (auto& v : x) v = rng.normal();
    worst = std::max(worst, (m.forward(x) - naive_forward(m.shape().sizes(), m.params(), x)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
  CHECK_THROWS(m.forward(Eigen::VectorXd(Eigen::VectorXd::Ones(3))));
}

TEST_CASE("backward matches central finite differences") {
  Mlp m({2, 8, 8, 3});
  Rng rng(2);
  m.init(rng, std::sqrt(2.0), 1.0);
  Eigen::MatrixXd x(2, 5), g(3, 5);
  for (auto& v : x.reshaped()) v = rng.normal();
  for (auto& v : g.reshaped()) v = rng.normal();
  MlpCache cache;
  m.forward(x, &cache);
  const auto grad = m.backward(cache, g);
  const std::vector<double> p0(m.params().begin(), m.params().end());
  const double h = 1e-5;
  double worst = 0;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    auto p = p0;
    p[i] += h;
    m.set_params(p);
    const double up = (m.forward(x).array() * g.array()).sum();
    p[i] -= 2 * h;
    m.set_params(p);
    const double down = (m.forward(x).array() * g.array()).sum();
    worst = std::max(worst, rel_err((up - down) / (2 * h), grad[i]));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("backward is linear in the output gradient") {
  Mlp m({3, 6, 2});
  Rng rng(3);
  m.init(rng, 1.0, 1.0);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 4);
  Eigen::MatrixXd g = Eigen::MatrixXd::Random(2, 4);
  MlpCache cache;
  m.forward(x, &cache);
  const auto zero = m.backward(cache, Eigen::MatrixXd::Zero(2, 4));
  for (double v : zero) CHECK(v == 0.0);
  const auto g1 = m.backward(cache, g);
  const auto g3 = m.backward(cache, 3.0 * g);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g3[i] == doctest::Approx(3.0 * g1[i]).epsilon(1e-12));
}

TEST_CASE("a stale cache is rejected") {
  Mlp m({2, 3, 1});
  Rng rng(4);
  m.init(rng, 1.0, 1.0);
  MlpCache cache;
  m.forward(Eigen::MatrixXd::Ones(2, 1), &cache);
  m.mutable_params()[0] += 0.1;
  CHECK_THROWS_AS(m.backward(cache, Eigen::MatrixXd::Ones(1, 1)), std::logic_error);
}

TEST_CASE("orthogonal init is seeded") {
  Mlp a({5, 7, 3}), b({5, 7, 3});
  Rng r1(9), r2(9);
  a.init(r1, 1.0, 1.0);
  b.init(r2, 1.0, 1.0);
  CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
}

TEST_CASE("adam") {
  std::vector<double> p{1.0, -2.0, 3.0};
  AdamState s = AdamState::for_params(3, 1e-4);
  const std::vector<double> zero(3, 0.0);
  adam_step(s, p, zero);
  CHECK(p == std::vector<double>{1.0, -2.0, 3.0});

  std::vector<double> q{1.0, -2.0, 3.0};
  AdamState t = AdamState::for_params(3, 1e-4);
  const std::vector<double> g{0.5, -3.0, 1e-3};
  adam_step(t, q, g);
  CHECK(q[0] - 1.0 == doctest::Approx(-1e-4).epsilon(1e-6));
  CHECK(q[1] + 2.0 == doctest::Approx(1e-4).epsilon(1e-6));
  CHECK(q[2] - 3.0 == doctest::Approx(-1e-4).epsilon(1e-4));

  std::vector<double> a{1, 2}, b{1, 2};
  AdamState sa = AdamState::for_params(2, 1e-3), sb = sa;
  const std::vector<double> gg{0.3, -0.7};
  adam_step(sa, a, gg);
  adam_step(sb, b, gg);
  CHECK(a == b);
  CHECK(sa.m == sb.m);
  CHECK_THROWS(adam_step(sa, a, std::vector<double>{1.0}));
}

TEST_CASE("json round trip is bit-exact") {
  Mlp m({3, 5, 2});
  Rng rng(12);
  m.init(rng, 1.3, 0.01);
  const Mlp back = mlp_from_json(nlohmann::json::parse(mlp_to_json(m).dump()));
  CHECK(back.shape().sizes() == m.shape().sizes());
  CHECK(std::equal(m.params().begin(), m.params().end(), back.params().begin()));

  AdamState s = AdamState::for_params(m.param_count(), 1e-4);
  std::vector<double> g(m.param_count());
  for (auto& v : g) v = rng.normal();
  adam_step(s, m.mutable_params(), g);
  const AdamState sb = adam_from_json(nlohmann::json::parse(adam_to_json(s).dump()));
  CHECK(sb.m == s.m);
  CHECK(sb.v == s.v);
  CHECK(sb.step == s.step);
}
