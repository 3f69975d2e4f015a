#include <doctest.h>

#include <cmath>
#include <vector>

#include "semmec/channel.hpp"

using namespace semmec;

TEST_CASE("fading draws repeat for a fixed seed") {
  Rng a(42), b(42);
  CHECK(sample_fading(a, 2, 2) == sample_fading(b, 2, 2));
}

TEST_CASE("fading power is unit-mean exponential") {
  Rng rng(7);
  const Eigen::MatrixXd h = sample_fading(rng, 1000, 1000);
  CHECK(h.mean() == doctest::Approx(1.0).epsilon(0.01));
  const double below = static_cast<double>((h.array() <= 1.0).count()) / static_cast<double>(h.size());
  CHECK(std::abs(below - (1.0 - std::exp(-1.0))) < 0.005);
  CHECK((h.array() >= 0.0).all());
}

TEST_CASE("fading rejects empty shapes") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_fading(rng, 0, 2), std::invalid_argument);
}

TEST_CASE("channel gain is power-law path loss") {
  CHECK(channel_gain(1.0, 1.0, 3.0) == 1.0);
  CHECK(channel_gain(2.0, 10.0, 3.0) == doctest::Approx(2e-3).epsilon(1e-14));
  CHECK(channel_gain(0.0, 100.0, 3.0) == 0.0);
  CHECK_THROWS_AS(channel_gain(1.0, 0.0, 3.0), std::invalid_argument);
  CHECK_THROWS_AS(channel_gain(1.0, -5.0, 3.0), std::invalid_argument);
}

TEST_CASE("offload rate") {
  const std::vector<double> none{0, 0}, first{1, 0};
  const std::vector<double> gains{3.0, 5.0};
  CHECK(offload_rate(none, gains, 1.0, 10e6, 1.0) == 0.0);
  CHECK(offload_rate(first, gains, 1.0, 10e6, 1.0) == doctest::Approx(20e6).epsilon(1e-14));
  const std::vector<double> g2{2.0 / 90.0};
  const std::vector<double> x2{1};
  CHECK(offload_rate(x2, g2, 90.0, 10e6, 2.0) == doctest::Approx(10e6).epsilon(1e-12));
  const std::vector<double> both{1, 1};
  CHECK_THROWS(offload_rate(both, gains, 1.0, 10e6, 1.0));
}

TEST_CASE("offload rate is monotone in power and gain") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double g = rng.exponential() * 1e-3, p = rng.uniform(0.01, 0.09);
    const std::vector<double> x{1}, gv{g}, gv2{g * 1.5};
    const double r = offload_rate(x, gv, p, 10e6, 2e-3);
    CHECK(offload_rate(x, gv, p * 1.1, 10e6, 2e-3) >= r);
    CHECK(offload_rate(x, gv2, p, 10e6, 2e-3) >= r);
  }
}

TEST_CASE("transmission latency") {
  CHECK(transmission_latency(false, 1e6, 0.3, 1.0, 0.0) == 0.0);
  CHECK(transmission_latency(true, 1e6, 1.0, 1.0, 20e6) == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(transmission_latency(true, 1e6, 0.5, 1.0, 20e6) == doctest::Approx(0.025).epsilon(1e-14));
  CHECK_THROWS_AS(transmission_latency(true, 1e6, 1.0, 1.0, 0.0), UnreachableServer);
  // non-increasing in R, non-decreasing in mu
  CHECK(transmission_latency(true, 1e6, 0.5, 1.0, 30e6) <= transmission_latency(true, 1e6, 0.5, 1.0, 20e6));
  CHECK(transmission_latency(true, 1e6, 0.6, 2.0, 20e6) >= transmission_latency(true, 1e6, 0.5, 2.0, 20e6));
}

TEST_CASE("assignment keeps one UE per channel and one channel per UE") {
  ChannelAssignment x(3, 2);
  x.assign(1, 0);
  CHECK(x.channel_of(0) == 1);
  CHECK(x.channel_of(1) == -1);
  CHECK_THROWS_AS(x.assign(1, 1), std::logic_error);
  CHECK_THROWS_AS(x.assign(2, 0), std::logic_error);
  x.assign(2, 1);
  CHECK(x.valid());
  x.release(0);
  CHECK(x.channel_of(0) == -1);
  CHECK(x.column(1) == std::vector<double>{0, 0, 1});
}

TEST_CASE("channel state validation") {
  ChannelState s;
  s.gains = Eigen::MatrixXd::Ones(2, 2);
  s.distances_m = {50, 100};
  CHECK_NOTHROW(s.validate());
  s.distances_m = {0, 100};
  CHECK_THROWS(s.validate());
  s.distances_m = {50, 100};
  s.gains(0, 0) = -1;
  CHECK_THROWS(s.validate());
}
