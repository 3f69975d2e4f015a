#include "semmec/channel.hpp"

#include <cmath>
#include <string>

namespace semmec {

void ChannelState::validate() const {
  if (gains.size() == 0) throw std::invalid_argument("channel: empty gain matrix");
  if ((gains.array() < 0.0).any()) throw std::invalid_argument("channel: negative gain");
  if (static_cast<Eigen::Index>(distances_m.size()) != gains.cols())
    throw std::invalid_argument("channel: one distance per UE required");
  for (double d : distances_m)
    if (!(d > 0.0)) throw std::invalid_argument("channel: distance must be positive");
  if (!(noise_w > 0.0)) throw std::invalid_argument("channel: noise power must be positive");
  if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("channel: bandwidth must be positive");
}

ChannelAssignment::ChannelAssignment(int k_channels, int n_ues)
    : x_(Eigen::MatrixXi::Zero(k_channels, n_ues)) {
  if (k_channels < 1 || n_ues < 1)
    throw std::invalid_argument("ChannelAssignment: empty shape");
}

void ChannelAssignment::assign(int channel, int ue) {
  if (channel < 0 || channel >= k_channels() || ue < 0 || ue >= n_ues())
    throw std::out_of_range("ChannelAssignment::assign: index out of range");
  if (x_.row(channel).sum() != 0 || x_.col(ue).sum() != 0)
    throw std::logic_error("ChannelAssignment::assign: channel or UE already taken");
  x_(channel, ue) = 1;
}

void ChannelAssignment::release(int ue) { x_.col(ue).setZero(); }

int ChannelAssignment::channel_of(int ue) const {
  for (int k = 0; k < k_channels(); ++k)
    if (x_(k, ue) != 0) return k;
  return -1;
}

std::vector<double> ChannelAssignment::column(int ue) const {
  std::vector<double> col(static_cast<std::size_t>(k_channels()));
  for (int k = 0; k < k_channels(); ++k) col[static_cast<std::size_t>(k)] = x_(k, ue);
  return col;
}

bool ChannelAssignment::valid() const {
  if ((x_.array() < 0).any() || (x_.array() > 1).any()) return false;
  for (int k = 0; k < k_channels(); ++k)
    if (x_.row(k).sum() > 1) return false;
  for (int n = 0; n < n_ues(); ++n)
    if (x_.col(n).sum() > 1) return false;
  return true;
}

Eigen::MatrixXd sample_fading(Rng& rng, int k_count, int n_count) {
  if (k_count < 1 || n_count < 1)
    throw std::invalid_argument("sample_fading: need at least one channel and one UE");
  Eigen::MatrixXd h(k_count, n_count);
  // fill column by column, channel-major inside a UE
  for (int n = 0; n < n_count; ++n)
    for (int k = 0; k < k_count; ++k) h(k, n) = rng.exponential();
  return h;
}

double channel_gain(double h_sq, double d, double alpha) {
  if (!(d > 0.0))
    throw std::invalid_argument("channel_gain: distance must be positive, got " +
                                std::to_string(d));
  if (h_sq < 0.0) throw std::invalid_argument("channel_gain: negative fading power");
  if (alpha < 0.0) throw std::invalid_argument("channel_gain: negative path-loss exponent");
  return h_sq * std::pow(d, -alpha);
}

double offload_rate(std::span<const double> assignment_column,
                    std::span<const double> gains_column, double p,
                    double bandwidth_hz, double noise) {
  if (assignment_column.size() != gains_column.size())
    throw std::invalid_argument("offload_rate: assignment and gain columns differ in length");
  if (p < 0.0) throw std::invalid_argument("offload_rate: negative transmit power");
  int held = 0;
  double rate = 0.0;
  for (std::size_t k = 0; k < assignment_column.size(); ++k) {
    if (assignment_column[k] != 0.0) ++held;
    rate += bandwidth_hz *
            std::log2(1.0 + assignment_column[k] * gains_column[k] * p / noise);
  }
  if (held > 1) throw std::invalid_argument("offload_rate: UE holds more than one channel");
  return rate;
}

double transmission_latency(bool offload, double bits, double mu, double p_exp,
                            double rate) {
  if (!offload) return 0.0;
  if (!(rate > 0.0)) throw UnreachableServer("transmission_latency: zero uplink rate");
  return bits * std::pow(mu, p_exp) / rate;
}

}  // namespace semmec
