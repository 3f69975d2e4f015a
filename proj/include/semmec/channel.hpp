#pragma once

// Uplink wireless model: Rayleigh block fading, power-law path loss, OFDMA
// sub-channel rates and semantic-scaled transmission latency.

#include <Eigen/Core>
#include <span>
#include <stdexcept>
#include <vector>

#include "semmec/rng.hpp"

namespace semmec {

// Thrown when a UE offloads over a link with zero rate.
class UnreachableServer : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Gains are K x N (rows: sub-channels, columns: UEs).
struct ChannelState {
  Eigen::MatrixXd gains;
  std::vector<double> distances_m;
  double path_loss_exp = 3.0;
  double noise_w = 2e-3;
  double bandwidth_hz = 10e6;

  int k_channels() const { return static_cast<int>(gains.rows()); }
  int n_ues() const { return static_cast<int>(gains.cols()); }

  void validate() const;
};

// x_{k,n} indicators. Each UE holds at most one channel and each channel is
// held by at most one UE.
class ChannelAssignment {
 public:
  ChannelAssignment(int k_channels, int n_ues);

  void assign(int channel, int ue);
  void release(int ue);

  bool at(int channel, int ue) const { return x_(channel, ue) != 0; }
  // Channel held by `ue`, or -1.
  int channel_of(int ue) const;
  std::vector<double> column(int ue) const;

  bool valid() const;

  int k_channels() const { return static_cast<int>(x_.rows()); }
  int n_ues() const { return static_cast<int>(x_.cols()); }

 private:
  Eigen::MatrixXi x_;
};

// |h|^2 for h ~ CN(0,1): exponential with unit mean.
Eigen::MatrixXd sample_fading(Rng& rng, int k_count, int n_count);

// |g|^2 = |h|^2 * d^-alpha.
double channel_gain(double h_sq, double d, double alpha);

// OFDMA uplink rate for one UE. `p` and `noise` must share units.
double offload_rate(std::span<const double> assignment_column,
                    std::span<const double> gains_column, double p,
                    double bandwidth_hz, double noise);

// rho * s * mu^p_exp / R.
double transmission_latency(bool offload, double bits, double mu, double p_exp,
                            double rate);

}  // namespace semmec
