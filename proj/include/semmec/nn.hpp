#pragma once

// Fixed-topology MLPs (tanh hidden layers, linear output) with explicit
// forward/backward passes over column batches, plus Adam.

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "semmec/rng.hpp"

namespace semmec {

// Activations kept by forward() for the matching backward().
struct MlpCache {
  std::uint64_t generation = 0;
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> hidden;  // post-tanh activations
};

// Layer layout inside the flat parameter vector: W (out x in, column-major)
// followed by b (out), layer after layer.
class MlpShape {
 public:
  explicit MlpShape(std::vector<int> sizes);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t param_count() const { return offsets_.back(); }

  // Columns of `input` are samples.
  Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& input,
                          MlpCache* cache = nullptr, std::uint64_t generation = 0) const;

  // Accumulates d(sum(output .* out_grad))/d(params) into `grad`.
  void backward(std::span<const double> params, const MlpCache& cache,
                const Eigen::MatrixXd& out_grad, std::span<double> grad,
                std::uint64_t generation = 0) const;

  // Scaled orthogonal weights, zero biases.
  void init_orthogonal(std::span<double> params, Rng& rng, double hidden_gain,
                       double output_gain) const;

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;  // start of each layer, plus the total
};

class Mlp {
 public:
  explicit Mlp(std::vector<int> sizes);

  const MlpShape& shape() const { return shape_; }
  std::size_t param_count() const { return params_.size(); }
  std::span<const double> params() const { return params_; }
  // Invalidates outstanding caches.
  std::span<double> mutable_params();
  void set_params(std::span<const double> values);
  std::uint64_t generation() const { return generation_; }

  void init(Rng& rng, double hidden_gain, double output_gain);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, MlpCache* cache = nullptr) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  std::vector<double> backward(const MlpCache& cache, const Eigen::MatrixXd& out_grad) const;

 private:
  MlpShape shape_;
  std::vector<double> params_;
  std::uint64_t generation_;
};

// Unique token for a parameter revision.
std::uint64_t next_generation();

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;

  static AdamState for_params(std::size_t n, double lr);
};

// Bias-corrected Adam, descending along `grads`.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

nlohmann::json mlp_to_json(const Mlp& mlp);
Mlp mlp_from_json(const nlohmann::json& j);
nlohmann::json adam_to_json(const AdamState& s);
AdamState adam_from_json(const nlohmann::json& j);

}  // namespace semmec
