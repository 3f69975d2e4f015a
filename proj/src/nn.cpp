#include "semmec/nn.hpp"

#include <Eigen/QR>
#include <atomic>
#include <cmath>
#include <stdexcept>

namespace semmec {

std::uint64_t next_generation() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

MlpShape::MlpShape(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("MlpShape: need input and output sizes");
  for (int s : sizes_)
    if (s < 1) throw std::invalid_argument("MlpShape: layer sizes must be positive");
  offsets_.push_back(0);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto in = static_cast<std::size_t>(sizes_[l]);
    const auto out = static_cast<std::size_t>(sizes_[l + 1]);
    offsets_.push_back(offsets_.back() + (in + 1) * out);
  }
}

Eigen::MatrixXd MlpShape::forward(std::span<const double> params, const Eigen::MatrixXd& input,
                                  MlpCache* cache, std::uint64_t generation) const {
  if (params.size() != param_count())
    throw std::invalid_argument("Mlp::forward: parameter vector has wrong length");
  if (input.rows() != input_size())
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  const std::size_t layers = sizes_.size() - 1;
  if (cache) {
    cache->generation = generation;
    cache->input = input;
    cache->hidden.clear();
  }
  Eigen::MatrixXd a = input;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    Eigen::Map<const Eigen::MatrixXd> w(params.data() + offsets_[l], out, in);
    Eigen::Map<const Eigen::VectorXd> b(params.data() + offsets_[l] + static_cast<std::size_t>(in * out), out);
    Eigen::MatrixXd z = w * a;
    z.colwise() += b;
    if (l + 1 < layers) {
      a = z.array().tanh().matrix();
      if (cache) cache->hidden.push_back(a);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

void MlpShape::backward(std::span<const double> params, const MlpCache& cache,
                        const Eigen::MatrixXd& out_grad, std::span<double> grad,
                        std::uint64_t generation) const {
  if (cache.generation != generation)
    throw std::logic_error("Mlp::backward: cache was produced by different parameters");
  if (grad.size() != param_count() || params.size() != param_count())
    throw std::invalid_argument("Mlp::backward: parameter/gradient length mismatch");
  const std::size_t layers = sizes_.size() - 1;
  if (cache.hidden.size() != layers - 1 || out_grad.rows() != output_size() ||
      out_grad.cols() != cache.input.cols())
    throw std::invalid_argument("Mlp::backward: cache/gradient shape mismatch");

  Eigen::MatrixXd delta = out_grad;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const Eigen::MatrixXd& a_prev = l == 0 ? cache.input : cache.hidden[l - 1];
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + offsets_[l], out, in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets_[l] + static_cast<std::size_t>(in * out), out);
    gw.noalias() += delta * a_prev.transpose();
    gb += delta.rowwise().sum();
    if (l == 0) break;
    Eigen::Map<const Eigen::MatrixXd> w(params.data() + offsets_[l], out, in);
    Eigen::MatrixXd back = w.transpose() * delta;
    delta = (back.array() * (1.0 - a_prev.array().square())).matrix();
  }
}

void MlpShape::init_orthogonal(std::span<double> params, Rng& rng, double hidden_gain,
                               double output_gain) const {
  if (params.size() != param_count())
    throw std::invalid_argument("Mlp::init: parameter vector has wrong length");
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const int dim = std::max(in, out);
    Eigen::MatrixXd g(dim, dim);
    for (int c = 0; c < dim; ++c)
      for (int r = 0; r < dim; ++r) g(r, c) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
    // sign fix makes the draw uniform over the orthogonal group
    const Eigen::MatrixXd rmat = qr.matrixQR();
    for (int c = 0; c < dim; ++c)
      if (rmat(c, c) < 0) q.col(c) *= -1.0;
    const double gain = l + 1 < layers ? hidden_gain : output_gain;
    Eigen::Map<Eigen::MatrixXd> w(params.data() + offsets_[l], out, in);
    w = gain * q.topLeftCorner(out, in);
    Eigen::Map<Eigen::VectorXd>(params.data() + offsets_[l] + static_cast<std::size_t>(in * out), out)
        .setZero();
  }
}

Mlp::Mlp(std::vector<int> sizes)
    : shape_(std::move(sizes)), params_(shape_.param_count(), 0.0), generation_(next_generation()) {}

std::span<double> Mlp::mutable_params() {
  generation_ = next_generation();
  return params_;
}

void Mlp::set_params(std::span<const double> values) {
  if (values.size() != params_.size())
    throw std::invalid_argument("Mlp::set_params: wrong parameter count");
  std::copy(values.begin(), values.end(), params_.begin());
  generation_ = next_generation();
}

void Mlp::init(Rng& rng, double hidden_gain, double output_gain) {
  shape_.init_orthogonal(mutable_params(), rng, hidden_gain, output_gain);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, MlpCache* cache) const {
  return shape_.forward(params_, input, cache, generation_);
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  return shape_.forward(params_, Eigen::MatrixXd(input), nullptr, generation_).col(0);
}

std::vector<double> Mlp::backward(const MlpCache& cache, const Eigen::MatrixXd& out_grad) const {
  std::vector<double> grad(params_.size(), 0.0);
  shape_.backward(params_, cache, out_grad, grad, generation_);
  return grad;
}

AdamState AdamState::for_params(std::size_t n, double lr) {
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.lr = lr;
  return s;
}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || s.m.size() != params.size() || s.v.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
    const double m_hat = s.m[i] / bc1;
    const double v_hat = s.v[i] / bc2;
    params[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps_hat);
  }
}

nlohmann::json mlp_to_json(const Mlp& mlp) {
  return {{"layers", mlp.shape().sizes()},
          {"params", std::vector<double>(mlp.params().begin(), mlp.params().end())}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp mlp(j.at("layers").get<std::vector<int>>());
  const auto params = j.at("params").get<std::vector<double>>();
  mlp.set_params(params);
  return mlp;
}

nlohmann::json adam_to_json(const AdamState& s) {
  return {{"m", s.m},         {"v", s.v},         {"step", s.step},
          {"lr", s.lr},       {"beta1", s.beta1}, {"beta2", s.beta2},
          {"eps_hat", s.eps_hat}};
}

AdamState adam_from_json(const nlohmann::json& j) {
  AdamState s;
  s.m = j.at("m").get<std::vector<double>>();
  s.v = j.at("v").get<std::vector<double>>();
  s.step = j.at("step").get<std::int64_t>();
  s.lr = j.at("lr").get<double>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.eps_hat = j.at("eps_hat").get<double>();
  if (s.m.size() != s.v.size()) throw std::invalid_argument("adam state: moment length mismatch");
  return s;
}

}  // namespace semmec
