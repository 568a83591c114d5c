#include "pnp/network.hpp"

#include <cmath>

#include "pnp/errors.hpp"

namespace pnp {

namespace {

constexpr double kIdentityNoise = 0.01;

Linear make_layer(std::size_t in, std::size_t out, LayerInit init, Rng& rng) {
  Linear l{Matrix(in, out), Matrix(1, out)};
  std::normal_distribution<double> normal(0.0, 1.0);
  if (init == LayerInit::kXavier) {
    const double sd = std::sqrt(2.0 / static_cast<double>(in + out));
    for (double& w : l.weight.values()) w = sd * normal(rng);
  } else {
    for (double& w : l.weight.values()) w = kIdentityNoise * normal(rng);
    for (std::size_t i = 0; i < std::min(in, out); ++i) l.weight(i, i) += 1.0;
  }
  return l;
}

}  // namespace

std::string weight_id(const std::string& prefix, std::size_t layer) {
  return prefix + "." + std::to_string(layer) + ".weight";
}

std::string bias_id(const std::string& prefix, std::size_t layer) {
  return prefix + "." + std::to_string(layer) + ".bias";
}

Mlp::Mlp(const std::vector<std::size_t>& widths, LayerInit init, Rng& rng) {
  if (widths.size() < 2) throw ParameterError("Mlp: need at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] == 0 || widths[i + 1] == 0) throw ParameterError("Mlp: zero layer width");
    layers_.push_back(make_layer(widths[i], widths[i + 1], init, rng));
  }
}

Mlp::Mlp(std::vector<Linear> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.rows() != 1 || l.bias.cols() != l.weight.cols())
      throw DimensionError("Mlp: bias shape does not match layer " + std::to_string(i));
    if (i > 0 && layers_[i - 1].weight.cols() != l.weight.rows())
      throw DimensionError("Mlp: layer " + std::to_string(i) + " input width mismatch");
  }
}

std::size_t Mlp::input_width() const { return layers_.empty() ? 0 : layers_.front().weight.rows(); }
std::size_t Mlp::output_width() const { return layers_.empty() ? 0 : layers_.back().weight.cols(); }

Matrix Mlp::forward(const Matrix& x, Cache* cache) const {
  if (cache) {
    cache->inputs.clear();
    cache->activations.clear();
  }
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (cache) cache->inputs.push_back(h);
    Matrix y = matmul(h, layers_[i].weight);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto row = y.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += layers_[i].bias(0, c);
    }
    if (i + 1 < layers_.size()) {
      for (double& v : y.values()) v = std::tanh(v);
      if (cache) cache->activations.push_back(y);
    }
    h = std::move(y);
  }
  return h;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& dy, GradientTape* tape,
                     const std::string& prefix, std::size_t first_trainable) const {
  if (cache.inputs.size() != layers_.size())
    throw ContractViolation("Mlp::backward: cache does not match this network");
  Matrix grad = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i + 1 < layers_.size()) {
      // through tanh: d/dx tanh = 1 − tanh²
      const Matrix& a = cache.activations[i];
      for (std::size_t k = 0; k < grad.size(); ++k)
        grad.values()[k] *= 1.0 - a.values()[k] * a.values()[k];
    }
    const Matrix& in = cache.inputs[i];
    if (tape && i >= first_trainable) {
      tape->accumulate(weight_id(prefix, i), matmul_tn(in, grad));
      Matrix db(1, grad.cols());
      for (std::size_t r = 0; r < grad.rows(); ++r)
        for (std::size_t c = 0; c < grad.cols(); ++c) db(0, c) += grad(r, c);
      tape->accumulate(bias_id(prefix, i), db);
    }
    grad = matmul_nt(grad, layers_[i].weight);
  }
  return grad;
}

}  // namespace pnp
