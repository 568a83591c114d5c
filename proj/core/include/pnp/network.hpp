#pragma once

#include <string>
#include <vector>

#include "pnp/numerics.hpp"
#include "pnp/random.hpp"

namespace pnp {

struct Linear {
  Matrix weight;  // in × out, so y = x·W + b
  Matrix bias;    // 1 × out

  friend bool operator==(const Linear&, const Linear&) = default;
};

enum class LayerInit {
  kXavier,        // N(0, 2/(in+out))
  kNearIdentity,  // identity on the leading min(in, out) block plus small noise
};

/// Affine layers with tanh between them (none after the last layer).
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> inputs;       // input to each layer
    std::vector<Matrix> activations;  // tanh outputs of hidden layers
  };

  Mlp() = default;
  Mlp(const std::vector<std::size_t>& widths, LayerInit init, Rng& rng);
  explicit Mlp(std::vector<Linear> layers);

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const;

  /// Adjoint of the input. Parameter adjoints of layers at index
  /// >= first_trainable go to `tape` under "<prefix>.<i>.weight|bias".
  Matrix backward(const Cache& cache, const Matrix& dy, GradientTape* tape,
                  const std::string& prefix, std::size_t first_trainable = 0) const;

  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }
  std::size_t input_width() const;
  std::size_t output_width() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<Linear> layers_;
};

std::string weight_id(const std::string& prefix, std::size_t layer);
std::string bias_id(const std::string& prefix, std::size_t layer);

}  // namespace pnp
