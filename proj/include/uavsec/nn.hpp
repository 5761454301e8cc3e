#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace uavsec::nn {

/// Column-major batches: one sample per column.
using Matrix = Eigen::MatrixXd;

enum class Activation { Relu, Tanh, Linear };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(int rows, int cols, int fan_in, int fan_out, std::mt19937_64& rng);

/// Dense feed-forward net: ReLU on hidden layers, chosen activation on the
/// output layer. Parameters are ordered W0, b0, W1, b1, ...
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> inputs;  // input of every layer
    std::vector<Matrix> pre;     // pre-activation of every layer
    Matrix output;
  };

  Mlp() = default;
  Mlp(std::vector<int> dims, Activation output, std::mt19937_64& rng);

  const std::vector<int>& dims() const { return dims_; }
  Activation output_activation() const { return output_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t layer_count() const { return weights_.size(); }

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const;

  /// Accumulates nothing: writes d(loss)/d(param) into `grads` (same order as
  /// parameters()) and returns d(loss)/d(input).
  Matrix backward(const Cache& cache, const Matrix& grad_out, std::span<Matrix> grads) const;

  std::size_t parameter_count() const { return 2 * weights_.size(); }
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;

 private:
  std::vector<int> dims_;
  Activation output_ = Activation::Linear;
  std::vector<Matrix> weights_;
  std::vector<Matrix> biases_;
};

/// Widens the last three scalars of an observation block (distance, speed,
/// energy) through trainable 1->width affine maps with ReLU. The other
/// block entries pass through unchanged, expanded features follow them.
class ExpansionLayer {
 public:
  static constexpr int kScalars = 3;

  ExpansionLayer() = default;
  ExpansionLayer(int block_length, int width, std::mt19937_64& rng);

  int input_dim() const { return block_length_; }
  int output_dim() const { return block_length_ - kScalars + kScalars * width_; }
  int width() const { return width_; }

  /// `pre` receives the (kScalars*width) x batch pre-activations.
  Matrix forward(const Matrix& x, Matrix* pre) const;
  Matrix backward(const Matrix& x, const Matrix& pre, const Matrix& grad_out, Matrix& grad_w,
                  Matrix& grad_b) const;

  Matrix& weight() { return weight_; }
  Matrix& bias() { return bias_; }
  const Matrix& weight() const { return weight_; }
  const Matrix& bias() const { return bias_; }

 private:
  int block_length_ = 0;
  int width_ = 0;
  Matrix weight_;  // kScalars x width
  Matrix bias_;    // kScalars x width
};

/// Architecture of a Network: expanded observation blocks laid out back to
/// back, an unexpanded tail (e.g. joint actions), then the Mlp.
struct NetworkSpec {
  std::vector<int> block_lengths;
  int tail_dim = 0;
  int expansion_width = 2;  // 0 disables expansion
  std::vector<int> hidden;
  int output_dim = 1;
  Activation output = Activation::Linear;

  int input_dim() const;
  int expanded_dim() const;
  bool operator==(const NetworkSpec&) const = default;
};

class Network {
 public:
  struct Cache {
    Matrix input;
    std::vector<Matrix> block_pre;
    Mlp::Cache mlp;
    std::uint64_t generation = 0;
  };

  Network() = default;
  Network(NetworkSpec spec, std::mt19937_64& rng);

  const NetworkSpec& spec() const { return spec_; }
  int input_dim() const { return spec_.input_dim(); }
  int output_dim() const { return spec_.output_dim; }

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const;

  /// Gradients in parameters() order; returns d(loss)/d(input). Throws
  /// std::logic_error if the parameters changed since `cache` was filled.
  Matrix backward(const Cache& cache, const Matrix& grad_out, std::vector<Matrix>& grads) const;

  /// Mutable access invalidates outstanding caches.
  std::vector<Matrix*> mutable_parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<Matrix> zero_gradients() const;
  std::size_t scalar_count() const;

 private:
  NetworkSpec spec_;
  std::vector<ExpansionLayer> expansions_;
  Mlp mlp_;
  std::uint64_t generation_ = 1;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam with moments shaped like the parameters.
class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<const Matrix*>& params, AdamConfig cfg);

  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads);
  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

/// target <- tau * online + (1 - tau) * target. Architectures must match.
void soft_update(Network& target, const Network& online, double tau);

/// Text weight container with shape headers and a format version.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace uavsec::nn
