#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ucha/rng.hpp"

namespace ucha::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { kIdentity = 0, kTanh = 1 };

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::kIdentity;
};

/// Mutable view of one contiguous parameter (or gradient) block.
struct Block {
  double* data;
  std::size_t size;
};

/// Gradients shaped like an Mlp's layers.
struct MlpGradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  std::vector<Block> blocks();
  void set_zero();
};

/// Activations saved by a batched forward pass; column b is sample b.
struct ForwardCache {
  std::vector<Matrix> activations;  // [0] = input; identity layers leave an empty slot
};

/// Feed-forward network: tanh hidden layers, identity output layer.
class Mlp {
 public:
  Mlp() = default;
  /// dims = {input, hidden..., output}. Parameters start at zero.
  explicit Mlp(const std::vector<std::size_t>& dims);

  /// Orthogonal initialization with gain sqrt(2) on hidden layers and
  /// `output_gain` on the last layer; zero biases.
  static Mlp orthogonal(const std::vector<std::size_t>& dims, double output_gain,
                        rng::RandomStream& stream);

  [[nodiscard]] std::size_t input_dim() const { return layers_.front().weight.cols(); }
  [[nodiscard]] std::size_t output_dim() const { return layers_.back().weight.rows(); }
  [[nodiscard]] std::size_t num_params() const;
  [[nodiscard]] std::vector<std::size_t> dims() const;

  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::vector<Block> blocks();

  /// Batched forward; input is in_dim x batch. Throws std::invalid_argument
  /// on a dimension mismatch.
  Matrix forward(const Matrix& input, ForwardCache* cache = nullptr) const;
  Vector forward(const Vector& input) const;

  /// Reverse pass for d(loss)/d(output) given the matching cache. Writes the
  /// input gradient to `input_grad` when non-null.
  MlpGradients backward(const ForwardCache& cache, const Matrix& output_grad,
                        Matrix* input_grad = nullptr) const;

  [[nodiscard]] MlpGradients zero_gradients() const;

 private:
  std::vector<Layer> layers_;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.5;  ///< <= 0 disables clipping
};

/// Bias-corrected Adam over an ordered list of parameter blocks. The block
/// layout is fixed by the first call.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig config) : config_(config) {}

  /// Clips the gradients in place to the global norm limit, then updates.
  /// Returns the pre-clip global gradient norm.
  double step(std::span<const Block> params, std::span<const Block> grads);

  [[nodiscard]] std::int64_t steps() const { return t_; }
  [[nodiscard]] const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  [[nodiscard]] const std::vector<std::vector<double>>& first_moment() const { return m_; }
  [[nodiscard]] const std::vector<std::vector<double>>& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// --- distributions ----------------------------------------------------------

double log_sum_exp(const Eigen::Ref<const Vector>& logits);
Vector softmax(const Eigen::Ref<const Vector>& logits);
Vector log_softmax(const Eigen::Ref<const Vector>& logits);

struct CategoricalSample {
  std::uint64_t index;
  double log_prob;
};

/// Inverse-CDF draw from softmax(logits).
CategoricalSample categorical_sample_logprob(const Eigen::Ref<const Vector>& logits,
                                             rng::RandomStream& stream);
double categorical_entropy(const Eigen::Ref<const Vector>& logits);

struct GaussianSample {
  Vector raw;
  double log_prob;
};

/// x = mean + exp(log_std) * eps with a diagonal covariance.
GaussianSample gaussian_sample_logprob(const Vector& mean, const Vector& log_std,
                                       rng::RandomStream& stream);
double gaussian_log_prob(const Eigen::Ref<const Vector>& mean, const Vector& log_std,
                         const Eigen::Ref<const Vector>& x);

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

}  // namespace ucha::nn
