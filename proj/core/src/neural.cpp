#include "ucha/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ucha::nn {

std::vector<Block> MlpGradients::blocks() {
  std::vector<Block> out;
  for (std::size_t l = 0; l < weight.size(); ++l) {
    out.push_back({weight[l].data(), static_cast<std::size_t>(weight[l].size())});
    out.push_back({bias[l].data(), static_cast<std::size_t>(bias[l].size())});
  }
  return out;
}

void MlpGradients::set_zero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

Mlp::Mlp(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp needs at least input and output dims");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] == 0 || dims[l + 1] == 0) throw std::invalid_argument("Mlp dims must be positive");
    Layer layer;
    layer.weight = Matrix::Zero(static_cast<Eigen::Index>(dims[l + 1]), static_cast<Eigen::Index>(dims[l]));
    layer.bias = Vector::Zero(static_cast<Eigen::Index>(dims[l + 1]));
    layer.activation = (l + 2 == dims.size()) ? Activation::kIdentity : Activation::kTanh;
    layers_.push_back(std::move(layer));
  }
}

namespace {

Matrix orthogonal_matrix(Eigen::Index rows, Eigen::Index cols, double gain, rng::RandomStream& stream) {
  const bool tall = rows >= cols;
  const Eigen::Index r = tall ? rows : cols;
  const Eigen::Index c = tall ? cols : rows;
  Matrix a(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) a(i, j) = rng::sample_std_normal(stream);
  }
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(r, c);
  // Sign fix so the distribution is uniform over orthogonal matrices.
  const Matrix& packed = qr.matrixQR();
  for (Eigen::Index j = 0; j < c; ++j) {
    if (packed(j, j) < 0.0) q.col(j) *= -1.0;
  }
  q *= gain;
  return tall ? q : Matrix(q.transpose());
}

}  // namespace

Mlp Mlp::orthogonal(const std::vector<std::size_t>& dims, double output_gain, rng::RandomStream& stream) {
  Mlp net(dims);
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    auto& layer = net.layers_[l];
    const double gain = (l + 1 == net.layers_.size()) ? output_gain : std::numbers::sqrt2;
    layer.weight = orthogonal_matrix(layer.weight.rows(), layer.weight.cols(), gain, stream);
  }
  return net;
}

std::size_t Mlp::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> d{input_dim()};
  for (const auto& l : layers_) d.push_back(static_cast<std::size_t>(l.weight.rows()));
  return d;
}

std::vector<Block> Mlp::blocks() {
  std::vector<Block> out;
  for (auto& l : layers_) {
    out.push_back({l.weight.data(), static_cast<std::size_t>(l.weight.size())});
    out.push_back({l.bias.data(), static_cast<std::size_t>(l.bias.size())});
  }
  return out;
}

Matrix Mlp::forward(const Matrix& input, ForwardCache* cache) const {
  if (static_cast<std::size_t>(input.rows()) != input_dim()) {
    throw std::invalid_argument("Mlp::forward: input has " + std::to_string(input.rows()) +
                                " rows, expected " + std::to_string(input_dim()));
  }
  if (cache != nullptr) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Matrix x = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    Matrix z(layer.weight.rows(), x.cols());
    z.noalias() = layer.weight * x;
    z.colwise() += layer.bias;
    if (layer.activation == Activation::kTanh) z = z.array().tanh().matrix();
    x = std::move(z);
    if (cache != nullptr) {
      // backward() only reads an activation through its tanh derivative, so
      // identity outputs (the wide policy head) are not copied.
      if (layer.activation == Activation::kTanh) {
        cache->activations.push_back(x);
      } else {
        cache->activations.emplace_back();
      }
    }
  }
  return x;
}

Vector Mlp::forward(const Vector& input) const {
  if (static_cast<std::size_t>(input.size()) != input_dim()) {
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  }
  Vector x = input;
  for (const auto& layer : layers_) {
    Vector z = layer.weight * x + layer.bias;
    if (layer.activation == Activation::kTanh) z = z.array().tanh().matrix();
    x = std::move(z);
  }
  return x;
}

MlpGradients Mlp::zero_gradients() const {
  MlpGradients g;
  for (const auto& l : layers_) {
    g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector::Zero(l.bias.size()));
  }
  return g;
}

MlpGradients Mlp::backward(const ForwardCache& cache, const Matrix& output_grad, Matrix* input_grad) const {
  if (cache.activations.size() != layers_.size() + 1) {
    throw std::invalid_argument("Mlp::backward: cache does not match network depth");
  }
  MlpGradients g = zero_gradients();
  Matrix delta;
  const Matrix* cur = &output_grad;  // avoids copying the output gradient
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto& layer = layers_[i];
    if (layer.activation == Activation::kTanh) {
      const auto& a = cache.activations[i + 1];
      delta = (cur->array() * (1.0 - a.array().square())).matrix();
      cur = &delta;
    }
    const Matrix& x = cache.activations[i];
    g.weight[i].noalias() = (*cur) * x.transpose();
    g.bias[i] = cur->rowwise().sum();
    if (i > 0 || input_grad != nullptr) {
      Matrix prev(layer.weight.cols(), cur->cols());
      prev.noalias() = layer.weight.transpose() * (*cur);
      if (i == 0) {
        *input_grad = std::move(prev);
      } else {
        delta = std::move(prev);
        cur = &delta;
      }
    }
  }
  return g;
}

double Adam::step(std::span<const Block> params, std::span<const Block> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("Adam::step: block count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size, 0.0);
      v_.emplace_back(p.size, 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Adam::step: block layout changed");

  double sq = 0.0;
  for (std::size_t b = 0; b < grads.size(); ++b) {
    if (grads[b].size != params[b].size || grads[b].size != m_[b].size()) {
      throw std::invalid_argument("Adam::step: gradient shape mismatch");
    }
    Eigen::Map<const Eigen::ArrayXd> g(grads[b].data, static_cast<Eigen::Index>(grads[b].size));
    sq += g.square().sum();
  }
  const double norm = std::sqrt(sq);
  double scale = 1.0;
  if (config_.max_grad_norm > 0.0 && norm > config_.max_grad_norm) scale = config_.max_grad_norm / norm;

  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto n = static_cast<Eigen::Index>(params[b].size);
    Eigen::Map<Eigen::ArrayXd> p(params[b].data, n);
    Eigen::Map<Eigen::ArrayXd> g(grads[b].data, n);
    Eigen::Map<Eigen::ArrayXd> m(m_[b].data(), n);
    Eigen::Map<Eigen::ArrayXd> v(v_[b].data(), n);
    if (scale != 1.0) g *= scale;
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.square();
    p -= config_.lr * (m / c1) / ((v / c2).sqrt() + config_.eps);
  }
  return norm;
}

// --- distributions ----------------------------------------------------------

double log_sum_exp(const Eigen::Ref<const Vector>& logits) {
  const double mx = logits.maxCoeff();
  return mx + std::log((logits.array() - mx).exp().sum());
}

Vector softmax(const Eigen::Ref<const Vector>& logits) {
  Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Vector log_softmax(const Eigen::Ref<const Vector>& logits) {
  return (logits.array() - log_sum_exp(logits)).matrix();
}

CategoricalSample categorical_sample_logprob(const Eigen::Ref<const Vector>& logits,
                                             rng::RandomStream& stream) {
  const double lse = log_sum_exp(logits);
  const double u = rng::sample_unit(stream);
  double cum = 0.0;
  const auto n = static_cast<std::uint64_t>(logits.size());
  std::uint64_t chosen = n - 1;
  for (std::uint64_t i = 0; i < n; ++i) {
    cum += std::exp(logits(static_cast<Eigen::Index>(i)) - lse);
    if (u < cum) {
      chosen = i;
      break;
    }
  }
  // Rounding can leave cum slightly below 1; fall back to the last index with
  // non-negligible mass.
  if (!(u < cum)) {
    for (std::uint64_t i = n; i-- > 0;) {
      if (logits(static_cast<Eigen::Index>(i)) - lse > -700.0) {
        chosen = i;
        break;
      }
    }
  }
  return {chosen, logits(static_cast<Eigen::Index>(chosen)) - lse};
}

double categorical_entropy(const Eigen::Ref<const Vector>& logits) {
  const Vector logp = log_softmax(logits);
  return -(logp.array().exp() * logp.array()).sum();
}

GaussianSample gaussian_sample_logprob(const Vector& mean, const Vector& log_std, rng::RandomStream& stream) {
  if (mean.size() != log_std.size()) throw std::invalid_argument("gaussian: mean/log_std size mismatch");
  GaussianSample s;
  s.raw.resize(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    s.raw(i) = mean(i) + std::exp(log_std(i)) * rng::sample_std_normal(stream);
  }
  s.log_prob = gaussian_log_prob(mean, log_std, s.raw);
  return s;
}

double gaussian_log_prob(const Eigen::Ref<const Vector>& mean, const Vector& log_std,
                         const Eigen::Ref<const Vector>& x) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double z = (x(i) - mean(i)) * std::exp(-log_std(i));
    lp += -0.5 * z * z - log_std(i) - half_log_2pi;
  }
  return lp;
}

}  // namespace ucha::nn
