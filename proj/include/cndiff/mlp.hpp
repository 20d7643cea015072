#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cndiff/rng.hpp"

namespace cndiff {

/// Number of scalar time features fed alongside the data vector: the
/// normalized step t/T plus 8 sinusoidal embeddings of it.
constexpr int kTimeFeatureCount = 9;

/// Fills `dst` (length kTimeFeatureCount) with the features of t/T.
template <typename Scalar, typename Block>
void fill_time_features(Block dst, int t, int total) {
  const double tau = static_cast<double>(t) / static_cast<double>(total);
  dst(0) = static_cast<Scalar>(tau);
  int k = 1;
  for (int f = 0; f < 4; ++f) {
    const double w = M_PI * static_cast<double>(1 << f) * tau;
    dst(k++) = static_cast<Scalar>(std::sin(w));
    dst(k++) = static_cast<Scalar>(std::cos(w));
  }
}

enum class Activation { Silu, Tanh };

inline Activation parse_activation(const std::string& name) {
  if (name == "silu") return Activation::Silu;
  if (name == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

inline std::string activation_name(Activation a) {
  return a == Activation::Silu ? "silu" : "tanh";
}

/// Plain fully connected network with a smooth hidden nonlinearity and a
/// linear output layer. Batched columns; hand-rolled backward pass and
/// AdamW update.
template <typename Scalar>
class Mlp {
public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Mlp() = default;

  Mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
      std::uint64_t seed, Activation activation = Activation::Silu)
      : activation_(activation) {
    if (input_dim < 1 || output_dim < 1) {
      throw std::invalid_argument("mlp dimensions must be positive");
    }
    std::vector<int> widths;
    widths.push_back(input_dim);
    for (int h : hidden) {
      if (h < 1) throw std::invalid_argument("hidden width must be positive");
      widths.push_back(h);
    }
    widths.push_back(output_dim);

    Rng rng(seed);
    weights_.reserve(widths.size() - 1);
    biases_.reserve(widths.size() - 1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const int fan_in = widths[l];
      const int fan_out = widths[l + 1];
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      Mat w(fan_out, fan_in);
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
          w(i, j) = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * bound);
        }
      }
      weights_.push_back(std::move(w));
      biases_.push_back(Vec::Zero(fan_out));
    }
  }

  int input_dim() const { return static_cast<int>(weights_.front().cols()); }
  int output_dim() const { return static_cast<int>(weights_.back().rows()); }
  std::size_t layer_count() const { return weights_.size(); }
  Activation activation() const { return activation_; }
  const std::vector<Mat>& weights() const { return weights_; }
  const std::vector<Vec>& biases() const { return biases_; }
  std::vector<Mat>& mutable_weights() { return weights_; }
  std::vector<Vec>& mutable_biases() { return biases_; }

  /// Pre-activations and activations per layer; a[0] is the input.
  struct Cache {
    std::vector<Mat> z;  // z[l] for layer l
    std::vector<Mat> a;  // a[0] = input, a[l+1] = activation of z[l]
  };

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    if (x.rows() != weights_.front().cols()) {
      throw std::invalid_argument("mlp input dimension mismatch");
    }
    if (cache) {
      cache->z.clear();
      cache->a.clear();
      cache->a.push_back(x);
    }
    Mat a = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Mat z = (weights_[l] * a).colwise() + biases_[l];
      if (l + 1 < weights_.size()) {
        a = activate(z);
      } else {
        a = z;
      }
      if (cache) {
        cache->z.push_back(std::move(z));
        cache->a.push_back(a);
      }
    }
    return a;
  }

  struct Gradients {
    std::vector<Mat> w;
    std::vector<Vec> b;
  };

  /// Backpropagates dL/d(output) through the cached forward pass.
  Gradients backward(const Cache& cache, const Mat& dout) const {
    Gradients g;
    g.w.resize(weights_.size());
    g.b.resize(weights_.size());
    Mat delta = dout;
    for (std::size_t l = weights_.size(); l-- > 0;) {
      g.w[l] = delta * cache.a[l].transpose();
      g.b[l] = delta.rowwise().sum();
      if (l > 0) {
        delta = ((weights_[l].transpose() * delta).array() *
                 activate_grad(cache.z[l - 1], cache.a[l]).array())
                    .matrix();
      }
    }
    return g;
  }

  struct AdamWState {
    std::vector<Mat> mw, vw;
    std::vector<Vec> mb, vb;
    long step = 0;
  };

  AdamWState make_adamw_state() const {
    AdamWState s;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      s.mw.push_back(Mat::Zero(weights_[l].rows(), weights_[l].cols()));
      s.vw.push_back(Mat::Zero(weights_[l].rows(), weights_[l].cols()));
      s.mb.push_back(Vec::Zero(biases_[l].size()));
      s.vb.push_back(Vec::Zero(biases_[l].size()));
    }
    return s;
  }

  /// Decoupled weight decay, beta = (0.9, 0.999), eps = 1e-8. Weight decay
  /// applies to weights only.
  void adamw_step(const Gradients& g, AdamWState& state, double lr,
                  double weight_decay) {
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    state.step += 1;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      state.mw[l] = Scalar(kBeta1) * state.mw[l] + Scalar(1 - kBeta1) * g.w[l];
      state.vw[l] = (Scalar(kBeta2) * state.vw[l].array() +
                     Scalar(1 - kBeta2) * g.w[l].array().square())
                        .matrix();
      state.mb[l] = Scalar(kBeta1) * state.mb[l] + Scalar(1 - kBeta1) * g.b[l];
      state.vb[l] = (Scalar(kBeta2) * state.vb[l].array() +
                     Scalar(1 - kBeta2) * g.b[l].array().square())
                        .matrix();
      weights_[l] -=
          (Scalar(lr) *
           ((state.mw[l].array() / Scalar(bc1)) /
            ((state.vw[l].array() / Scalar(bc2)).sqrt() + Scalar(kEps))))
              .matrix() +
          Scalar(lr * weight_decay) * weights_[l];
      biases_[l] -=
          (Scalar(lr) *
           ((state.mb[l].array() / Scalar(bc1)) /
            ((state.vb[l].array() / Scalar(bc2)).sqrt() + Scalar(kEps))))
              .matrix();
    }
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      n += static_cast<std::size_t>(weights_[l].size()) +
           static_cast<std::size_t>(biases_[l].size());
    }
    return n;
  }

  Eigen::VectorXd params_flat() const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(param_count()));
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (Eigen::Index i = 0; i < weights_[l].size(); ++i) {
        p(k++) = static_cast<double>(weights_[l].data()[i]);
      }
      for (Eigen::Index i = 0; i < biases_[l].size(); ++i) {
        p(k++) = static_cast<double>(biases_[l].data()[i]);
      }
    }
    return p;
  }

  void set_params_flat(const Eigen::VectorXd& p) {
    if (p.size() != static_cast<Eigen::Index>(param_count())) {
      throw std::invalid_argument("parameter vector length mismatch");
    }
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (Eigen::Index i = 0; i < weights_[l].size(); ++i) {
        weights_[l].data()[i] = static_cast<Scalar>(p(k++));
      }
      for (Eigen::Index i = 0; i < biases_[l].size(); ++i) {
        biases_[l].data()[i] = static_cast<Scalar>(p(k++));
      }
    }
  }

  Eigen::VectorXd grads_flat(const Gradients& g) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(param_count()));
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (Eigen::Index i = 0; i < g.w[l].size(); ++i) {
        v(k++) = static_cast<double>(g.w[l].data()[i]);
      }
      for (Eigen::Index i = 0; i < g.b[l].size(); ++i) {
        v(k++) = static_cast<double>(g.b[l].data()[i]);
      }
    }
    return v;
  }

private:
  Mat activate(const Mat& z) const {
    if (activation_ == Activation::Tanh) {
      return z.array().tanh().matrix();
    }
    // silu(z) = z * sigmoid(z)
    return (z.array() * (Scalar(1) / (Scalar(1) + (-z.array()).exp()))).matrix();
  }

  // Derivative in terms of the pre-activation z (and the activation a where
  // it is cheaper).
  Mat activate_grad(const Mat& z, const Mat& a) const {
    if (activation_ == Activation::Tanh) {
      return (Scalar(1) - a.array().square()).matrix();
    }
    // d silu / dz = sig(z) * (1 + z * (1 - sig(z))), with sig(z) = a / z
    // unstable near 0, so recompute the sigmoid directly.
    const auto sig = (Scalar(1) / (Scalar(1) + (-z.array()).exp()));
    return (sig * (Scalar(1) + z.array() * (Scalar(1) - sig))).matrix();
  }

  std::vector<Mat> weights_;
  std::vector<Vec> biases_;
  Activation activation_ = Activation::Silu;
};

}  // namespace cndiff
