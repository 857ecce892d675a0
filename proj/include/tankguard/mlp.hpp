#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "tankguard/common.hpp"
#include "tankguard/rng.hpp"

namespace tankguard {

// Small fully-connected networks with hand-rolled reverse-mode gradients.
// Parameters live in one flat double vector (per-layer row-major weight
// blocks followed by biases) so the optimizer, serialization, and the
// finite-difference checks all see the same contiguous storage.

enum class Activation { kTanh, kRelu };
enum class Head { kLinear, kSquashedGaussian };

struct MlpSpec {
  std::vector<int> sizes;  // input, hidden..., output
  Activation act = Activation::kRelu;
  Head head = Head::kLinear;
};

inline void validate(const MlpSpec& s) {
  require(s.sizes.size() >= 2, "mlp: need at least input and output sizes");
  for (int n : s.sizes) require(n > 0, "mlp: layer sizes must be positive");
  if (s.head == Head::kSquashedGaussian)
    require(s.sizes.back() % 2 == 0, "mlp: gaussian head needs even output (mean, log-std)");
}

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;

using Matrix = Eigen::MatrixXd;  // batch x features
using RowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

class Mlp {
 public:
  Mlp() = default;

  static Mlp init(const MlpSpec& spec, Rng& rng) {
    validate(spec);
    Mlp m;
    m.spec_ = spec;
    m.params_.assign(param_count(spec), 0.0);
    // He-style fan-in scaling; biases start at zero.
    size_t off = 0;
    for (size_t l = 0; l + 1 < spec.sizes.size(); ++l) {
      const int in = spec.sizes[l], out = spec.sizes[l + 1];
      const double scale = std::sqrt(2.0 / static_cast<double>(in));
      for (int i = 0; i < in * out; ++i) m.params_[off + i] = scale * rng.normal();
      off += static_cast<size_t>(in) * out + out;
    }
    return m;
  }

  static size_t param_count(const MlpSpec& spec) {
    size_t n = 0;
    for (size_t l = 0; l + 1 < spec.sizes.size(); ++l)
      n += static_cast<size_t>(spec.sizes[l]) * spec.sizes[l + 1] + spec.sizes[l + 1];
    return n;
  }

  const MlpSpec& spec() const { return spec_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  int in_dim() const { return spec_.sizes.front(); }
  int out_dim() const { return spec_.sizes.back(); }

  struct Cache {
    Matrix input;
    std::vector<Matrix> pre;   // pre-activation per layer
    std::vector<Matrix> post;  // post-activation per hidden layer
  };

  // Forward pass. For the squashed-gaussian head the right half of the output
  // (log-std) is clamped to [-20, 2].
  Matrix forward(const Matrix& x, Cache* cache = nullptr) const {
    require(x.cols() == in_dim(), "mlp: input width mismatch");
    if (cache) {
      cache->input = x;
      cache->pre.clear();
      cache->post.clear();
    }
    Matrix h = x;
    size_t off = 0;
    const int layers = static_cast<int>(spec_.sizes.size()) - 1;
    for (int l = 0; l < layers; ++l) {
      const int in = spec_.sizes[l], out = spec_.sizes[l + 1];
      ConstRowMajorMap w(params_.data() + off, out, in);
      Eigen::Map<const Eigen::VectorXd> b(params_.data() + off + static_cast<size_t>(in) * out,
                                          out);
      Matrix z = h * w.transpose();
      z.rowwise() += b.transpose();
      if (cache) cache->pre.push_back(z);
      if (l + 1 < layers) {
        h = (spec_.act == Activation::kTanh) ? Matrix(z.array().tanh())
                                             : Matrix(z.array().max(0.0));
        if (cache) cache->post.push_back(h);
      } else {
        h = z;
      }
      off += static_cast<size_t>(in) * out + out;
    }
    if (spec_.head == Head::kSquashedGaussian) {
      const int a = out_dim() / 2;
      h.rightCols(a) = h.rightCols(a).array().min(kLogStdMax).max(kLogStdMin);
    }
    return h;
  }

  struct Gradients {
    std::vector<double> params;
    Matrix input;  // dL/dx, needed when a policy feeds a critic
  };

  // Reverse pass for upstream gradient dy (same shape as forward output).
  // The log-std clamp backpropagates zero outside its active range.
  Gradients backward(const Cache& cache, Matrix dy) const {
    const int layers = static_cast<int>(spec_.sizes.size()) - 1;
    require(static_cast<int>(cache.pre.size()) == layers, "mlp: stale cache");
    Gradients g;
    g.params.assign(params_.size(), 0.0);

    if (spec_.head == Head::kSquashedGaussian) {
      const int a = out_dim() / 2;
      const Matrix& z = cache.pre.back();
      for (Eigen::Index r = 0; r < dy.rows(); ++r)
        for (int c = 0; c < a; ++c) {
          const double v = z(r, out_dim() / 2 + c);
          if (v < kLogStdMin || v > kLogStdMax) dy(r, a + c) = 0.0;
        }
    }

    // Per-layer parameter offsets.
    std::vector<size_t> offsets(layers);
    size_t off = 0;
    for (int l = 0; l < layers; ++l) {
      offsets[l] = off;
      off += static_cast<size_t>(spec_.sizes[l]) * spec_.sizes[l + 1] + spec_.sizes[l + 1];
    }

    Matrix delta = std::move(dy);
    for (int l = layers - 1; l >= 0; --l) {
      const int in = spec_.sizes[l], out = spec_.sizes[l + 1];
      if (l < layers - 1) {
        // Through the activation of layer l (its post is cache.post[l]).
        if (spec_.act == Activation::kTanh)
          delta = delta.array() * (1.0 - cache.post[l].array().square());
        else
          delta = delta.array() * (cache.pre[l].array() > 0.0).cast<double>();
      }
      const Matrix& x = (l == 0) ? cache.input : cache.post[l - 1];
      RowMajorMap dw(g.params.data() + offsets[l], out, in);
      dw = delta.transpose() * x;
      Eigen::Map<Eigen::VectorXd> db(g.params.data() + offsets[l] + static_cast<size_t>(in) * out,
                                     out);
      db = delta.colwise().sum().transpose();
      ConstRowMajorMap w(params_.data() + offsets[l], out, in);
      if (l > 0)
        delta = (delta * w).eval();
      else
        g.input = delta * w;
    }
    return g;
  }

 private:
  MlpSpec spec_;
  std::vector<double> params_;
};

// --- squashed-gaussian utilities -------------------------------------------
// Actions are a = tanh(u), u ~ N(mean, std^2). The log-density includes the
// tanh change-of-variables term, computed with the numerically stable
// identity log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)).

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

inline double log1m_tanh2(double u) {
  return 2.0 * (0.6931471805599453094 - u - softplus(-2.0 * u));
}

struct SquashedSample {
  Eigen::VectorXd a;        // squashed action in (-1, 1)
  Eigen::VectorXd u;        // pre-squash gaussian draw
  Eigen::VectorXd eps;      // the standard-normal noise used
  double log_prob = 0.0;
};

inline double squashed_log_prob(const Eigen::VectorXd& u, const Eigen::VectorXd& mean,
                                const Eigen::VectorXd& log_std) {
  constexpr double kLog2Pi = 1.8378770664093454836;
  double lp = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double s = std::exp(log_std[i]);
    const double z = (u[i] - mean[i]) / s;
    lp += -0.5 * z * z - log_std[i] - 0.5 * kLog2Pi - log1m_tanh2(u[i]);
  }
  return lp;
}

inline SquashedSample sample_squashed(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                                      Rng& rng) {
  SquashedSample s;
  const Eigen::Index n = mean.size();
  s.eps.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.eps[i] = rng.normal();
  s.u = mean.array() + log_std.array().exp() * s.eps.array();
  s.a = s.u.array().tanh();
  s.log_prob = squashed_log_prob(s.u, mean, log_std);
  return s;
}

inline Eigen::VectorXd squash_mean(const Eigen::VectorXd& mean) {
  return mean.array().tanh();
}

}  // namespace tankguard
