#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "uavnet/error.hpp"
#include "uavnet/rng.hpp"

namespace uavnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, identity };

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::identity;

  int in() const { return static_cast<int>(weight.cols()); }
  int out() const { return static_cast<int>(weight.rows()); }
};

// Fully connected network. Inputs are column-major batches (in x B).
struct DenseNet {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in(); }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out(); }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  bool operator==(const DenseNet& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& a = layers[i];
      const auto& b = o.layers[i];
      if (a.activation != b.activation || a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
          a.weight != b.weight || a.bias != b.bias)
        return false;
    }
    return true;
  }
};

// Glorot-uniform weights, zero biases.
inline DenseNet init(std::span<const int> dims, std::span<const Activation> activations, std::uint64_t seed) {
  if (dims.size() < 2) throw InputError("init: need at least input and output dims");
  if (activations.size() != dims.size() - 1) throw InputError("init: one activation per layer required");
  for (int d : dims)
    if (d < 1) throw InputError("init: dims must be positive");
  Rng rng(seed);
  DenseNet net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    const int in = dims[l], out = dims[l + 1];
    const double bound = std::sqrt(6.0 / (in + out));
    layer.weight.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
    layer.bias = Vector::Zero(out);
    layer.activation = activations[l];
    net.layers.push_back(std::move(layer));
  }
  return net;
}

// ReLU hidden layers, identity output.
inline DenseNet make_mlp(std::span<const int> dims, std::uint64_t seed) {
  std::vector<Activation> acts(dims.size() - 1, Activation::relu);
  if (!acts.empty()) acts.back() = Activation::identity;
  return init(dims, acts, seed);
}

inline DenseNet make_mlp(std::initializer_list<int> dims, std::uint64_t seed) {
  std::vector<int> d(dims);
  return make_mlp(std::span<const int>(d), seed);
}

struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
};

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;
  Matrix input;

  static Gradients zeros_like(const DenseNet& net) {
    Gradients g;
    for (const auto& l : net.layers) {
      g.weight.push_back(Matrix::Zero(l.out(), l.in()));
      g.bias.push_back(Vector::Zero(l.out()));
    }
    return g;
  }

  Gradients& operator+=(const Gradients& o) {
    if (o.weight.size() != weight.size()) throw InputError("gradients: shape mismatch");
    for (std::size_t i = 0; i < weight.size(); ++i) {
      weight[i] += o.weight[i];
      bias[i] += o.bias[i];
    }
    return *this;
  }

  void scale(double s) {
    for (auto& w : weight) w *= s;
    for (auto& b : bias) b *= s;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& w : weight) s += w.squaredNorm();
    for (const auto& b : bias) s += b.squaredNorm();
    return s;
  }
};

inline Matrix forward(const DenseNet& net, const Matrix& x, ForwardCache* cache = nullptr) {
  if (net.layers.empty()) throw InputError("forward: empty network");
  if (x.rows() != net.input_dim())
    throw InputError("forward: input has " + std::to_string(x.rows()) + " rows, network expects " +
                     std::to_string(net.input_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix a = x;
  for (const auto& layer : net.layers) {
    Matrix z = layer.weight * a;
    z.colwise() += layer.bias;
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre.push_back(z);
    }
    a = layer.activation == Activation::relu ? Matrix(z.cwiseMax(0.0)) : std::move(z);
  }
  return a;
}

inline Vector forward(const DenseNet& net, const Vector& x) { return forward(net, Matrix(x)).col(0); }

// Reverse mode for the scalar sum(upstream .* y); also fills the input gradient.
inline Gradients backward(const DenseNet& net, const ForwardCache& cache, const Matrix& upstream) {
  if (cache.pre.size() != net.layers.size()) throw InputError("backward: cache does not match network");
  if (upstream.rows() != net.output_dim() || upstream.cols() != cache.pre.back().cols())
    throw InputError("backward: upstream shape mismatch");
  Gradients g = Gradients::zeros_like(net);
  Matrix delta = upstream;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const auto& layer = net.layers[i];
    if (layer.activation == Activation::relu) delta = delta.cwiseProduct((cache.pre[i].array() > 0.0).cast<double>().matrix());
    g.weight[i] = delta * cache.inputs[i].transpose();
    g.bias[i] = delta.rowwise().sum();
    delta = layer.weight.transpose() * delta;
  }
  g.input = std::move(delta);
  return g;
}

// Visits parameters in a fixed order: per layer, weight (row-major) then bias.
template <typename Fn>
void for_each_parameter(DenseNet& net, Gradients* grads, Fn&& fn) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& w = net.layers[l].weight;
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) fn(w(r, c), grads ? grads->weight[l](r, c) : 0.0);
    auto& b = net.layers[l].bias;
    for (int r = 0; r < b.size(); ++r) fn(b(r), grads ? grads->bias[l](r) : 0.0);
  }
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a non-differentiable point
  bool passed = false;
};

// Relative error with a floor on the denominator so that exact zeros and
// round-off-level gradients do not dominate.
inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

// Central differences over arbitrary parameters. `pattern` returns a
// signature of every piecewise choice (ReLU gates, argmaxes); a parameter
// whose +-h perturbation changes the signature is skipped.
template <typename Loss, typename Pattern>
GradCheckResult check_gradients(std::span<double* const> params, std::span<const double> analytic, Loss&& loss,
                                Pattern&& pattern, double tol, double step = 1e-5) {
  if (params.size() != analytic.size()) throw InputError("check_gradients: size mismatch");
  GradCheckResult res;
  const auto base = pattern();
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& p = *params[i];
    const double orig = p;
    p = orig + step;
    const double up = loss();
    const bool same_up = pattern() == base;
    p = orig - step;
    const double down = loss();
    const bool same_down = pattern() == base;
    p = orig;
    if (!same_up || !same_down) {
      ++res.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * step);
    res.max_relative_error = std::max(res.max_relative_error, relative_error(analytic[i], numeric));
    ++res.checked;
  }
  res.passed = res.max_relative_error < tol;
  return res;
}

inline std::vector<char> relu_pattern(const ForwardCache& cache, const DenseNet& net) {
  std::vector<char> out;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (net.layers[l].activation != Activation::relu) continue;
    const Matrix& z = cache.pre[l];
    for (Eigen::Index i = 0; i < z.size(); ++i) out.push_back(z.data()[i] > 0.0);
  }
  return out;
}

// Checks backward() for L = sum(upstream .* net(x)) on every parameter and
// every input coordinate. Upstream defaults to ones.
inline GradCheckResult grad_check(DenseNet net, Matrix x, double tol, const Matrix* upstream = nullptr,
                                  const Gradients* override_grads = nullptr) {
  ForwardCache cache;
  const Matrix y = forward(net, x, &cache);
  const Matrix up = upstream ? *upstream : Matrix::Ones(y.rows(), y.cols());
  Gradients g = override_grads ? *override_grads : backward(net, cache, up);
  if (override_grads && g.input.size() == 0) g.input = Matrix::Zero(x.rows(), x.cols());

  std::vector<double*> params;
  std::vector<double> analytic;
  for_each_parameter(net, &g, [&](double& p, double grad) {
    params.push_back(&p);
    analytic.push_back(grad);
  });
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    params.push_back(x.data() + i);
    analytic.push_back(g.input.data()[i]);
  }
  auto loss = [&] { return forward(net, x).cwiseProduct(up).sum(); };
  auto pattern = [&] {
    ForwardCache c;
    forward(net, x, &c);
    return relu_pattern(c, net);
  };
  return check_gradients(params, analytic, loss, pattern, tol);
}

// Adaptive-moment optimizer state for one network.
struct AdamState {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Matrix> m_weight, v_weight;
  std::vector<Vector> m_bias, v_bias;

  static AdamState for_net(const DenseNet& net, double lr) {
    AdamState s;
    s.learning_rate = lr;
    for (const auto& l : net.layers) {
      s.m_weight.push_back(Matrix::Zero(l.out(), l.in()));
      s.v_weight.push_back(Matrix::Zero(l.out(), l.in()));
      s.m_bias.push_back(Vector::Zero(l.out()));
      s.v_bias.push_back(Vector::Zero(l.out()));
    }
    return s;
  }
};

inline void opt_step(DenseNet& net, const Gradients& g, AdamState& s) {
  if (g.weight.size() != net.layers.size() || s.m_weight.size() != net.layers.size())
    throw InputError("opt_step: shape mismatch");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols()) throw InputError("opt_step: shape mismatch");
    m = s.beta1 * m + (1.0 - s.beta1) * grad;
    v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
    param.array() -= s.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    update(net.layers[l].weight, g.weight[l], s.m_weight[l], s.v_weight[l]);
    update(net.layers[l].bias, g.bias[l], s.m_bias[l], s.v_bias[l]);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints. Text format, version 1:
//
//   uavnet-checkpoint 1
//   nets <count>
//   net <name> <layers>
//   layer <in> <out> <relu|identity>
//   weight <out*in hex floats, row-major>
//   bias <out hex floats>
//
// Values are C99 hexadecimal floats so they round-trip exactly.
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::string hex_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::hex);
  return std::string(buf, res.ptr);
}

inline double parse_hex_double(const std::string& tok) {
  std::string_view s = tok;
  bool neg = false;
  if (!s.empty() && s.front() == '-') {
    neg = true;
    s.remove_prefix(1);
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value, std::chars_format::hex);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError("checkpoint", {"bad value '" + tok + "'"});
  return neg ? -value : value;
}

}  // namespace detail

using NamedNets = std::vector<std::pair<std::string, DenseNet>>;

inline void save_checkpoint(std::ostream& out, const NamedNets& nets) {
  out << "uavnet-checkpoint " << kCheckpointVersion << "\n";
  out << "nets " << nets.size() << "\n";
  for (const auto& [name, net] : nets) {
    out << "net " << name << ' ' << net.layers.size() << "\n";
    for (const auto& l : net.layers) {
      out << "layer " << l.in() << ' ' << l.out() << ' ' << (l.activation == Activation::relu ? "relu" : "identity")
          << "\nweight";
      for (int r = 0; r < l.out(); ++r)
        for (int c = 0; c < l.in(); ++c) out << ' ' << detail::hex_double(l.weight(r, c));
      out << "\nbias";
      for (int r = 0; r < l.out(); ++r) out << ' ' << detail::hex_double(l.bias(r));
      out << "\n";
    }
  }
}

inline NamedNets load_checkpoint(std::istream& in) {
  auto fail = [](const std::string& what) { return ParseError("checkpoint", {what}); };
  auto expect = [&](const char* word) {
    std::string tok;
    if (!(in >> tok) || tok != word) throw fail(std::string("expected '") + word + "'");
  };
  expect("uavnet-checkpoint");
  int version = 0;
  if (!(in >> version) || version != kCheckpointVersion)
    throw fail("unsupported checkpoint version " + std::to_string(version));
  expect("nets");
  std::size_t count = 0;
  if (!(in >> count)) throw fail("missing net count");
  NamedNets nets;
  for (std::size_t i = 0; i < count; ++i) {
    expect("net");
    std::string name;
    std::size_t layers = 0;
    if (!(in >> name >> layers)) throw fail("bad net header");
    DenseNet net;
    for (std::size_t l = 0; l < layers; ++l) {
      expect("layer");
      int d_in = 0, d_out = 0;
      std::string act;
      if (!(in >> d_in >> d_out >> act) || d_in < 1 || d_out < 1) throw fail("bad layer header in " + name);
      if (act != "relu" && act != "identity") throw fail("unknown activation '" + act + "'");
      DenseLayer layer;
      layer.activation = act == "relu" ? Activation::relu : Activation::identity;
      layer.weight.resize(d_out, d_in);
      layer.bias.resize(d_out);
      std::string tok;
      expect("weight");
      for (int r = 0; r < d_out; ++r)
        for (int c = 0; c < d_in; ++c) {
          if (!(in >> tok)) throw fail("truncated weights in " + name);
          layer.weight(r, c) = detail::parse_hex_double(tok);
        }
      expect("bias");
      for (int r = 0; r < d_out; ++r) {
        if (!(in >> tok)) throw fail("truncated biases in " + name);
        layer.bias(r) = detail::parse_hex_double(tok);
      }
      if (!net.layers.empty() && net.layers.back().out() != d_in) throw fail("layer dims do not chain in " + name);
      net.layers.push_back(std::move(layer));
    }
    nets.emplace_back(std::move(name), std::move(net));
  }
  return nets;
}

}  // namespace uavnet
