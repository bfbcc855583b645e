#pragma once

// Fixed-architecture multilayer perceptron: sigmoid hidden layers, identity or
// exponential output, scalar result.
//
// Besides the value, a forward pass can carry first derivatives along every input
// and second derivatives along every spatial input (forward-mode tangents through
// the layer stack). The backward pass is the exact adjoint of that tangent
// computation, so losses built from values, time derivatives, gradients and
// Laplacians get exact parameter gradients.
//
// Input layout: the first `time_inputs` coordinates are time, the remaining ones
// are space. Batches are stored column-wise (one sample per column).

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfg/common.hpp"

namespace mfg::nn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

enum class OutputActivation { identity, exponential };

struct Architecture {
  int input_dim = 2;
  int time_inputs = 1;
  std::vector<int> hidden = {100, 100};
  OutputActivation output = OutputActivation::identity;

  int spatial_dim() const { return input_dim - time_inputs; }
  int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
  int layer_inputs(int l) const { return l == 0 ? input_dim : hidden[l - 1]; }
  int layer_outputs(int l) const { return l == num_layers() - 1 ? 1 : hidden[l]; }

  void validate() const {
    if (input_dim < 1) throw std::invalid_argument("mlp: input_dim must be >= 1");
    if (time_inputs < 0 || time_inputs > 1 || time_inputs > input_dim)
      throw std::invalid_argument("mlp: time_inputs must be 0 or 1");
    for (int w : hidden)
      if (w < 1) throw std::invalid_argument("mlp: zero-width hidden layer");
  }

  bool operator==(const Architecture&) const = default;
};

inline const char* to_string(OutputActivation a) {
  return a == OutputActivation::identity ? "identity" : "exponential";
}

inline OutputActivation output_from_string(const std::string& s) {
  if (s == "identity") return OutputActivation::identity;
  if (s == "exponential") return OutputActivation::exponential;
  throw std::invalid_argument("unknown output activation '" + s + "'");
}

/// Network parameters live in one flat vector: per layer, W (column-major, out x in) then b.
class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(Architecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    std::size_t off = 0;
    for (int l = 0; l < arch_.num_layers(); ++l) {
      offsets_.push_back(off);
      off += static_cast<std::size_t>(arch_.layer_outputs(l)) * (arch_.layer_inputs(l) + 1);
    }
    params_ = VectorXd::Zero(static_cast<Index>(off));
  }

  const Architecture& arch() const { return arch_; }
  Index num_params() const { return params_.size(); }
  int num_layers() const { return arch_.num_layers(); }

  VectorXd& params() { return params_; }
  const VectorXd& params() const { return params_; }

  Eigen::Map<const MatrixXd> weights(int l) const {
    return {params_.data() + offsets_[l], arch_.layer_outputs(l), arch_.layer_inputs(l)};
  }
  Eigen::Map<MatrixXd> weights(int l) {
    return {params_.data() + offsets_[l], arch_.layer_outputs(l), arch_.layer_inputs(l)};
  }
  Eigen::Map<const VectorXd> bias(int l) const {
    return {params_.data() + bias_offset(l), arch_.layer_outputs(l)};
  }
  Eigen::Map<VectorXd> bias(int l) {
    return {params_.data() + bias_offset(l), arch_.layer_outputs(l)};
  }

  std::size_t weight_offset(int l) const { return offsets_[l]; }
  std::size_t bias_offset(int l) const {
    return offsets_[l] +
           static_cast<std::size_t>(arch_.layer_outputs(l)) * arch_.layer_inputs(l);
  }

 private:
  Architecture arch_;
  VectorXd params_;
  std::vector<std::size_t> offsets_;
};

/// Learnable scalar (the ergodic constant).
struct ScalarParam {
  double value = 0.0;
};

/// Xavier/Glorot uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)), zero biases.
inline Mlp xavier_init(const Architecture& arch, Rng& rng) {
  Mlp net(arch);
  for (int l = 0; l < net.num_layers(); ++l) {
    const double a = std::sqrt(6.0 / (arch.layer_inputs(l) + arch.layer_outputs(l)));
    auto W = net.weights(l);
    for (Index j = 0; j < W.cols(); ++j)
      for (Index i = 0; i < W.rows(); ++i) W(i, j) = a * (2.0 * uniform01(rng) - 1.0);
  }
  return net;
}

enum class JetOrder { value = 0, first = 1, second = 2 };

/// Network output and its input derivatives over a batch.
struct Jets {
  JetOrder order = JetOrder::value;
  RowVectorXd value;  // 1 x N
  MatrixXd d1;        // input_dim x N, row k = d/d input_k
  MatrixXd d2;        // spatial_dim x N, row j = d^2/d x_j^2

  Index size() const { return value.size(); }

  static Jets zeros(JetOrder order, int input_dim, int spatial_dim, Index n) {
    Jets j;
    j.order = order;
    j.value = RowVectorXd::Zero(n);
    if (order >= JetOrder::first) j.d1 = MatrixXd::Zero(input_dim, n);
    if (order == JetOrder::second) j.d2 = MatrixXd::Zero(spatial_dim, n);
    return j;
  }
};

/// Intermediate tensors of one forward pass, consumed by backward().
struct ForwardCache {
  JetOrder order = JetOrder::value;
  MatrixXd input;
  std::vector<MatrixXd> z;                 // pre-activations, per layer
  std::vector<MatrixXd> a;                 // activations (sigmoid, or output value)
  std::vector<std::vector<MatrixXd>> dz;   // [layer][input direction]
  std::vector<std::vector<MatrixXd>> da;
  std::vector<std::vector<MatrixXd>> ddz;  // [layer][spatial direction]
  std::vector<std::vector<MatrixXd>> dda;
};

namespace detail {

inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

/// Forward pass over `inputs` (input_dim x N).
inline Jets forward(const Mlp& net, const MatrixXd& inputs, JetOrder order,
                    ForwardCache* cache = nullptr) {
  const Architecture& arch = net.arch();
  if (inputs.rows() != arch.input_dim)
    throw std::invalid_argument("mlp forward: input dimension mismatch (expected " +
                                std::to_string(arch.input_dim) + ", got " +
                                std::to_string(inputs.rows()) + ")");
  const Index n = inputs.cols();
  const int L = net.num_layers();
  const int nd = order >= JetOrder::first ? arch.input_dim : 0;
  const int ns = order == JetOrder::second ? arch.spatial_dim() : 0;
  const int t0 = arch.time_inputs;

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.order = order;
  c.input = inputs;
  c.z.assign(L, {});
  c.a.assign(L, {});
  c.dz.assign(L, std::vector<MatrixXd>(nd));
  c.da.assign(L, std::vector<MatrixXd>(nd));
  c.ddz.assign(L, std::vector<MatrixXd>(ns));
  c.dda.assign(L, std::vector<MatrixXd>(ns));

  for (int l = 0; l < L; ++l) {
    const auto W = net.weights(l);
    const auto b = net.bias(l);
    const int width = arch.layer_outputs(l);
    if (l == 0) {
      c.z[0].noalias() = W * inputs;
      for (int k = 0; k < nd; ++k) c.dz[0][k] = W.col(k).replicate(1, n);
      for (int j = 0; j < ns; ++j) c.ddz[0][j] = MatrixXd::Zero(width, n);
    } else {
      c.z[l].noalias() = W * c.a[l - 1];
      for (int k = 0; k < nd; ++k) c.dz[l][k].noalias() = W * c.da[l - 1][k];
      for (int j = 0; j < ns; ++j) c.ddz[l][j].noalias() = W * c.dda[l - 1][j];
    }
    c.z[l].colwise() += b;

    const bool output = l == L - 1;
    if (output && arch.output == OutputActivation::identity) {
      c.a[l] = c.z[l];
      for (int k = 0; k < nd; ++k) c.da[l][k] = c.dz[l][k];
      for (int j = 0; j < ns; ++j) c.dda[l][j] = c.ddz[l][j];
      continue;
    }
    // g' and g'' of the activation at z.
    MatrixXd g1, g2;
    if (output) {
      c.a[l] = c.z[l].array().exp().matrix();
      g1 = c.a[l];
      g2 = c.a[l];
    } else {
      c.a[l] = c.z[l].unaryExpr([](double v) { return detail::stable_sigmoid(v); });
      const auto s = c.a[l].array();
      g1 = (s * (1.0 - s)).matrix();
      g2 = (g1.array() * (1.0 - 2.0 * s)).matrix();
    }
    for (int k = 0; k < nd; ++k) c.da[l][k] = (g1.array() * c.dz[l][k].array()).matrix();
    for (int j = 0; j < ns; ++j) {
      const auto& dzj = c.dz[l][t0 + j].array();
      c.dda[l][j] = (g2.array() * dzj * dzj + g1.array() * c.ddz[l][j].array()).matrix();
    }
  }

  Jets out;
  out.order = order;
  out.value = c.a[L - 1].row(0);
  if (nd) {
    out.d1.resize(nd, n);
    for (int k = 0; k < nd; ++k) out.d1.row(k) = c.da[L - 1][k].row(0);
  }
  if (ns) {
    out.d2.resize(ns, n);
    for (int j = 0; j < ns; ++j) out.d2.row(j) = c.dda[L - 1][j].row(0);
  }
  return out;
}

/// Adds d(loss)/d(params) to `grad`, given adjoints d(loss)/d(jets) matching the cached pass.
inline void backward(const Mlp& net, const ForwardCache& c, const Jets& adjoint,
                     Eigen::Ref<VectorXd> grad) {
  const Architecture& arch = net.arch();
  const int L = net.num_layers();
  const int nd = c.order >= JetOrder::first ? arch.input_dim : 0;
  const int ns = c.order == JetOrder::second ? arch.spatial_dim() : 0;
  const int t0 = arch.time_inputs;
  if (adjoint.size() != c.input.cols()) throw std::invalid_argument("mlp backward: size mismatch");

  // Adjoints of the current layer's activation, value and tangents.
  MatrixXd a_bar = adjoint.value;
  std::vector<MatrixXd> da_bar(nd), dda_bar(ns);
  for (int k = 0; k < nd; ++k) da_bar[k] = adjoint.d1.row(k);
  for (int j = 0; j < ns; ++j) dda_bar[j] = adjoint.d2.row(j);

  for (int l = L - 1; l >= 0; --l) {
    const bool output = l == L - 1;
    MatrixXd z_bar;
    std::vector<MatrixXd> dz_bar(nd), ddz_bar(ns);
    if (output && arch.output == OutputActivation::identity) {
      z_bar = std::move(a_bar);
      dz_bar = std::move(da_bar);
      ddz_bar = std::move(dda_bar);
    } else {
      Eigen::ArrayXXd g1, g2, g3;
      if (output) {
        g1 = c.a[l].array();
        g2 = g1;
        g3 = g1;
      } else {
        const auto s = c.a[l].array();
        g1 = s * (1.0 - s);
        g2 = g1 * (1.0 - 2.0 * s);
        g3 = g1 * (1.0 - 6.0 * s + 6.0 * s * s);
      }
      Eigen::ArrayXXd zb = a_bar.array() * g1;
      for (int k = 0; k < nd; ++k) zb += da_bar[k].array() * g2 * c.dz[l][k].array();
      for (int j = 0; j < ns; ++j) {
        const auto dzj = c.dz[l][t0 + j].array();
        zb += dda_bar[j].array() * (g3 * dzj * dzj + g2 * c.ddz[l][j].array());
      }
      z_bar = zb.matrix();
      for (int k = 0; k < nd; ++k) dz_bar[k] = (da_bar[k].array() * g1).matrix();
      for (int j = 0; j < ns; ++j) {
        dz_bar[t0 + j].array() += 2.0 * dda_bar[j].array() * g2 * c.dz[l][t0 + j].array();
        ddz_bar[j] = (dda_bar[j].array() * g1).matrix();
      }
    }

    const int rows = arch.layer_outputs(l);
    const int cols = arch.layer_inputs(l);
    Eigen::Map<MatrixXd> W_bar(grad.data() + net.weight_offset(l), rows, cols);
    Eigen::Map<VectorXd> b_bar(grad.data() + net.bias_offset(l), rows);
    b_bar += z_bar.rowwise().sum();
    if (l == 0) {
      W_bar.noalias() += z_bar * c.input.transpose();
      // d(input)/d(input_k) = e_k; second input derivatives vanish.
      for (int k = 0; k < nd; ++k) W_bar.col(k) += dz_bar[k].rowwise().sum();
      break;
    }
    W_bar.noalias() += z_bar * c.a[l - 1].transpose();
    for (int k = 0; k < nd; ++k) W_bar.noalias() += dz_bar[k] * c.da[l - 1][k].transpose();
    for (int j = 0; j < ns; ++j) W_bar.noalias() += ddz_bar[j] * c.dda[l - 1][j].transpose();

    const auto W = net.weights(l);
    a_bar.noalias() = W.transpose() * z_bar;
    da_bar.assign(nd, {});
    dda_bar.assign(ns, {});
    for (int k = 0; k < nd; ++k) da_bar[k].noalias() = W.transpose() * dz_bar[k];
    for (int j = 0; j < ns; ++j) dda_bar[j].noalias() = W.transpose() * ddz_bar[j];
  }
}

/// Scalar evaluation at one input point.
inline double forward_value(const Mlp& net, std::span<const double> input) {
  MatrixXd x(static_cast<Index>(input.size()), 1);
  for (std::size_t i = 0; i < input.size(); ++i) x(static_cast<Index>(i), 0) = input[i];
  return forward(net, x, JetOrder::value).value(0);
}

struct InputPartials {
  double value = 0.0;
  double dt = 0.0;                 // zero for nets without a time input
  std::vector<double> grad_x;      // spatial gradient
  double laplacian = 0.0;          // trace of the spatial Hessian
};

/// Exact value, time derivative, spatial gradient and Laplacian at one point.
inline InputPartials input_partials(const Mlp& net, std::span<const double> input) {
  MatrixXd x(static_cast<Index>(input.size()), 1);
  for (std::size_t i = 0; i < input.size(); ++i) x(static_cast<Index>(i), 0) = input[i];
  const Jets j = forward(net, x, JetOrder::second);
  const int t0 = net.arch().time_inputs;
  InputPartials p;
  p.value = j.value(0);
  if (t0) p.dt = j.d1(0, 0);
  for (int k = 0; k < net.arch().spatial_dim(); ++k) {
    p.grad_x.push_back(j.d1(t0 + k, 0));
    p.laplacian += j.d2(k, 0);
  }
  return p;
}

/// Batched evaluation split into fixed-size chunks. Chunks are independent, so the
/// reduction order (and therefore the result) does not depend on the worker count.
struct Evaluation {
  static constexpr Index chunk_size = 1024;

  Jets jets;
  Jets adjoint;
  std::vector<ForwardCache> caches;

  Index size() const { return jets.size(); }
};

inline Evaluation evaluate(const Mlp& net, const MatrixXd& inputs, JetOrder order,
                           bool keep_cache = true) {
  const Architecture& arch = net.arch();
  const Index n = inputs.cols();
  const Index chunks = std::max<Index>(1, (n + Evaluation::chunk_size - 1) / Evaluation::chunk_size);
  Evaluation ev;
  ev.jets = Jets::zeros(order, arch.input_dim, arch.spatial_dim(), n);
  ev.adjoint = Jets::zeros(order, arch.input_dim, arch.spatial_dim(), n);
  if (n == 0) return ev;
  if (keep_cache) ev.caches.resize(static_cast<std::size_t>(chunks));
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t ci) {
    const Index begin = static_cast<Index>(ci) * Evaluation::chunk_size;
    const Index len = std::min(Evaluation::chunk_size, n - begin);
    ForwardCache* cache = keep_cache ? &ev.caches[ci] : nullptr;
    Jets part = forward(net, inputs.middleCols(begin, len), order, cache);
    ev.jets.value.segment(begin, len) = part.value;
    if (order >= JetOrder::first) ev.jets.d1.middleCols(begin, len) = part.d1;
    if (order == JetOrder::second) ev.jets.d2.middleCols(begin, len) = part.d2;
  });
  return ev;
}

/// Adds the parameter gradient implied by ev.adjoint to `grad`.
inline void accumulate_gradient(const Mlp& net, const Evaluation& ev, Eigen::Ref<VectorXd> grad) {
  const Index n = ev.size();
  if (n == 0) return;
  if (ev.caches.empty()) throw std::logic_error("accumulate_gradient: evaluation has no cache");
  const std::size_t chunks = ev.caches.size();
  std::vector<VectorXd> partial(chunks, VectorXd::Zero(net.num_params()));
  parallel_for(chunks, [&](std::size_t ci) {
    const Index begin = static_cast<Index>(ci) * Evaluation::chunk_size;
    const Index len = std::min(Evaluation::chunk_size, n - begin);
    Jets adj;
    adj.order = ev.adjoint.order;
    adj.value = ev.adjoint.value.segment(begin, len);
    if (adj.order >= JetOrder::first) adj.d1 = ev.adjoint.d1.middleCols(begin, len);
    if (adj.order == JetOrder::second) adj.d2 = ev.adjoint.d2.middleCols(begin, len);
    backward(net, ev.caches[ci], adj, partial[ci]);
  });
  for (const auto& p : partial) grad += p;
}

}  // namespace mfg::nn
