#include "loralab/netcore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "loralab/errors.hpp"

namespace loralab::net {

Activation Activation::from_name(const std::string& name) {
  if (name == "relu") return relu();
  if (name == "tanh") return tanh();
  throw InvalidParameter("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string Activation::name() const {
  return kind == ActivationKind::ReLU ? "relu" : "tanh";
}

double Activation::bound() const {
  return kind == ActivationKind::ReLU ? std::numeric_limits<double>::infinity() : 1.0;
}

double Activation::apply(double z) const {
  if (kind == ActivationKind::ReLU) return z > 0.0 ? z : 0.0;
  return std::tanh(z);
}

double Activation::derivative(double z) const {
  if (kind == ActivationKind::ReLU) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

std::vector<std::size_t> Architecture::dims() const {
  std::vector<std::size_t> out;
  out.reserve(T + 2);
  out.push_back(d);
  for (std::size_t t = 0; t < T; ++t) out.push_back(W);
  out.push_back(D);
  return out;
}

std::size_t Architecture::in_dim(std::size_t layer) const {
  if (layer > T) throw InvalidInput("layer index out of range");
  return layer == 0 ? d : W;
}

std::size_t Architecture::out_dim(std::size_t layer) const {
  if (layer > T) throw InvalidInput("layer index out of range");
  return layer == T ? D : W;
}

void Architecture::validate_shapes() const {
  if (d == 0 || D == 0 || T == 0 || W == 0) {
    throw InvalidArchitecture("architecture sizes d, D, T, W must be positive");
  }
  if (r == 0) throw InvalidArchitecture("LoRA rank r must be at least 1");
}

void Architecture::validate() const {
  validate_shapes();
  if (r >= W) {
    throw InvalidArchitecture("LoRA rank must satisfy 1 <= r < W (r=" +
                              std::to_string(r) + ", W=" + std::to_string(W) + ")");
  }
}

void PretrainedNet::validate() const {
  arch.validate_shapes();
  if (weights.size() != arch.layers() || biases.size() != arch.layers()) {
    throw InvalidInput("pretrained net must have T+1 weight matrices and biases");
  }
  for (std::size_t t = 0; t < arch.layers(); ++t) {
    if (weights[t].rows() != arch.out_dim(t) || weights[t].cols() != arch.in_dim(t)) {
      throw InvalidInput("weight " + std::to_string(t) + " has wrong shape");
    }
    if (biases[t].size() != arch.out_dim(t)) {
      throw InvalidInput("bias " + std::to_string(t) + " has wrong length");
    }
    if (!weights[t].all_finite() ||
        !std::all_of(biases[t].begin(), biases[t].end(),
                     [](double x) { return std::isfinite(x); })) {
      throw InvalidInput("pretrained parameters must be finite");
    }
  }
}

double PretrainedNet::max_abs() const {
  double m = 0.0;
  for (const auto& w : weights) m = std::max(m, w.max_abs());
  for (const auto& b : biases)
    for (double x : b) m = std::max(m, std::abs(x));
  return m;
}

PretrainedNet random_pretrained(num::RngState& rng, const Architecture& arch,
                                double weight_scale, double bias_scale) {
  arch.validate_shapes();
  PretrainedNet net{arch, {}, {}};
  for (std::size_t t = 0; t < arch.layers(); ++t) {
    const double scale = weight_scale / std::sqrt(static_cast<double>(arch.in_dim(t)));
    net.weights.push_back(num::sample_gaussian(rng, arch.out_dim(t), arch.in_dim(t), scale));
    Vector b(arch.out_dim(t), 0.0);
    if (bias_scale > 0.0) {
      for (double& x : b) x = bias_scale * rng.normal();
    }
    net.biases.push_back(std::move(b));
  }
  return net;
}

PretrainedNet zero_pretrained(const Architecture& arch) {
  arch.validate_shapes();
  PretrainedNet net{arch, {}, {}};
  for (std::size_t t = 0; t < arch.layers(); ++t) {
    net.weights.emplace_back(arch.out_dim(t), arch.in_dim(t));
    net.biases.emplace_back(arch.out_dim(t), 0.0);
  }
  return net;
}

LoraAdapter::LoraAdapter(Architecture arch, std::vector<Matrix> frozen,
                         std::vector<Matrix> trainable, double box_bound,
                         double init_scale, Factor trained)
    : arch_(arch),
      frozen_(std::make_shared<const std::vector<Matrix>>(std::move(frozen))),
      trainable_(std::move(trainable)),
      box_bound_(box_bound),
      init_scale_(init_scale),
      trained_(trained) {
  arch_.validate_shapes();
  if (!(box_bound_ > 0.0)) throw InvalidParameter("box bound M must be positive");
  if (!(init_scale_ > 0.0)) throw InvalidParameter("init scale nu must be positive");
  check_shapes();
}

void LoraAdapter::check_shapes() const {
  const std::size_t L = arch_.layers();
  if (frozen_->size() != L || trainable_.size() != L) {
    throw InvalidInput("adapter must hold T+1 factors of each kind");
  }
  for (std::size_t t = 0; t < L; ++t) {
    const Matrix& bm = b(t);
    const Matrix& am = a(t);
    if (bm.rows() != arch_.out_dim(t) || bm.cols() != arch_.r) {
      throw InvalidInput("B factor " + std::to_string(t) + " has wrong shape");
    }
    if (am.rows() != arch_.r || am.cols() != arch_.in_dim(t)) {
      throw InvalidInput("A factor " + std::to_string(t) + " has wrong shape");
    }
  }
}

const Matrix& LoraAdapter::b(std::size_t layer) const {
  if (layer >= trainable_.size()) throw InvalidInput("layer index out of range");
  return trained_ == Factor::A ? (*frozen_)[layer] : trainable_[layer];
}

const Matrix& LoraAdapter::a(std::size_t layer) const {
  if (layer >= trainable_.size()) throw InvalidInput("layer index out of range");
  return trained_ == Factor::A ? trainable_[layer] : (*frozen_)[layer];
}

Matrix& LoraAdapter::trainable(std::size_t layer) {
  if (layer >= trainable_.size()) throw InvalidInput("layer index out of range");
  return trainable_[layer];
}

void LoraAdapter::set_trainable(std::vector<Matrix> values) {
  std::swap(trainable_, values);
  try {
    check_shapes();
  } catch (...) {
    std::swap(trainable_, values);
    throw;
  }
}

void LoraAdapter::project() {
  for (auto& m : trainable_)
    for (double& x : m.entries()) x = std::clamp(x, -box_bound_, box_bound_);
}

double LoraAdapter::max_abs_trainable() const {
  double m = 0.0;
  for (const auto& t : trainable_) m = std::max(m, t.max_abs());
  return m;
}

std::size_t LoraAdapter::trainable_count() const {
  std::size_t n = 0;
  for (const auto& t : trainable_) n += t.size();
  return n;
}

std::uint64_t LoraAdapter::frozen_checksum() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& m : *frozen_) {
    for (double x : m.entries()) {
      h ^= std::bit_cast<std::uint64_t>(x);
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

LoraAdapter init_adapter(num::RngState& rng, const Architecture& arch, double nu,
                         double box_bound, Factor trained) {
  arch.validate_shapes();
  if (!(nu > 0.0)) throw InvalidParameter("init scale nu must be positive");
  if (!(box_bound > 0.0)) throw InvalidParameter("box bound M must be positive");
  std::vector<Matrix> frozen;
  std::vector<Matrix> trainable;
  for (std::size_t t = 0; t < arch.layers(); ++t) {
    const std::size_t out = arch.out_dim(t);
    const std::size_t in = arch.in_dim(t);
    if (trained == Factor::A) {
      frozen.push_back(num::sample_gaussian(rng, out, arch.r, nu));
      trainable.emplace_back(arch.r, in);
    } else {
      frozen.push_back(num::sample_gaussian(rng, arch.r, in, nu));
      trainable.emplace_back(out, arch.r);
    }
  }
  return LoraAdapter(arch, std::move(frozen), std::move(trainable), box_bound, nu, trained);
}

Matrix materialize_delta(const LoraAdapter& adapter, std::size_t layer) {
  if (layer >= adapter.layers()) throw InvalidInput("layer index out of range");
  return adapter.b(layer) * adapter.a(layer);
}

namespace {

struct Trace {
  std::vector<Vector> inputs;     // x^(t) fed to layer t
  std::vector<Vector> projected;  // A(t) x^(t), empty without adapter
  std::vector<Vector> pre;        // pre-activation of layer t
  Vector output;
};

void check_input(const Architecture& arch, std::span<const double> x) {
  if (x.size() != arch.d) {
    throw InvalidInput("input has length " + std::to_string(x.size()) +
                       ", expected d=" + std::to_string(arch.d));
  }
}

void check_pair(const PretrainedNet& net, const LoraAdapter& adapter) {
  const Architecture& a = net.arch;
  const Architecture& b = adapter.arch();
  if (a.d != b.d || a.D != b.D || a.T != b.T || a.W != b.W) {
    throw InvalidInput("adapter architecture does not match the pretrained net");
  }
}

template <bool kRecord>
Vector run_forward(const PretrainedNet& net, const LoraAdapter* adapter,
                   std::span<const double> x, Trace* trace) {
  check_input(net.arch, x);
  const std::size_t L = net.arch.layers();
  Vector cur(x.begin(), x.end());
  for (std::size_t t = 0; t < L; ++t) {
    Vector z = num::matvec(net.weights[t], cur);
    Vector u;
    if (adapter != nullptr) {
      u = num::matvec(adapter->a(t), cur);
      const Vector dz = num::matvec(adapter->b(t), u);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += dz[i];
    }
    const Vector& bias = net.biases[t];
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += bias[i];
    if constexpr (kRecord) {
      trace->inputs.push_back(cur);
      trace->projected.push_back(u);
      trace->pre.push_back(z);
    }
    if (t + 1 < L) {
      for (double& v : z) v = net.arch.activation.apply(v);
    }
    cur = std::move(z);
  }
  return cur;
}

}  // namespace

Vector forward_pretrained(const PretrainedNet& net, std::span<const double> x) {
  return run_forward<false>(net, nullptr, x, nullptr);
}

Vector forward_lora(const PretrainedNet& net, const LoraAdapter& adapter,
                    std::span<const double> x) {
  check_pair(net, adapter);
  return run_forward<false>(net, &adapter, x, nullptr);
}

std::vector<Matrix> backprop(const PretrainedNet& net, const LoraAdapter& adapter,
                             std::span<const double> x,
                             std::span<const double> upstream) {
  check_pair(net, adapter);
  if (upstream.size() != net.arch.D) {
    throw InvalidInput("upstream gradient has length " + std::to_string(upstream.size()) +
                       ", expected D=" + std::to_string(net.arch.D));
  }
  Trace trace;
  run_forward<true>(net, &adapter, x, &trace);

  const std::size_t L = net.arch.layers();
  std::vector<Matrix> grads(L);
  Vector delta(upstream.begin(), upstream.end());
  for (std::size_t t = L; t-- > 0;) {
    const Vector bt_delta = num::matvec_transposed(adapter.b(t), delta);
    const Vector& xin = trace.inputs[t];
    if (adapter.trained_factor() == Factor::A) {
      Matrix g(bt_delta.size(), xin.size());
      for (std::size_t i = 0; i < bt_delta.size(); ++i)
        for (std::size_t j = 0; j < xin.size(); ++j) g(i, j) = bt_delta[i] * xin[j];
      grads[t] = std::move(g);
    } else {
      const Vector& u = trace.projected[t];
      Matrix g(delta.size(), u.size());
      for (std::size_t i = 0; i < delta.size(); ++i)
        for (std::size_t j = 0; j < u.size(); ++j) g(i, j) = delta[i] * u[j];
      grads[t] = std::move(g);
    }
    if (t == 0) break;
    Vector back = num::matvec_transposed(net.weights[t], delta);
    const Vector through_a = num::matvec_transposed(adapter.a(t), bt_delta);
    const Vector& z_prev = trace.pre[t - 1];
    for (std::size_t j = 0; j < back.size(); ++j) {
      back[j] = (back[j] + through_a[j]) * net.arch.activation.derivative(z_prev[j]);
    }
    delta = std::move(back);
  }
  return grads;
}

ParamCounts count_params(const Architecture& arch, Factor trained) {
  arch.validate_shapes();
  const auto d = static_cast<std::int64_t>(arch.d);
  const auto D = static_cast<std::int64_t>(arch.D);
  const auto T = static_cast<std::int64_t>(arch.T);
  const auto W = static_cast<std::int64_t>(arch.W);
  const auto r = static_cast<std::int64_t>(arch.r);
  ParamCounts c{};
  c.p_formula = W * (T * W - W + T + d + D + 1);
  c.q_formula = r * (T * W - W + d + D);
  c.p_exact = 0;
  c.q_exact = 0;
  for (std::size_t t = 0; t < arch.layers(); ++t) {
    const auto in = static_cast<std::int64_t>(arch.in_dim(t));
    const auto out = static_cast<std::int64_t>(arch.out_dim(t));
    c.p_exact += out * in + out;
    c.q_exact += r * (trained == Factor::A ? in : out);
  }
  return c;
}

}  // namespace loralab::net
