#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "loralab/numkit.hpp"

namespace loralab::net {

using num::Matrix;
using num::Vector;

enum class ActivationKind { ReLU, Tanh };

// Pointwise activation. Tanh stands in for the bounded Lipschitz family
// (Lipschitz constant 1, bound 1).
struct Activation {
  ActivationKind kind = ActivationKind::ReLU;

  static Activation relu() { return {ActivationKind::ReLU}; }
  static Activation tanh() { return {ActivationKind::Tanh}; }
  static Activation from_name(const std::string& name);

  std::string name() const;
  double lipschitz() const { return 1.0; }
  // Infinity for ReLU.
  double bound() const;
  double apply(double z) const;
  // ReLU'(0) is taken as 0.
  double derivative(double z) const;

  friend bool operator==(const Activation&, const Activation&) = default;
};

// Layer schedule: d_1 = d, then T hidden layers of width W, output D.
// Layer t (0-based, t = 0..T) maps dims()[t] -> dims()[t + 1].
struct Architecture {
  std::size_t d = 1;
  std::size_t D = 1;
  std::size_t T = 1;
  std::size_t W = 2;
  std::size_t r = 1;
  Activation activation{};

  std::size_t layers() const { return T + 1; }
  std::vector<std::size_t> dims() const;
  std::size_t in_dim(std::size_t layer) const;
  std::size_t out_dim(std::size_t layer) const;

  // Shape checks only: all sizes positive, r >= 1.
  void validate_shapes() const;
  // Additionally enforces the rank condition 1 <= r < W used by the bounds.
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Frozen pre-trained stack theta_pre.
struct PretrainedNet {
  Architecture arch;
  std::vector<Matrix> weights;  // layer t: out_dim(t) x in_dim(t)
  std::vector<Vector> biases;   // layer t: out_dim(t)

  void validate() const;
  // R0 = max absolute entry over all weights and biases.
  double max_abs() const;
};

// Gaussian weights with std weight_scale / sqrt(fan_in) and Gaussian biases
// with std bias_scale (zero biases when bias_scale == 0).
PretrainedNet random_pretrained(num::RngState& rng, const Architecture& arch,
                                double weight_scale = 1.0, double bias_scale = 0.0);

PretrainedNet zero_pretrained(const Architecture& arch);

// Which LoRA factor is trained. The default trains A (r x d_in) against a
// frozen random B (d_out x r); Factor::B swaps the roles.
enum class Factor { A, B };

// Low-rank adapter: Delta W(t) = B(t) A(t). The frozen factor is held in a
// shared immutable buffer; copies of an adapter share it and nothing can
// write to it.
class LoraAdapter {
 public:
  LoraAdapter(Architecture arch, std::vector<Matrix> frozen,
              std::vector<Matrix> trainable, double box_bound, double init_scale,
              Factor trained = Factor::A);

  const Architecture& arch() const { return arch_; }
  Factor trained_factor() const { return trained_; }
  double box_bound() const { return box_bound_; }
  double init_scale() const { return init_scale_; }
  std::size_t layers() const { return trainable_.size(); }

  const Matrix& b(std::size_t layer) const;
  const Matrix& a(std::size_t layer) const;

  const std::vector<Matrix>& frozen() const { return *frozen_; }
  const std::vector<Matrix>& trainable() const { return trainable_; }
  // Mutable access to the trainable factor of one layer. Callers that
  // write through this must call project() to restore the box invariant.
  Matrix& trainable(std::size_t layer);
  void set_trainable(std::vector<Matrix> values);

  // Clamp every trainable entry to [-M, M].
  void project();
  double max_abs_trainable() const;
  std::size_t trainable_count() const;

  // Order-sensitive checksum of the frozen buffer (bitwise).
  std::uint64_t frozen_checksum() const;
  bool shares_frozen_with(const LoraAdapter& other) const {
    return frozen_ == other.frozen_;
  }

 private:
  void check_shapes() const;

  Architecture arch_;
  std::shared_ptr<const std::vector<Matrix>> frozen_;
  std::vector<Matrix> trainable_;
  double box_bound_;
  double init_scale_;
  Factor trained_;
};

// Frozen factor ~ N(0, nu^2) i.i.d.; trainable factor zero.
LoraAdapter init_adapter(num::RngState& rng, const Architecture& arch, double nu,
                         double box_bound, Factor trained = Factor::A);

// B(t) A(t) as a dense matrix.
Matrix materialize_delta(const LoraAdapter& adapter, std::size_t layer);

Vector forward_pretrained(const PretrainedNet& net, std::span<const double> x);
// Evaluates with W(t) + B(t)A(t); the perturbation is applied as B(A x).
Vector forward_lora(const PretrainedNet& net, const LoraAdapter& adapter,
                    std::span<const double> x);

// Gradient of upstream^T f(x) with respect to the trainable factor of every
// layer. Same shapes as adapter.trainable().
std::vector<Matrix> backprop(const PretrainedNet& net, const LoraAdapter& adapter,
                             std::span<const double> x,
                             std::span<const double> upstream);

struct ParamCounts {
  std::int64_t p_formula;
  std::int64_t p_exact;
  std::int64_t q_formula;
  std::int64_t q_exact;
};

// p_formula = W(TW - W + T + d + D + 1), q_formula = r(TW - W + d + D);
// the *_exact counts enumerate the actual tensor shapes.
ParamCounts count_params(const Architecture& arch, Factor trained = Factor::A);

}  // namespace loralab::net
