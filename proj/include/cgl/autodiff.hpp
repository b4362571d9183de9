// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense 64-bit tensors.
//
// A Tape records one forward pass. Leaves are either constants (never
// tracked) or Parameters (tracked; backward accumulates into
// Parameter::grad). Every op appends one node whose backward closure reads
// the node's gradient and adds into its tracked inputs. A tape supports a
// single backward() call; a second call is a ContractError.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cgl::ad {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array. Rank 0 is a scalar.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& data() const { return values_; }

  void fill(double v);
  Tensor reshaped(Shape shape) const;
  Tensor row(std::size_t r) const;

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// Trainable array. `grad` has the same shape as `value`.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool tracked() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Parameter& param);

  /// Seeds d(loss)/d(loss) = 1 and runs every backward rule once in reverse
  /// recording order. `loss` must hold a single value.
  void backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // Used by op implementations.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool tracked(std::size_t id) const { return nodes_[id].tracked; }
  /// Gradient buffer of a tracked node, allocated on first use.
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool tracked = false;
    Parameter* param = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// ---- operations -----------------------------------------------------------

/// Matrix product. Rank-1 operands act as a row (left) or column (right)
/// vector and the corresponding output extent is dropped.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);

// Elementwise binary ops. The second operand (or either, for scalars) may be
// broadcast when it is a scalar or its shape equals the trailing extents of
// the other operand.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

Var scale(const Var& a, double factor);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
/// Throws NumericDomainError on any non-positive input.
Var log(const Var& a);
/// Gradient is zero where the input lies outside [lo, hi].
Var clamp(const Var& a, double lo, double hi);

Var softmax(const Var& a, std::size_t axis);

enum class Reduce { kSum, kMean };
/// Reduction over every element, producing a scalar.
Var reduce(Reduce op, const Var& a);
/// Reduction over one axis; that extent is removed from the shape.
Var reduce(Reduce op, const Var& a, std::size_t axis);
inline Var sum(const Var& a) { return reduce(Reduce::kSum, a); }
inline Var mean(const Var& a) { return reduce(Reduce::kMean, a); }

Var concat(const std::vector<Var>& parts, std::size_t axis);
inline Var concat(const Var& a, const Var& b, std::size_t axis) { return concat({a, b}, axis); }
/// Stacks equal-shaped rank-1 tensors into the rows of a matrix.
Var stack_rows(const std::vector<Var>& rows);

Var gather_rows(const Var& table, std::span<const std::size_t> indices);

// ---- batch normalization --------------------------------------------------

struct BatchNormState {
  explicit BatchNormState(std::size_t width = 0);

  Tensor running_mean;
  Tensor running_var;
  bool initialized = false;

  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.9;
};

enum class Mode { kTrain, kInfer };

/// Column-wise batch normalization with learned scale `gamma` and shift
/// `beta`. Train mode normalizes with the batch's biased variance and, when
/// `update_stats` is set, folds the batch statistics into `state`
/// (the first update copies them). Infer mode uses the running statistics.
Var batchnorm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, Mode mode,
              bool update_stats = true);

// ---- gradient verification ------------------------------------------------

struct GradientCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_fd = 0.0;
  double worst_ad = 0.0;
};

struct GradientCheckReport {
  std::vector<GradientCheckEntry> arrays;
  double max_rel_error = 0.0;
};

using ScalarProgram = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients against central finite differences.
/// Arrays larger than `sample_limit` are checked on a seeded random sample of
/// `sample_limit` entries (pass 0 to check everything). Relative error uses
/// the denominator max(|fd|, |ad|, 1e-8).
GradientCheckReport check_gradients(const ScalarProgram& f, std::span<Parameter* const> params,
                                    double step = 1e-6, std::size_t sample_limit = 0,
                                    unsigned long long seed = 0);

}  // namespace cgl::ad
