// SPDX-License-Identifier: Apache-2.0
#include "cgl/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cgl/error.hpp"
#include "cgl/rng.hpp"

namespace cgl::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

ConstMapMatrix view(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMapMatrix(t.values().data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

MapMatrix view(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapMatrix(t.values().data(), static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols));
}

Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw ContractError("operands belong to different tapes");
  }
  return *a.tape();
}

Tape& tape_of(const Var& a) {
  if (a.tape() == nullptr) throw ContractError("operation on a detached variable");
  return *a.tape();
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) {
    throw DimensionError("shape " + shape_str(shape_) + " does not hold " + std::to_string(values_.size()) +
                         " values");
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor(Shape{rows, cols}, std::move(v));
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), values_);
}

Tensor Tensor::row(std::size_t r) const {
  require_rank(*this, 2, "row");
  const auto c = cols();
  return Tensor(Shape{c}, std::vector<double>(values_.begin() + r * c, values_.begin() + (r + 1) * c));
}

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.shape(), 0.0) {}

// ---- Tape -----------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::tracked() const { return tape_->tracked(id_); }

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Parameter& param) {
  Node node;
  node.value = param.value;
  node.tracked = true;
  node.param = &param;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.tracked = std::any_of(inputs.begin(), inputs.end(), [&](std::size_t i) { return nodes_[i].tracked; });
  if (node.tracked) {
    node.inputs = std::move(inputs);
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.shape() != node.value.shape() || node.grad.size() != node.value.size()) {
    node.grad = Tensor(node.value.shape(), 0.0);
  }
  return node.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw ContractError("loss does not belong to this tape");
  if (consumed_) throw ContractError("backward called twice on the same tape");
  if (nodes_[loss.id()].value.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  consumed_ = true;
  if (!nodes_[loss.id()].tracked) return;
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.tracked || node.grad.size() == 0) continue;
    if (node.param != nullptr) {
      auto dst = node.param->grad.values();
      auto src = node.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    } else if (node.backward) {
      node.backward(*this, i);
    }
  }
  // Release activations; the tape cannot be reused.
  for (Node& node : nodes_) {
    node.backward = nullptr;
    node.grad = Tensor();
  }
}

// ---- linear algebra -------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() == 0 || av.rank() > 2 || bv.rank() == 0 || bv.rank() > 2) {
    throw DimensionError("matmul needs rank-1 or rank-2 operands, got " + shape_str(av.shape()) + " and " +
                         shape_str(bv.shape()));
  }
  const std::size_t m = av.rank() == 2 ? av.rows() : 1;
  const std::size_t k = av.rank() == 2 ? av.cols() : av.size();
  const std::size_t kb = bv.rank() == 2 ? bv.rows() : bv.size();
  const std::size_t n = bv.rank() == 2 ? bv.cols() : 1;
  if (k != kb) {
    throw DimensionError("matmul inner dimensions differ: " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
  }
  Shape out_shape;
  if (av.rank() == 2) out_shape.push_back(m);
  if (bv.rank() == 2) out_shape.push_back(n);
  Tensor out(out_shape, 0.0);
  if (m * n > 0 && k > 0) view(out, m, n).noalias() = view(av, m, k) * view(bv, k, n);

  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
    const auto dc = view(t.grad(self), m, n);
    if (t.tracked(ia)) view(t.grad_buffer(ia), m, k).noalias() += dc * view(t.value(ib), k, n).transpose();
    if (t.tracked(ib)) view(t.grad_buffer(ib), k, n).noalias() += view(t.value(ia), m, k).transpose() * dc;
  });
}

Var transpose(const Var& a) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  require_rank(av, 2, "transpose");
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(Shape{c, r});
  view(out, c, r) = view(av, r, c).transpose();
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {ia}, [ia, r, c](Tape& t, std::size_t self) {
    view(t.grad_buffer(ia), r, c) += view(t.grad(self), c, r).transpose();
  });
}

Var reshape(const Var& a, Shape shape) {
  Tape& tape = tape_of(a);
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    auto dst = t.grad_buffer(ia).values();
    auto src = t.grad(self).values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  });
}

// ---- elementwise ----------------------------------------------------------

namespace {

enum class Binary { kAdd, kSub, kMul };

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Var binary(Binary op, const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Shape out_shape;
  if (av.shape() == bv.shape() || (bv.size() == 1 && bv.rank() <= av.rank()) || is_suffix(bv.shape(), av.shape())) {
    out_shape = av.shape();
  } else if ((av.size() == 1 && av.rank() <= bv.rank()) || is_suffix(av.shape(), bv.shape())) {
    out_shape = bv.shape();
  } else {
    throw DimensionError("cannot broadcast " + shape_str(av.shape()) + " with " + shape_str(bv.shape()));
  }
  const std::size_t n = shape_size(out_shape);
  const std::size_t na = av.size(), nb = bv.size();
  if ((na == 0 || nb == 0) && n != 0) {
    throw DimensionError("cannot broadcast an empty tensor " + shape_str(av.shape()) + " with " +
                         shape_str(bv.shape()));
  }
  Tensor out(out_shape);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[i % na], y = bv[i % nb];
    out[i] = op == Binary::kAdd ? x + y : op == Binary::kSub ? x - y : x * y;
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib}, [op, ia, ib, n, na, nb](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.tracked(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      const Tensor& bv = t.value(ib);
      for (std::size_t i = 0; i < n; ++i) ga[i % na] += op == Binary::kMul ? g[i] * bv[i % nb] : g[i];
    }
    if (t.tracked(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      const Tensor& av = t.value(ia);
      for (std::size_t i = 0; i < n; ++i) {
        gb[i % nb] += op == Binary::kAdd ? g[i] : op == Binary::kSub ? -g[i] : g[i] * av[i % na];
      }
    }
  });
}

// Records y = f(x) with dy/dx = df(x, y) evaluated pointwise.
template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {ia}, [ia, df](Tape& t, std::size_t self) {
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * df(x[i], y[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(Binary::kAdd, a, b); }
Var sub(const Var& a, const Var& b) { return binary(Binary::kSub, a, b); }
Var mul(const Var& a, const Var& b) { return binary(Binary::kMul, a, b); }

Var scale(const Var& a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var log(const Var& a) {
  for (double x : a.value().values()) {
    if (!(x > 0.0)) {
      throw NumericDomainError("log of non-positive value " + std::to_string(x) + " (clamp first)");
    }
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---- softmax / reductions -------------------------------------------------

namespace {

// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisLayout {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisLayout layout(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape));
  }
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

}  // namespace

Var softmax(const Var& a, std::size_t axis) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  const AxisLayout l = layout(av.shape(), axis, "softmax");
  if (l.extent == 0) throw DimensionError("softmax over an empty axis of " + shape_str(av.shape()));
  Tensor out(av.shape());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      double mx = av[base];
      for (std::size_t e = 1; e < l.extent; ++e) mx = std::max(mx, av[base + e * l.inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < l.extent; ++e) {
        const double v = std::exp(av[base + e * l.inner] - mx);
        out[base + e * l.inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < l.extent; ++e) out[base + e * l.inner] /= total;
    }
  }
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {ia}, [ia, l](Tape& t, std::size_t self) {
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.extent * l.inner + in;
        double dot = 0.0;
        for (std::size_t e = 0; e < l.extent; ++e) dot += g[base + e * l.inner] * y[base + e * l.inner];
        for (std::size_t e = 0; e < l.extent; ++e) {
          const std::size_t i = base + e * l.inner;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

Var reduce(Reduce op, const Var& a) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  const std::size_t n = av.size();
  if (op == Reduce::kMean && n == 0) throw DegenerateInputError("mean of an empty tensor");
  double total = 0.0;
  for (double x : av.values()) total += x;
  const double factor = op == Reduce::kMean ? 1.0 / static_cast<double>(n) : 1.0;
  const std::size_t ia = a.id();
  return tape.record(Tensor::scalar(total * factor), {ia}, [ia, factor](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0] * factor;
    for (double& x : t.grad_buffer(ia).values()) x += g;
  });
}

Var reduce(Reduce op, const Var& a, std::size_t axis) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  const AxisLayout l = layout(av.shape(), axis, "reduce");
  if (op == Reduce::kMean && l.extent == 0) throw DegenerateInputError("mean over a zero-length axis");
  Shape out_shape = av.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const double factor = op == Reduce::kMean ? 1.0 / static_cast<double>(l.extent) : 1.0;
  Tensor out(out_shape, 0.0);
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t e = 0; e < l.extent; ++e) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        out[o * l.inner + in] += av[(o * l.extent + e) * l.inner + in];
      }
    }
  }
  for (double& x : out.values()) x *= factor;
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {ia}, [ia, l, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t e = 0; e < l.extent; ++e) {
        for (std::size_t in = 0; in < l.inner; ++in) {
          gx[(o * l.extent + e) * l.inner + in] += g[o * l.inner + in] * factor;
        }
      }
    }
  });
}

// ---- structural -----------------------------------------------------------

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  Tape& tape = tape_of(parts.front());
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw DimensionError("concat axis " + std::to_string(axis) + " out of range for " + shape_str(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents, ids;
  for (const Var& p : parts) {
    if (p.tape() != &tape) throw ContractError("operands belong to different tapes");
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) throw DimensionError("concat extents differ: " + shape_str(first) + " vs " + shape_str(s));
    out_shape[axis] += s[axis];
    extents.push_back(s[axis]);
    ids.push_back(p.id());
  }
  const AxisLayout l = layout(out_shape, axis, "concat");
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    const std::size_t chunk = extents[p] * l.inner;
    for (std::size_t o = 0; o < l.outer; ++o) {
      std::copy_n(v.values().begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.values().begin() + static_cast<std::ptrdiff_t>(o * l.extent * l.inner + offset * l.inner));
    }
    offset += extents[p];
  }
  return tape.record(std::move(out), ids, [ids, extents, l](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      const std::size_t chunk = extents[p] * l.inner;
      if (t.tracked(ids[p])) {
        Tensor& gp = t.grad_buffer(ids[p]);
        for (std::size_t o = 0; o < l.outer; ++o) {
          for (std::size_t i = 0; i < chunk; ++i) {
            gp[o * chunk + i] += g[o * l.extent * l.inner + offset * l.inner + i];
          }
        }
      }
      offset += extents[p];
    }
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ContractError("stack of zero rows");
  std::vector<Var> as_rows;
  as_rows.reserve(rows.size());
  for (const Var& r : rows) {
    if (r.value().rank() != 1) throw DimensionError("stack_rows expects rank-1 rows, got " + shape_str(r.shape()));
    as_rows.push_back(reshape(r, Shape{1, r.value().size()}));
  }
  return concat(as_rows, 0);
}

Var gather_rows(const Var& table, std::span<const std::size_t> indices) {
  Tape& tape = tape_of(table);
  const Tensor& tv = table.value();
  require_rank(tv, 2, "gather_rows");
  const std::size_t n = tv.rows(), d = tv.cols();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Tensor out(Shape{idx.size(), d});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= n) {
      throw IndexError("row index " + std::to_string(idx[r]) + " out of range for table with " + std::to_string(n) +
                       " rows");
    }
    std::copy_n(tv.values().begin() + static_cast<std::ptrdiff_t>(idx[r] * d), d,
                out.values().begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  const std::size_t it = table.id();
  return tape.record(std::move(out), {it}, [it, idx = std::move(idx), d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gt = t.grad_buffer(it);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t c = 0; c < d; ++c) gt[idx[r] * d + c] += g[r * d + c];
    }
  });
}

// ---- batch normalization --------------------------------------------------

BatchNormState::BatchNormState(std::size_t width)
    : running_mean(Shape{width}, 0.0), running_var(Shape{width}, 1.0) {}

Var batchnorm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, Mode mode,
              bool update_stats) {
  Tape& tape = same_tape(x, gamma);
  same_tape(x, beta);
  const Tensor& xv = x.value();
  require_rank(xv, 2, "batchnorm");
  const std::size_t n = xv.rows(), d = xv.cols();
  if (gamma.value().size() != d || beta.value().size() != d || state.running_mean.size() != d) {
    throw DimensionError("batchnorm width mismatch: input " + shape_str(xv.shape()) + ", gamma " +
                         shape_str(gamma.shape()) + ", beta " + shape_str(beta.shape()));
  }
  std::vector<double> mu(d, 0.0), var(d, 0.0);
  if (mode == Mode::kTrain) {
    if (n < 2) throw DegenerateInputError("batchnorm train mode needs at least 2 rows, got " + std::to_string(n));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) mu[c] += xv.at(r, c);
    for (double& m : mu) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) var[c] += (xv.at(r, c) - mu[c]) * (xv.at(r, c) - mu[c]);
    for (double& v : var) v /= static_cast<double>(n);
    if (update_stats) {
      for (std::size_t c = 0; c < d; ++c) {
        if (state.initialized) {
          state.running_mean[c] = BatchNormState::kMomentum * state.running_mean[c] +
                                  (1.0 - BatchNormState::kMomentum) * mu[c];
          state.running_var[c] =
              BatchNormState::kMomentum * state.running_var[c] + (1.0 - BatchNormState::kMomentum) * var[c];
        } else {
          state.running_mean[c] = mu[c];
          state.running_var[c] = var[c];
        }
      }
      state.initialized = true;
    }
  } else {
    if (!state.initialized) throw StateError("batchnorm inference before any training step");
    for (std::size_t c = 0; c < d; ++c) {
      mu[c] = state.running_mean[c];
      var[c] = state.running_var[c];
    }
  }
  std::vector<double> inv_std(d);
  for (std::size_t c = 0; c < d; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + BatchNormState::kEpsilon);

  Tensor xhat(xv.shape());
  Tensor out(xv.shape());
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (xv.at(r, c) - mu[c]) * inv_std[c];
      xhat.at(r, c) = h;
      out.at(r, c) = gv[c] * h + bv[c];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  const bool batch_stats = mode == Mode::kTrain;
  return tape.record(
      std::move(out), {ix, ig, ib},
      [ix, ig, ib, n, d, batch_stats, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                                             std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& gv = t.value(ig);
        if (t.tracked(ig) || t.tracked(ib)) {
          std::vector<double> dgamma(d, 0.0), dbeta(d, 0.0);
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
              dgamma[c] += g.at(r, c) * xhat.at(r, c);
              dbeta[c] += g.at(r, c);
            }
          }
          if (t.tracked(ig)) {
            Tensor& gg = t.grad_buffer(ig);
            for (std::size_t c = 0; c < d; ++c) gg[c] += dgamma[c];
          }
          if (t.tracked(ib)) {
            Tensor& gb = t.grad_buffer(ib);
            for (std::size_t c = 0; c < d; ++c) gb[c] += dbeta[c];
          }
        }
        if (!t.tracked(ix)) return;
        Tensor& gx = t.grad_buffer(ix);
        if (!batch_stats) {
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) gx.at(r, c) += g.at(r, c) * gv[c] * inv_std[c];
          return;
        }
        const double nn = static_cast<double>(n);
        for (std::size_t c = 0; c < d; ++c) {
          double s = 0.0, sh = 0.0;
          for (std::size_t r = 0; r < n; ++r) {
            const double dh = g.at(r, c) * gv[c];
            s += dh;
            sh += dh * xhat.at(r, c);
          }
          for (std::size_t r = 0; r < n; ++r) {
            const double dh = g.at(r, c) * gv[c];
            gx.at(r, c) += inv_std[c] / nn * (nn * dh - s - xhat.at(r, c) * sh);
          }
        }
      });
}

// ---- gradient verification ------------------------------------------------

GradientCheckReport check_gradients(const ScalarProgram& f, std::span<Parameter* const> params, double step,
                                    std::size_t sample_limit, unsigned long long seed) {
  if (!(step > 0.0)) throw ContractError("finite-difference step must be positive");
  auto evaluate = [&f]() {
    Tape tape;
    Var out = f(tape);
    if (out.value().size() != 1) {
      throw ContractError("gradient check needs a scalar program, got shape " + shape_str(out.shape()));
    }
    return out.value()[0];
  };

  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var out = f(tape);
    if (out.value().size() != 1) {
      throw ContractError("gradient check needs a scalar program, got shape " + shape_str(out.shape()));
    }
    tape.backward(out);
  }

  Rng rng(seed);
  GradientCheckReport report;
  for (Parameter* p : params) {
    GradientCheckEntry entry;
    entry.name = p->name;
    std::vector<std::size_t> order(p->value.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (sample_limit > 0 && order.size() > sample_limit) {
      rng.shuffle(order);
      order.resize(sample_limit);
      std::sort(order.begin(), order.end());
    }
    for (std::size_t i : order) {
      const double original = p->value[i];
      p->value[i] = original + step;
      const double up = evaluate();
      p->value[i] = original - step;
      const double down = evaluate();
      p->value[i] = original;
      const double fd = (up - down) / (2.0 * step);
      const double ad = p->grad[i];
      const double denom = std::max({std::abs(fd), std::abs(ad), 1e-8});
      const double rel = std::abs(fd - ad) / denom;
      if (rel >= entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
        entry.worst_fd = fd;
        entry.worst_ad = ad;
      }
      ++entry.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.arrays.push_back(std::move(entry));
  }
  return report;
}

}  // namespace cgl::ad
