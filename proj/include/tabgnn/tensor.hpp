#pragma once

// Dense matrices and a tape-based reverse-mode differentiation engine.
//
// A Tape records every operation of one forward pass in creation order, which
// is already a topological order, so backward() is a single reverse sweep.
// Trainable values live in Parameter objects outside the tape; binding a
// Parameter to a tape creates a leaf whose gradient is added into
// Parameter::grad when backward() runs. Tapes are single-use and confined to
// one thread.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tabgnn/error.hpp"
#include "tabgnn/random.hpp"

namespace tabgnn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// A named trainable matrix with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Glorot/Xavier uniform: U(-r, r) with r = sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(Index rows, Index cols, Rng& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-r, r);
  return m;
}

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  bool requires_grad() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Receives the gradient of the node being processed and pushes
  // contributions into its parents through Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Matrix&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), false, nullptr); }

  Var param(Parameter& p) {
    const Var v = push(p.value, true, nullptr);
    nodes_.back().param = &p;
    return v;
  }

  Var push(Matrix value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, std::move(backward), nullptr});
    return Var(this, nodes_.size() - 1);
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  void accumulate(std::size_t id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  // Reverse sweep from a scalar loss. Parameter leaves add their gradient into
  // Parameter::grad; callers zero those before each step.
  void backward(Var loss) {
    if (loss.rows() != 1 || loss.cols() != 1) {
      throw ShapeError("backward requires a scalar loss, got " + shape_str(loss.value()));
    }
    for (auto& n : nodes_) n.grad.resize(0, 0);
    accumulate(loss.id(), Matrix::Ones(1, 1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.param != nullptr) n.param->grad += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad;
    BackwardFn backward;
    Parameter* param;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace detail {

inline void require_same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw Error("operands belong to different tapes");
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

inline Var matmul(Var a, Var b) {
  detail::require_same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  }
  Matrix out;
  out.noalias() = a.value() * b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), a.requires_grad() || b.requires_grad(),
                       [ia, ib](Tape& t, const Matrix& g) {
                         if (t.requires_grad(ia)) {
                           Matrix ga;
                           ga.noalias() = g * t.value(ib).transpose();
                           t.accumulate(ia, ga);
                         }
                         if (t.requires_grad(ib)) {
                           Matrix gb;
                           gb.noalias() = t.value(ia).transpose() * g;
                           t.accumulate(ib, gb);
                         }
                       });
}

inline Var transpose(Var a) {
  const std::size_t ia = a.id();
  return a.tape().push(a.value().transpose(), a.requires_grad(),
                       [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g.transpose()); });
}

inline Var add(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "add");
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(a.value() + b.value(), a.requires_grad() || b.requires_grad(),
                       [ia, ib](Tape& t, const Matrix& g) {
                         t.accumulate(ia, g);
                         t.accumulate(ib, g);
                       });
}

inline Var sub(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(a.value() - b.value(), a.requires_grad() || b.requires_grad(),
                       [ia, ib](Tape& t, const Matrix& g) {
                         t.accumulate(ia, g);
                         t.accumulate(ib, -g);
                       });
}

inline Var scale(Var a, double s) {
  const std::size_t ia = a.id();
  return a.tape().push(a.value() * s, a.requires_grad(),
                       [ia, s](Tape& t, const Matrix& g) { t.accumulate(ia, g * s); });
}

inline Var hadamard(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "hadamard");
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(a.value().cwiseProduct(b.value()), a.requires_grad() || b.requires_grad(),
                       [ia, ib](Tape& t, const Matrix& g) {
                         if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                         if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                       });
}

// a (n x m) + bias (1 x m), bias broadcast over rows.
inline Var add_row(Var a, Var bias) {
  detail::require_same_tape(a, bias);
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw ShapeError("add_row: bias " + shape_str(bias.value()) + " for " + shape_str(a.value()));
  }
  Matrix out = a.value();
  out.rowwise() += bias.value().row(0);
  const std::size_t ia = a.id(), ib = bias.id();
  return a.tape().push(std::move(out), a.requires_grad() || bias.requires_grad(),
                       [ia, ib](Tape& t, const Matrix& g) {
                         t.accumulate(ia, g);
                         if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
                       });
}

// out(i, j) = u(i) + v(j) for column vectors u (n x 1) and v (m x 1).
inline Var outer_sum(Var u, Var v) {
  detail::require_same_tape(u, v);
  if (u.cols() != 1 || v.cols() != 1) throw ShapeError("outer_sum expects column vectors");
  const Index n = u.rows(), m = v.rows();
  Matrix out(n, m);
  for (Index i = 0; i < n; ++i) out.row(i) = v.value().col(0).transpose().array() + u.value()(i, 0);
  const std::size_t iu = u.id(), iv = v.id();
  return u.tape().push(std::move(out), u.requires_grad() || v.requires_grad(),
                       [iu, iv](Tape& t, const Matrix& g) {
                         if (t.requires_grad(iu)) t.accumulate(iu, g.rowwise().sum());
                         if (t.requires_grad(iv)) t.accumulate(iv, g.colwise().sum().transpose());
                       });
}

inline Var gather_rows(Var a, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= a.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(static_cast<Index>(r)) = a.value().row(rows[r]);
  }
  const std::size_t ia = a.id();
  std::vector<Index> idx(rows.begin(), rows.end());
  const Index src_rows = a.rows();
  return a.tape().push(std::move(out), a.requires_grad(),
                       [ia, idx = std::move(idx), src_rows](Tape& t, const Matrix& g) {
                         Matrix ga = Matrix::Zero(src_rows, g.cols());
                         for (std::size_t r = 0; r < idx.size(); ++r) ga.row(idx[r]) += g.row(static_cast<Index>(r));
                         t.accumulate(ia, ga);
                       });
}

inline Var slice_rows(Var a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows()) throw ShapeError("slice_rows: range out of bounds");
  const std::size_t ia = a.id();
  const Index src_rows = a.rows();
  return a.tape().push(a.value().middleRows(begin, count), a.requires_grad(),
                       [ia, begin, count, src_rows](Tape& t, const Matrix& g) {
                         Matrix ga = Matrix::Zero(src_rows, g.cols());
                         ga.middleRows(begin, count) = g;
                         t.accumulate(ia, ga);
                       });
}

inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const Index rows = parts.front().rows();
  Index cols = 0;
  bool needs_grad = false;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch");
    detail::require_same_tape(parts.front(), p);
    cols += p.cols();
    needs_grad = needs_grad || p.requires_grad();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Index>> layout;
  Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    layout.emplace_back(p.id(), offset);
    offset += p.cols();
  }
  return parts.front().tape().push(std::move(out), needs_grad,
                                   [layout = std::move(layout)](Tape& t, const Matrix& g) {
                                     for (const auto& [id, off] : layout) {
                                       if (t.requires_grad(id)) t.accumulate(id, g.middleCols(off, t.value(id).cols()));
                                     }
                                   });
}

// ---------------------------------------------------------------------------
// Elementwise

struct Activation {
  enum class Kind { identity, relu, elu, leaky_relu, sigmoid, tanh };
  Kind kind = Kind::identity;
  double slope = 0.2;  // leaky_relu negative slope; elu alpha is fixed at 1

  static Activation identity() { return {Kind::identity, 0.0}; }
  static Activation relu() { return {Kind::relu, 0.0}; }
  static Activation elu() { return {Kind::elu, 0.0}; }
  static Activation leaky_relu(double slope = 0.2) { return {Kind::leaky_relu, slope}; }
  static Activation sigmoid() { return {Kind::sigmoid, 0.0}; }
  static Activation tanh() { return {Kind::tanh, 0.0}; }

  bool operator==(const Activation&) const = default;
};

inline std::string to_string(Activation a) {
  switch (a.kind) {
    case Activation::Kind::identity: return "identity";
    case Activation::Kind::relu: return "relu";
    case Activation::Kind::elu: return "elu";
    case Activation::Kind::leaky_relu: return "leaky_relu";
    case Activation::Kind::sigmoid: return "sigmoid";
    case Activation::Kind::tanh: return "tanh";
  }
  return "?";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "identity" || s == "linear") return Activation::identity();
  if (s == "relu") return Activation::relu();
  if (s == "elu") return Activation::elu();
  if (s == "leaky_relu") return Activation::leaky_relu();
  if (s == "sigmoid") return Activation::sigmoid();
  if (s == "tanh") return Activation::tanh();
  throw UsageError("unknown activation '" + s + "'");
}

namespace detail {

inline double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline Var activate(Var x, Activation act) {
  using K = Activation::Kind;
  if (act.kind == K::identity) return x;
  const Matrix& in = x.value();
  Matrix out(in.rows(), in.cols());
  const double slope = act.slope;
  for (Index i = 0; i < in.size(); ++i) {
    const double v = in.data()[i];
    double y = v;
    switch (act.kind) {
      case K::relu: y = v > 0 ? v : 0.0; break;
      case K::elu: y = v > 0 ? v : std::expm1(v); break;
      case K::leaky_relu: y = v > 0 ? v : slope * v; break;
      case K::sigmoid: y = detail::stable_sigmoid(v); break;
      case K::tanh: y = std::tanh(v); break;
      case K::identity: break;
    }
    out.data()[i] = y;
  }
  const std::size_t ix = x.id();
  return x.tape().push(std::move(out), x.requires_grad(), [ix, act](Tape& t, const Matrix& g) {
    const Matrix& in = t.value(ix);
    Matrix d(in.rows(), in.cols());
    for (Index i = 0; i < in.size(); ++i) {
      const double v = in.data()[i];
      double dv = 1.0;
      switch (act.kind) {
        case K::relu: dv = v > 0 ? 1.0 : 0.0; break;
        case K::elu: dv = v > 0 ? 1.0 : std::exp(v); break;
        case K::leaky_relu: dv = v > 0 ? 1.0 : act.slope; break;
        case K::sigmoid: {
          const double s = detail::stable_sigmoid(v);
          dv = s * (1.0 - s);
          break;
        }
        case K::tanh: {
          const double th = std::tanh(v);
          dv = 1.0 - th * th;
          break;
        }
        case K::identity: break;
      }
      d.data()[i] = dv * g.data()[i];
    }
    t.accumulate(ix, d);
  });
}

// log(sigmoid(x)) = -softplus(-x), evaluated without overflow.
inline Var log_sigmoid(Var x) {
  const Matrix& in = x.value();
  Matrix out(in.rows(), in.cols());
  for (Index i = 0; i < in.size(); ++i) {
    const double v = in.data()[i];
    out.data()[i] = v >= 0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v));
  }
  const std::size_t ix = x.id();
  return x.tape().push(std::move(out), x.requires_grad(), [ix](Tape& t, const Matrix& g) {
    const Matrix& in = t.value(ix);
    Matrix d(in.rows(), in.cols());
    for (Index i = 0; i < in.size(); ++i) d.data()[i] = g.data()[i] * detail::stable_sigmoid(-in.data()[i]);
    t.accumulate(ix, d);
  });
}

// ---------------------------------------------------------------------------
// Reductions and losses

inline Var sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  const std::size_t ix = x.id();
  const Index r = x.rows(), c = x.cols();
  return x.tape().push(std::move(out), x.requires_grad(), [ix, r, c](Tape& t, const Matrix& g) {
    t.accumulate(ix, Matrix::Constant(r, c, g(0, 0)));
  });
}

inline Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

// Sum of mask-selected entries divided by the number selected; a constant 0
// when the mask selects nothing.
inline Var masked_mean(Var x, const Matrix& mask) {
  detail::require_same_shape(x.value(), mask, "masked_mean");
  const double count = (mask.array() != 0.0).cast<double>().sum();
  Matrix out(1, 1);
  if (count == 0.0) {
    out(0, 0) = 0.0;
    return x.tape().constant(std::move(out));
  }
  Matrix selector = (mask.array() != 0.0).cast<double>().matrix() / count;
  out(0, 0) = x.value().cwiseProduct(selector).sum();
  const std::size_t ix = x.id();
  return x.tape().push(std::move(out), x.requires_grad(),
                       [ix, selector = std::move(selector)](Tape& t, const Matrix& g) {
                         t.accumulate(ix, selector * g(0, 0));
                       });
}

inline Var abs_sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().cwiseAbs().sum();
  const std::size_t ix = x.id();
  return x.tape().push(std::move(out), x.requires_grad(), [ix](Tape& t, const Matrix& g) {
    t.accumulate(ix, t.value(ix).array().sign().matrix() * g(0, 0));
  });
}

inline Var squared_sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().squaredNorm();
  const std::size_t ix = x.id();
  return x.tape().push(std::move(out), x.requires_grad(), [ix](Tape& t, const Matrix& g) {
    t.accumulate(ix, t.value(ix) * (2.0 * g(0, 0)));
  });
}

// Row-wise softmax restricted to entries where mask != 0; masked entries are
// exactly 0. Throws if a row has no unmasked entry.
inline Var softmax_rows(Var x, const Matrix& mask) {
  detail::require_same_shape(x.value(), mask, "softmax_rows");
  const Matrix& in = x.value();
  Matrix out = Matrix::Zero(in.rows(), in.cols());
  for (Index r = 0; r < in.rows(); ++r) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < in.cols(); ++c) {
      if (mask(r, c) != 0.0) row_max = std::max(row_max, in(r, c));
    }
    if (row_max == -std::numeric_limits<double>::infinity()) {
      throw Error("softmax_rows: row " + std::to_string(r) + " is fully masked");
    }
    double total = 0.0;
    for (Index c = 0; c < in.cols(); ++c) {
      if (mask(r, c) != 0.0) {
        out(r, c) = std::exp(in(r, c) - row_max);
        total += out(r, c);
      }
    }
    out.row(r) /= total;
  }
  const std::size_t ix = x.id();
  const std::size_t self = x.tape().size();
  return x.tape().push(std::move(out), x.requires_grad(), [ix, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(self);
    // dx = y * (g - <g, y>_row); masked entries have y = 0 and get no gradient.
    const Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
    Matrix d = y.cwiseProduct(g - dots.replicate(1, g.cols()));
    t.accumulate(ix, d);
  });
}

inline Var softmax_rows(Var x) { return softmax_rows(x, Matrix::Ones(x.rows(), x.cols())); }

// Mean negative log-softmax of the true class per row.
inline Var cross_entropy(Var logits, std::span<const int> labels) {
  const Matrix& z = logits.value();
  if (static_cast<Index>(labels.size()) != z.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + shape_str(z));
  }
  const Index n = z.rows(), k = z.cols();
  Matrix probs(n, k);
  double total = 0.0;
  for (Index r = 0; r < n; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= k) throw Error("cross_entropy: label " + std::to_string(y) + " out of range");
    const double m = z.row(r).maxCoeff();
    const double lse = m + std::log((z.row(r).array() - m).exp().sum());
    total += lse - z(r, y);
    probs.row(r) = (z.row(r).array() - lse).exp();
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(n);
  const std::size_t ix = logits.id();
  std::vector<int> ys(labels.begin(), labels.end());
  return logits.tape().push(std::move(out), logits.requires_grad(),
                            [ix, probs = std::move(probs), ys = std::move(ys)](Tape& t, const Matrix& g) {
                              Matrix d = probs;
                              for (std::size_t r = 0; r < ys.size(); ++r) d(static_cast<Index>(r), ys[r]) -= 1.0;
                              d *= g(0, 0) / static_cast<double>(ys.size());
                              t.accumulate(ix, d);
                            });
}

// Mean squared elementwise difference against a constant target.
inline Var mse(Var pred, const Matrix& target) {
  detail::require_same_shape(pred.value(), target, "mse");
  Matrix diff = pred.value() - target;
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / static_cast<double>(diff.size());
  const std::size_t ip = pred.id();
  return pred.tape().push(std::move(out), pred.requires_grad(),
                          [ip, diff = std::move(diff)](Tape& t, const Matrix& g) {
                            t.accumulate(ip, diff * (2.0 * g(0, 0) / static_cast<double>(diff.size())));
                          });
}

// ---------------------------------------------------------------------------
// Gradient checking

// Worst relative error between analytic gradients and central differences
// (f(θ+ε) - f(θ-ε)) / 2ε over every entry of every parameter. Relative error
// is |a - n| / max(|a|, |n|, 1e-6); the floor keeps exact zeros comparable.
inline double grad_check(const std::function<Var(Tape&)>& loss_fn, std::span<Parameter* const> params,
                         double epsilon = 1e-5) {
  if (!(epsilon > 0.0)) throw UsageError("grad_check: epsilon must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss_fn(tape));
  }
  auto evaluate = [&] {
    Tape tape;
    return loss_fn(tape).scalar();
  };
  double worst = 0.0;
  for (Parameter* p : params) {
    for (Index i = 0; i < p->value.size(); ++i) {
      double& entry = p->value.data()[i];
      const double saved = entry;
      entry = saved + epsilon;
      const double plus = evaluate();
      entry = saved - epsilon;
      const double minus = evaluate();
      entry = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Parameter serialization
//
// Text container, version 1:
//   tabgnn-params 1
//   <record count>
//   then per record: "<name> <rows> <cols>" followed by <rows> lines of
//   <cols> space-separated values printed with 17 significant digits.
// Names must not contain whitespace.

inline constexpr int kParamFormatVersion = 1;

inline void write_parameters(std::ostream& out, std::span<const Parameter* const> params) {
  out << "tabgnn-params " << kParamFormatVersion << '\n' << params.size() << '\n';
  out.precision(17);
  for (const Parameter* p : params) {
    if (p->name.empty() || p->name.find_first_of(" \t\n") != std::string::npos) {
      throw UsageError("parameter name '" + p->name + "' is empty or contains whitespace");
    }
    out << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
    for (Index r = 0; r < p->value.rows(); ++r) {
      for (Index c = 0; c < p->value.cols(); ++c) out << (c ? " " : "") << p->value(r, c);
      out << '\n';
    }
  }
}

// Reads records written by write_parameters into same-named parameters,
// checking that names, order and shapes match.
inline void read_parameters(std::istream& in, std::span<Parameter* const> params) {
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version) || magic != "tabgnn-params") throw DataError("not a parameter file");
  if (version != kParamFormatVersion) throw DataError("unsupported parameter file version " + std::to_string(version));
  if (!(in >> count) || count != params.size()) throw DataError("parameter count mismatch");
  for (Parameter* p : params) {
    std::string name;
    Index rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols)) throw DataError("truncated parameter file");
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols()) {
      throw DataError("parameter record '" + name + "' does not match '" + p->name + "' " + shape_str(p->value));
    }
    for (Index i = 0; i < p->value.size(); ++i) {
      if (!(in >> p->value.data()[i])) throw DataError("truncated values for '" + name + "'");
    }
  }
}

}  // namespace tabgnn
