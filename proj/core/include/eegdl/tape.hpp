#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "eegdl/error.hpp"
#include "eegdl/rng.hpp"
#include "eegdl/tensor.hpp"

namespace eegdl {

using Var = int;

/// Append-only record of a forward computation. Every op pushes one node;
/// nodes are topologically ordered by construction, so backward() is a single
/// reverse sweep that visits each node once and accumulates gradients at
/// fan-out points.
template <typename T>
class Tape {
 public:
  struct Node {
    Tensor<T> value;
    // Receives this node's output gradient and adds into parent gradients.
    std::function<void(Tape&, const Tensor<T>&)> backward;
    bool needs_grad = false;
  };

  Var leaf(Tensor<T> value, bool needs_grad = false) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
  }

  const Tensor<T>& value(Var v) const { return nodes_[v].value; }
  std::size_t node_count() const { return nodes_.size(); }

  Var add(Var a, Var b) {
    Tensor<T> out = eegdl::add(value(a), value(b));
    return push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Tensor<T>& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }

  Var sub(Var a, Var b) {
    Tensor<T> out = eegdl::sub(value(a), value(b));
    return push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Tensor<T>& g) {
      t.accumulate(a, g);
      t.accumulate(b, eegdl::scale(g, T(-1)));
    });
  }

  Var mul(Var a, Var b) {
    Tensor<T> out = hadamard(value(a), value(b));
    return push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Tensor<T>& g) {
      t.accumulate(a, hadamard(g, t.value(b)));
      t.accumulate(b, hadamard(g, t.value(a)));
    });
  }

  Var scale(Var a, T s) {
    Tensor<T> out = eegdl::scale(value(a), s);
    return push(std::move(out), any_grad({a}), [a, s](Tape& t, const Tensor<T>& g) {
      t.accumulate(a, eegdl::scale(g, s));
    });
  }

  Var matmul(Var a, Var b) {
    Tensor<T> out = eegdl::matmul(value(a), value(b));
    return push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Tensor<T>& g) {
      // dA = dC B^T, dB = A^T dC
      t.accumulate(a, matmul_nt(g, t.value(b)));
      t.accumulate(b, matmul_tn(t.value(a), g));
    });
  }

  /// x: [B x F], bias: [F]; adds bias to every row.
  Var add_rowvec(Var x, Var bias) {
    const Tensor<T>& xv = value(x);
    const Tensor<T>& bv = value(bias);
    require_rank2(xv, "add_rowvec");
    if (bv.rank() != 1 || bv.dim(0) != xv.dim(1))
      throw runtime_error("ShapeMismatch",
                          "add_rowvec: " + xv.shape_str() + " vs " + bv.shape_str());
    Tensor<T> out(xv.shape());
    for (std::size_t r = 0; r < xv.dim(0); ++r)
      for (std::size_t c = 0; c < xv.dim(1); ++c) out(r, c) = xv(r, c) + bv.at(c);
    return push(std::move(out), any_grad({x, bias}), [x, bias](Tape& t, const Tensor<T>& g) {
      t.accumulate(x, g);
      Tensor<T> gb({g.dim(1)});
      for (std::size_t r = 0; r < g.dim(0); ++r)
        for (std::size_t c = 0; c < g.dim(1); ++c) gb.at(c) += g(r, c);
      t.accumulate(bias, gb);
    });
  }

  Var sigmoid(Var a) {
    // Stable form: never exponentiates a large positive argument.
    Tensor<T> out = eegdl::map(value(a), [](T x) {
      if (x >= 0) return T(1) / (T(1) + std::exp(-x));
      T e = std::exp(x);
      return e / (T(1) + e);
    });
    Var self = push(std::move(out), any_grad({a}), nullptr);
    nodes_[self].backward = [a, self](Tape& t, const Tensor<T>& g) {
      const Tensor<T>& s = t.value(self);
      Tensor<T> d(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i)
        d.at(i) = g.at(i) * s.at(i) * (T(1) - s.at(i));
      t.accumulate(a, d);
    };
    return self;
  }

  Var tanh(Var a) {
    Tensor<T> out = eegdl::map(value(a), [](T x) { return std::tanh(x); });
    Var self = push(std::move(out), any_grad({a}), nullptr);
    nodes_[self].backward = [a, self](Tape& t, const Tensor<T>& g) {
      const Tensor<T>& y = t.value(self);
      Tensor<T> d(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i)
        d.at(i) = g.at(i) * (T(1) - y.at(i) * y.at(i));
      t.accumulate(a, d);
    };
    return self;
  }

  Var relu(Var a) {
    Tensor<T> out = eegdl::map(value(a), [](T x) { return x > 0 ? x : T(0); });
    return push(std::move(out), any_grad({a}), [a](Tape& t, const Tensor<T>& g) {
      const Tensor<T>& x = t.value(a);
      Tensor<T> d(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i)
        d.at(i) = x.at(i) > 0 ? g.at(i) : T(0);  // subgradient 0 at x == 0
      t.accumulate(a, d);
    });
  }

  /// Concatenate two rank-2 tensors. axis 0 stacks rows, axis 1 juxtaposes
  /// columns (the feature-axis concat used by the bidirectional layers).
  Var concat(Var a, Var b, int axis) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    require_rank2(av, "concat");
    require_rank2(bv, "concat");
    if (axis != 0 && axis != 1)
      throw runtime_error("ShapeMismatch", "concat: axis must be 0 or 1");
    std::size_t other = axis == 0 ? 1 : 0;
    if (av.dim(other) != bv.dim(other))
      throw runtime_error("ShapeMismatch",
                          "concat: " + av.shape_str() + " vs " + bv.shape_str());
    std::vector<std::size_t> shape = av.shape();
    shape[axis] += bv.dim(axis);
    Tensor<T> out(shape);
    if (axis == 1) {
      for (std::size_t r = 0; r < av.dim(0); ++r) {
        for (std::size_t c = 0; c < av.dim(1); ++c) out(r, c) = av(r, c);
        for (std::size_t c = 0; c < bv.dim(1); ++c) out(r, av.dim(1) + c) = bv(r, c);
      }
    } else {
      std::copy(av.data().begin(), av.data().end(), out.data().begin());
      std::copy(bv.data().begin(), bv.data().end(), out.data().begin() + av.size());
    }
    std::size_t na = av.dim(axis);
    return push(std::move(out), any_grad({a, b}),
                [a, b, axis, na](Tape& t, const Tensor<T>& g) {
                  const Tensor<T>& av2 = t.value(a);
                  const Tensor<T>& bv2 = t.value(b);
                  Tensor<T> ga(av2.shape()), gb(bv2.shape());
                  if (axis == 1) {
                    for (std::size_t r = 0; r < av2.dim(0); ++r) {
                      for (std::size_t c = 0; c < av2.dim(1); ++c) ga(r, c) = g(r, c);
                      for (std::size_t c = 0; c < bv2.dim(1); ++c) gb(r, c) = g(r, na + c);
                    }
                  } else {
                    std::copy(g.data().begin(), g.data().begin() + ga.size(), ga.data().begin());
                    std::copy(g.data().begin() + ga.size(), g.data().end(), gb.data().begin());
                  }
                  t.accumulate(a, ga);
                  t.accumulate(b, gb);
                });
  }

  /// Inverted dropout: training mode zeroes entries with probability `rate`
  /// and rescales survivors by 1/(1-rate); inference is an identity.
  Var dropout(Var a, double rate, bool training, Rng& rng) {
    if (rate < 0 || rate >= 1)
      throw runtime_error("BadRate", "dropout rate must be in [0,1)");
    if (!training || rate == 0) return a;
    const Tensor<T>& x = value(a);
    std::vector<std::uint8_t> keep(x.size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& k : keep) k = u(rng) >= rate ? 1 : 0;
    T inv = T(1.0 / (1.0 - rate));
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
      out.at(i) = keep[i] ? x.at(i) * inv : T(0);
    return push(std::move(out), any_grad({a}),
                [a, keep = std::move(keep), inv](Tape& t, const Tensor<T>& g) {
                  Tensor<T> d(g.shape());
                  for (std::size_t i = 0; i < g.size(); ++i)
                    d.at(i) = keep[i] ? g.at(i) * inv : T(0);
                  t.accumulate(a, d);
                });
  }

  /// Row-wise softmax with max subtraction. Full Jacobian backward; training
  /// uses the fused softmax_cross_entropy instead.
  Var softmax(Var a) {
    Tensor<T> out = softmax_value(value(a));
    Var self = push(std::move(out), any_grad({a}), nullptr);
    nodes_[self].backward = [a, self](Tape& t, const Tensor<T>& g) {
      const Tensor<T>& p = t.value(self);
      Tensor<T> d(p.shape());
      for (std::size_t r = 0; r < p.dim(0); ++r) {
        T dot = 0;
        for (std::size_t c = 0; c < p.dim(1); ++c) dot += g(r, c) * p(r, c);
        for (std::size_t c = 0; c < p.dim(1); ++c)
          d(r, c) = p(r, c) * (g(r, c) - dot);
      }
      t.accumulate(a, d);
    };
    return self;
  }

  /// Mean cross-entropy of given probability rows against one-hot labels.
  Var cross_entropy(Var probs, const Tensor<T>& labels) {
    const Tensor<T>& p = value(probs);
    check_labels(p, labels);
    const T eps = T(1e-12);
    std::size_t batch = p.dim(0);
    T loss = 0;
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t c = 0; c < p.dim(1); ++c)
        if (labels(r, c) > 0)
          loss -= labels(r, c) * std::log(std::clamp(p(r, c), eps, T(1)));
    loss /= static_cast<T>(batch);
    return push(Tensor<T>::scalar(loss), any_grad({probs}),
                [probs, labels, eps, batch](Tape& t, const Tensor<T>& g) {
                  const Tensor<T>& p2 = t.value(probs);
                  Tensor<T> d(p2.shape());
                  T gs = g.at(0) / static_cast<T>(batch);
                  for (std::size_t i = 0; i < p2.size(); ++i) {
                    T pc = std::clamp(p2.at(i), eps, T(1));
                    d.at(i) = -gs * labels.at(i) / pc;
                  }
                  t.accumulate(probs, d);
                });
  }

  /// Fused softmax + mean cross-entropy over logits; gradient is (p - y)/B.
  Var softmax_cross_entropy(Var logits, const Tensor<T>& labels) {
    const Tensor<T>& z = value(logits);
    check_labels(z, labels);
    Tensor<T> p = softmax_value(z);
    std::size_t batch = z.dim(0);
    const T eps = T(1e-12);
    T loss = 0;
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t c = 0; c < z.dim(1); ++c)
        if (labels(r, c) > 0)
          loss -= labels(r, c) * std::log(std::clamp(p(r, c), eps, T(1)));
    loss /= static_cast<T>(batch);
    return push(Tensor<T>::scalar(loss), any_grad({logits}),
                [logits, labels, p = std::move(p), batch](Tape& t, const Tensor<T>& g) {
                  Tensor<T> d(p.shape());
                  T gs = g.at(0) / static_cast<T>(batch);
                  for (std::size_t i = 0; i < p.size(); ++i)
                    d.at(i) = gs * (p.at(i) - labels.at(i));
                  t.accumulate(logits, d);
                });
  }

  Var sum_all(Var a) {
    T s = eegdl::sum(value(a));
    return push(Tensor<T>::scalar(s), any_grad({a}), [a](Tape& t, const Tensor<T>& g) {
      t.accumulate(a, Tensor<T>::full(t.value(a).shape(), g.at(0)));
    });
  }

  /// Reverse sweep from a scalar loss. Returns one gradient tensor per node;
  /// leaves unreachable from the loss keep zero gradients.
  std::vector<Tensor<T>> backward(Var loss) {
    if (value(loss).size() != 1)
      throw runtime_error("NonScalarLoss",
                          "backward requires a scalar loss, got " + value(loss).shape_str());
    grads_.assign(nodes_.size(), Tensor<T>());
    grads_[loss] = Tensor<T>::scalar(T(1));
    for (Var v = loss; v >= 0; --v) {
      if (grads_[v].size() == 0) continue;
      if (nodes_[v].backward) nodes_[v].backward(*this, grads_[v]);
    }
    std::vector<Tensor<T>> out(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (grads_[i].size() > 0)
        out[i] = std::move(grads_[i]);
      else
        out[i] = Tensor<T>(nodes_[i].value.shape());
    }
    grads_.clear();
    return out;
  }

  static Tensor<T> softmax_value(const Tensor<T>& z) {
    require_rank2(z, "softmax");
    Tensor<T> p(z.shape());
    for (std::size_t r = 0; r < z.dim(0); ++r) {
      T mx = z(r, 0);
      for (std::size_t c = 1; c < z.dim(1); ++c) mx = std::max(mx, z(r, c));
      T denom = 0;
      for (std::size_t c = 0; c < z.dim(1); ++c) {
        p(r, c) = std::exp(z(r, c) - mx);
        denom += p(r, c);
      }
      for (std::size_t c = 0; c < z.dim(1); ++c) p(r, c) /= denom;
    }
    return p;
  }

 private:
  void check_labels(const Tensor<T>& p, const Tensor<T>& labels) {
    require_rank2(p, "cross_entropy");
    if (!p.same_shape(labels))
      throw runtime_error("ShapeMismatch", "cross_entropy: probs " + p.shape_str() +
                                               " vs labels " + labels.shape_str());
  }

  bool any_grad(std::initializer_list<Var> vars) const {
    for (Var v : vars)
      if (nodes_[v].needs_grad) return true;
    return false;
  }

  Var push(Tensor<T> value, bool needs_grad,
           std::function<void(Tape&, const Tensor<T>&)> bwd) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.backward = std::move(bwd);
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
  }

  void accumulate(Var v, const Tensor<T>& g) {
    if (!nodes_[v].needs_grad) return;
    if (grads_[v].size() == 0)
      grads_[v] = g;
    else
      add_inplace(grads_[v], g);
  }

  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;
};

}  // namespace eegdl
