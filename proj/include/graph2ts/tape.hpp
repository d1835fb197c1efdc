#pragma once

// Reverse-mode automatic differentiation over Tensor2 values.
//
// Each op appends a node holding its forward value and a backward rule that
// accumulates into the gradients of its inputs. Gradients add, so a value
// used twice receives both contributions. Op outputs are checked for
// non-finite entries as they are produced.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "graph2ts/tensor.hpp"

namespace graph2ts {

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Var leaf(Tensor2 value, bool needs_grad = true) {
    return push("leaf", std::move(value), needs_grad, nullptr);
  }
  Var constant(Tensor2 value) { return leaf(std::move(value), false); }

  /// Leaf that reads `value` in place; it must outlive the tape and stay unchanged while in use.
  Var view(const Tensor2& value, bool needs_grad = true) {
    if (!all_finite(value)) throw std::runtime_error("leaf: non-finite output");
    nodes_.push_back(Node{Tensor2{}, Tensor2{}, needs_grad, nullptr, &value});
    return Var{nodes_.size() - 1};
  }

  Var push(const char* op, Tensor2 value, bool needs_grad, BackwardFn backward) {
    if (!all_finite(value)) throw std::runtime_error(std::string(op) + ": non-finite output");
    nodes_.push_back(Node{std::move(value), Tensor2{}, needs_grad, std::move(backward)});
    return Var{nodes_.size() - 1};
  }

  const Tensor2& value(Var v) const { return nodes_.at(v.id).get(); }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

  /// Gradient accumulated so far; zeros if the node never received one.
  Tensor2 grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    const Tensor2& val = n.get();
    if (n.grad.size() == val.size() && n.grad.size() > 0) return n.grad;
    return Tensor2(val.rows, val.cols, 0.0);
  }

  Tensor2& grad_ref(std::size_t id) {
    Node& n = nodes_[id];
    const Tensor2& val = n.get();
    if (n.grad.size() != val.size() || n.grad.rows != val.rows) n.grad = Tensor2(val.rows, val.cols, 0.0);
    return n.grad;
  }
  Tensor2& grad_ref(Var v) { return grad_ref(v.id); }
  const Tensor2& value(std::size_t id) const { return nodes_[id].get(); }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  bool has_grad(std::size_t id) const { return nodes_[id].grad.size() > 0; }

  /// Seeds d(output)/d(output) = 1 and runs every backward rule in reverse order.
  void backward(Var output) {
    const Tensor2& out = value(output);
    if (out.size() != 1) throw std::logic_error("Tape::backward: output must be a scalar");
    grad_ref(output).data[0] += 1.0;
    for (std::size_t i = output.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.needs_grad && n.grad.size() > 0) n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;
    bool needs_grad = false;
    BackwardFn backward;
    const Tensor2* external = nullptr;
    const Tensor2& get() const { return external ? *external : value; }
  };
  std::vector<Node> nodes_;
};

namespace ops {

/// y = x·W + b, with b a 1×m row broadcast over the batch.
inline Var affine(Tape& t, Var x, Var w, Var b) {
  const Tensor2& xv = t.value(x);
  const Tensor2& wv = t.value(w);
  const Tensor2& bv = t.value(b);
  if (xv.cols != wv.rows || bv.rows != 1 || bv.cols != wv.cols) {
    throw std::invalid_argument("affine: shape mismatch " + shape_str(xv) + " * " + shape_str(wv) + " + " +
                                shape_str(bv));
  }
  Tensor2 y(xv.rows, wv.cols);
  for (std::size_t r = 0; r < y.rows; ++r) std::copy(bv.data.begin(), bv.data.end(), y.row(r).begin());
  kernel::gemm_nn(xv, wv, y);
  const bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  return t.push("affine", std::move(y), ng, [x, w, b](Tape& tp, std::size_t self) {
    const Tensor2& gy = tp.grad_ref(self);
    if (tp.needs_grad(x)) kernel::gemm_nt(gy, tp.value(w), tp.grad_ref(x));
    if (tp.needs_grad(w)) kernel::gemm_tn(tp.value(x), gy, tp.grad_ref(w));
    if (tp.needs_grad(b)) {
      Tensor2& gb = tp.grad_ref(b);
      for (std::size_t r = 0; r < gy.rows; ++r) {
        for (std::size_t c = 0; c < gy.cols; ++c) gb.data[c] += gy(r, c);
      }
    }
  });
}

/// max(0, x); the subgradient at 0 is 0.
inline Var relu(Tape& t, Var x) {
  Tensor2 y = t.value(x);
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return t.push("relu", std::move(y), t.needs_grad(x), [x](Tape& tp, std::size_t self) {
    const Tensor2& gy = tp.grad_ref(self);
    const Tensor2& xv = tp.value(x);
    Tensor2& gx = tp.grad_ref(x);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      if (xv.data[i] > 0.0) gx.data[i] += gy.data[i];
    }
  });
}

inline constexpr double kNormEps = 1e-12;

/// Divides each row by its Euclidean norm.
inline Var l2_normalize_rows(Tape& t, Var x) {
  const Tensor2& xv = t.value(x);
  Tensor2 y(xv.rows, xv.cols);
  std::vector<double> norms(xv.rows);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    double ss = 0.0;
    for (double v : xv.row(r)) ss += v * v;
    const double n = std::sqrt(ss);
    if (!(n > kNormEps)) throw std::runtime_error("l2_normalize_rows: near-zero row " + std::to_string(r));
    norms[r] = n;
    for (std::size_t c = 0; c < xv.cols; ++c) y(r, c) = xv(r, c) / n;
  }
  return t.push("l2_normalize_rows", std::move(y), t.needs_grad(x),
                [x, norms = std::move(norms)](Tape& tp, std::size_t self) {
                  const Tensor2& gy = tp.grad_ref(self);
                  const Tensor2& yv = tp.value(self);
                  Tensor2& gx = tp.grad_ref(x);
                  for (std::size_t r = 0; r < gy.rows; ++r) {
                    double dot = 0.0;
                    for (std::size_t c = 0; c < gy.cols; ++c) dot += yv(r, c) * gy(r, c);
                    for (std::size_t c = 0; c < gy.cols; ++c) {
                      gx(r, c) += (gy(r, c) - yv(r, c) * dot) / norms[r];
                    }
                  }
                });
}

inline Var concat_cols(Tape& t, Var a, Var b) {
  const Tensor2& av = t.value(a);
  const Tensor2& bv = t.value(b);
  if (av.rows != bv.rows) throw std::invalid_argument("concat_cols: row mismatch");
  Tensor2 y(av.rows, av.cols + bv.cols);
  for (std::size_t r = 0; r < av.rows; ++r) {
    std::copy(av.row(r).begin(), av.row(r).end(), y.row(r).begin());
    std::copy(bv.row(r).begin(), bv.row(r).end(), y.row(r).begin() + static_cast<std::ptrdiff_t>(av.cols));
  }
  const std::size_t split = av.cols;
  return t.push("concat_cols", std::move(y), t.needs_grad(a) || t.needs_grad(b),
                [a, b, split](Tape& tp, std::size_t self) {
                  const Tensor2& gy = tp.grad_ref(self);
                  for (std::size_t r = 0; r < gy.rows; ++r) {
                    if (tp.needs_grad(a)) {
                      Tensor2& ga = tp.grad_ref(a);
                      for (std::size_t c = 0; c < split; ++c) ga(r, c) += gy(r, c);
                    }
                    if (tp.needs_grad(b)) {
                      Tensor2& gb = tp.grad_ref(b);
                      for (std::size_t c = split; c < gy.cols; ++c) gb(r, c - split) += gy(r, c);
                    }
                  }
                });
}

/// Columns [begin, end).
inline Var slice_cols(Tape& t, Var x, std::size_t begin, std::size_t end) {
  const Tensor2& xv = t.value(x);
  if (begin > end || end > xv.cols) throw std::invalid_argument("slice_cols: bad range");
  Tensor2 y(xv.rows, end - begin);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    for (std::size_t c = begin; c < end; ++c) y(r, c - begin) = xv(r, c);
  }
  return t.push("slice_cols", std::move(y), t.needs_grad(x), [x, begin](Tape& tp, std::size_t self) {
    const Tensor2& gy = tp.grad_ref(self);
    Tensor2& gx = tp.grad_ref(x);
    for (std::size_t r = 0; r < gy.rows; ++r) {
      for (std::size_t c = 0; c < gy.cols; ++c) gx(r, c + begin) += gy(r, c);
    }
  });
}

/// Elementwise clamp into [lo, hi]; gradient is zero where the clamp is active.
inline Var clamp(Tape& t, Var x, double lo, double hi) {
  Tensor2 y = t.value(x);
  for (double& v : y.data) v = std::clamp(v, lo, hi);
  return t.push("clamp", std::move(y), t.needs_grad(x), [x, lo, hi](Tape& tp, std::size_t self) {
    const Tensor2& gy = tp.grad_ref(self);
    const Tensor2& xv = tp.value(x);
    Tensor2& gx = tp.grad_ref(x);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      if (xv.data[i] > lo && xv.data[i] < hi) gx.data[i] += gy.data[i];
    }
  });
}

/// z = mu + exp(logvar / 2) * eps, eps held fixed.
inline Var reparameterize(Tape& t, Var mu, Var logvar, const Tensor2& eps) {
  const Tensor2& mv = t.value(mu);
  const Tensor2& lv = t.value(logvar);
  if (!mv.same_shape(lv) || !mv.same_shape(eps)) throw std::invalid_argument("reparameterize: shape mismatch");
  Tensor2 z(mv.rows, mv.cols);
  for (std::size_t i = 0; i < z.size(); ++i) z.data[i] = mv.data[i] + std::exp(0.5 * lv.data[i]) * eps.data[i];
  return t.push("reparameterize", std::move(z), t.needs_grad(mu) || t.needs_grad(logvar),
                [mu, logvar, eps](Tape& tp, std::size_t self) {
                  const Tensor2& gz = tp.grad_ref(self);
                  if (tp.needs_grad(mu)) {
                    Tensor2& gm = tp.grad_ref(mu);
                    for (std::size_t i = 0; i < gz.size(); ++i) gm.data[i] += gz.data[i];
                  }
                  if (tp.needs_grad(logvar)) {
                    const Tensor2& lv = tp.value(logvar);
                    Tensor2& gl = tp.grad_ref(logvar);
                    for (std::size_t i = 0; i < gz.size(); ++i) {
                      gl.data[i] += gz.data[i] * eps.data[i] * 0.5 * std::exp(0.5 * lv.data[i]);
                    }
                  }
                });
}

/// Stable ascending argsort of a span; ties keep their original order.
inline std::vector<std::size_t> argsort(std::span<const double> x) {
  std::vector<std::size_t> perm(x.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  return perm;
}

/// Sorts every row ascending. Gradients scatter back through each row's permutation.
inline Var sort_rows(Tape& t, Var x) {
  const Tensor2& xv = t.value(x);
  Tensor2 y(xv.rows, xv.cols);
  std::vector<std::size_t> perms;
  perms.reserve(xv.size());
  for (std::size_t r = 0; r < xv.rows; ++r) {
    auto p = argsort(xv.row(r));
    for (std::size_t k = 0; k < p.size(); ++k) y(r, k) = xv(r, p[k]);
    perms.insert(perms.end(), p.begin(), p.end());
  }
  return t.push("sort_rows", std::move(y), t.needs_grad(x), [x, perms = std::move(perms)](Tape& tp, std::size_t self) {
    const Tensor2& gy = tp.grad_ref(self);
    Tensor2& gx = tp.grad_ref(x);
    for (std::size_t r = 0; r < gy.rows; ++r) {
      for (std::size_t k = 0; k < gy.cols; ++k) gx(r, perms[r * gy.cols + k]) += gy(r, k);
    }
  });
}

/// y = a·bᵀ
inline Var matmul_nt(Tape& t, Var a, Var b) {
  const Tensor2& av = t.value(a);
  const Tensor2& bv = t.value(b);
  if (av.cols != bv.cols) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  Tensor2 y(av.rows, bv.rows);
  kernel::gemm_nt(av, bv, y);
  return t.push("matmul_nt", std::move(y), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& tp, std::size_t self) {
    const Tensor2& gy = tp.grad_ref(self);
    if (tp.needs_grad(a)) kernel::gemm_nn(gy, tp.value(b), tp.grad_ref(a));
    if (tp.needs_grad(b)) kernel::gemm_tn(gy, tp.value(a), tp.grad_ref(b));
  });
}

/// y = x · exp(-s) for a scalar s (division by a log-parameterized temperature).
inline Var scale_exp_neg(Tape& t, Var x, Var s) {
  if (t.value(s).size() != 1) throw std::invalid_argument("scale_exp_neg: scale must be a scalar");
  const double k = std::exp(-t.value(s).item());
  Tensor2 y = t.value(x);
  for (double& v : y.data) v *= k;
  return t.push("scale_exp_neg", std::move(y), t.needs_grad(x) || t.needs_grad(s),
                [x, s, k](Tape& tp, std::size_t self) {
                  const Tensor2& gy = tp.grad_ref(self);
                  const Tensor2& yv = tp.value(self);
                  if (tp.needs_grad(x)) {
                    Tensor2& gx = tp.grad_ref(x);
                    for (std::size_t i = 0; i < gy.size(); ++i) gx.data[i] += gy.data[i] * k;
                  }
                  if (tp.needs_grad(s)) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < gy.size(); ++i) acc += gy.data[i] * yv.data[i];
                    tp.grad_ref(s).data[0] -= acc;
                  }
                });
}

inline Var transpose(Tape& t, Var x) {
  const Tensor2& xv = t.value(x);
  Tensor2 y(xv.cols, xv.rows);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    for (std::size_t c = 0; c < xv.cols; ++c) y(c, r) = xv(r, c);
  }
  return t.push("transpose", std::move(y), t.needs_grad(x), [x](Tape& tp, std::size_t self) {
    const Tensor2& gy = tp.grad_ref(self);
    Tensor2& gx = tp.grad_ref(x);
    for (std::size_t r = 0; r < gy.rows; ++r) {
      for (std::size_t c = 0; c < gy.cols; ++c) gx(c, r) += gy(r, c);
    }
  });
}

/// Mean over rows of softmax cross-entropy with target class = row index.
inline Var cross_entropy_diag(Tape& t, Var logits) {
  const Tensor2& s = t.value(logits);
  if (s.rows != s.cols) throw std::invalid_argument("cross_entropy_diag: logits must be square");
  const std::size_t n = s.rows;
  Tensor2 probs(n, n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = s.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      probs(i, j) = std::exp(row[j] - mx);
      z += probs(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) probs(i, j) /= z;
    loss += mx + std::log(z) - row[i];
  }
  loss /= static_cast<double>(n);
  return t.push("cross_entropy_diag", Tensor2::scalar(loss), t.needs_grad(logits),
                [logits, probs = std::move(probs)](Tape& tp, std::size_t self) {
                  const double g = tp.grad_ref(self).item() / static_cast<double>(probs.rows);
                  Tensor2& gs = tp.grad_ref(logits);
                  for (std::size_t i = 0; i < probs.rows; ++i) {
                    for (std::size_t j = 0; j < probs.cols; ++j) {
                      gs(i, j) += g * (probs(i, j) - (i == j ? 1.0 : 0.0));
                    }
                  }
                });
}

/// Mean over all elements of (a - b)².
inline Var mse(Tape& t, Var a, Var b) {
  const Tensor2& av = t.value(a);
  const Tensor2& bv = t.value(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("mse: shape mismatch " + shape_str(av) + " vs " + shape_str(bv));
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += (av.data[i] - bv.data[i]) * (av.data[i] - bv.data[i]);
  const double n = static_cast<double>(av.size());
  return t.push("mse", Tensor2::scalar(acc / n), t.needs_grad(a) || t.needs_grad(b),
                [a, b, n](Tape& tp, std::size_t self) {
                  const double g = tp.grad_ref(self).item();
                  const Tensor2& av = tp.value(a);
                  const Tensor2& bv = tp.value(b);
                  if (tp.needs_grad(a)) {
                    Tensor2& ga = tp.grad_ref(a);
                    for (std::size_t i = 0; i < av.size(); ++i) ga.data[i] += g * 2.0 * (av.data[i] - bv.data[i]) / n;
                  }
                  if (tp.needs_grad(b)) {
                    Tensor2& gb = tp.grad_ref(b);
                    for (std::size_t i = 0; i < av.size(); ++i) gb.data[i] -= g * 2.0 * (av.data[i] - bv.data[i]) / n;
                  }
                });
}

/// Mean over rows of KL(N(mu, exp(logvar)) || N(0, I)).
inline Var kl_standard_normal(Tape& t, Var mu, Var logvar) {
  const Tensor2& mv = t.value(mu);
  const Tensor2& lv = t.value(logvar);
  if (!mv.same_shape(lv)) throw std::invalid_argument("kl_standard_normal: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < mv.size(); ++i) {
    acc += 0.5 * (mv.data[i] * mv.data[i] + std::exp(lv.data[i]) - 1.0 - lv.data[i]);
  }
  const double rows = static_cast<double>(mv.rows);
  return t.push("kl_standard_normal", Tensor2::scalar(acc / rows), t.needs_grad(mu) || t.needs_grad(logvar),
                [mu, logvar, rows](Tape& tp, std::size_t self) {
                  const double g = tp.grad_ref(self).item() / rows;
                  if (tp.needs_grad(mu)) {
                    const Tensor2& mv = tp.value(mu);
                    Tensor2& gm = tp.grad_ref(mu);
                    for (std::size_t i = 0; i < mv.size(); ++i) gm.data[i] += g * mv.data[i];
                  }
                  if (tp.needs_grad(logvar)) {
                    const Tensor2& lv = tp.value(logvar);
                    Tensor2& gl = tp.grad_ref(logvar);
                    for (std::size_t i = 0; i < lv.size(); ++i) gl.data[i] += g * 0.5 * (std::exp(lv.data[i]) - 1.0);
                  }
                });
}

inline Var sum(Tape& t, Var x) {
  const Tensor2& xv = t.value(x);
  const double s = std::accumulate(xv.data.begin(), xv.data.end(), 0.0);
  return t.push("sum", Tensor2::scalar(s), t.needs_grad(x), [x](Tape& tp, std::size_t self) {
    const double g = tp.grad_ref(self).item();
    for (double& v : tp.grad_ref(x).data) v += g;
  });
}

/// Σ w_i · s_i over scalar nodes.
inline Var weighted_sum(Tape& t, std::vector<std::pair<Var, double>> terms) {
  double acc = 0.0;
  bool ng = false;
  for (const auto& [v, w] : terms) {
    acc += w * t.value(v).item();
    ng = ng || t.needs_grad(v);
  }
  return t.push("weighted_sum", Tensor2::scalar(acc), ng, [terms = std::move(terms)](Tape& tp, std::size_t self) {
    const double g = tp.grad_ref(self).item();
    for (const auto& [v, w] : terms) {
      if (tp.needs_grad(v)) tp.grad_ref(v).data[0] += g * w;
    }
  });
}

}  // namespace ops
}  // namespace graph2ts
