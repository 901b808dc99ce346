#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "irst/errors.hpp"
#include "irst/nd.hpp"
#include "irst/random.hpp"

// Reverse-mode automatic differentiation on dense double tensors.
// The graph is rebuilt on every forward pass; parameters are long-lived
// leaf nodes whose gradients are accumulated in place.
namespace irst::ag {

struct Node {
  NdArray val;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != val.data.size()) grad.assign(val.data.size(), 0.0);
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  static Var param(NdArray a) {
    auto n = std::make_shared<Node>();
    n->val = std::move(a);
    n->requires_grad = true;
    n->ensure_grad();
    return Var(n);
  }
  static Var constant(NdArray a) {
    auto n = std::make_shared<Node>();
    n->val = std::move(a);
    return Var(n);
  }

  const NdArray& val() const { return n_->val; }
  NdArray& val() { return n_->val; }
  const Shape& shape() const { return n_->val.shape; }
  long numel() const { return n_->val.numel(); }
  std::vector<double>& grad() const { n_->ensure_grad(); return n_->grad; }
  const std::shared_ptr<Node>& node() const { return n_; }
  bool defined() const { return n_ != nullptr; }

  void zero_grad() const { if (n_) n_->grad.assign(n_->val.data.size(), 0.0); }

 private:
  std::shared_ptr<Node> n_;
};

namespace detail {

inline Var make_op(NdArray out, std::vector<Var> parents,
                   std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->val = std::move(out);
  for (auto& p : parents) {
    n->parents.push_back(p.node());
    if (p.node()->requires_grad) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->backward = std::move(backward);
    n->ensure_grad();
  }
  return Var(n);
}

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---- elementwise ----

inline Var add(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "add");
  NdArray out(a.shape());
  for (long i = 0; i < a.numel(); ++i) out[i] = a.val()[i] + b.val()[i];
  return detail::make_op(std::move(out), {a, b}, [a, b](Node& n) mutable {
    if (a.node()->requires_grad) {
      auto& g = a.grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (b.node()->requires_grad) {
      auto& g = b.grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "sub");
  NdArray out(a.shape());
  for (long i = 0; i < a.numel(); ++i) out[i] = a.val()[i] - b.val()[i];
  return detail::make_op(std::move(out), {a, b}, [a, b](Node& n) mutable {
    if (a.node()->requires_grad) {
      auto& g = a.grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (b.node()->requires_grad) {
      auto& g = b.grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "mul");
  NdArray out(a.shape());
  for (long i = 0; i < a.numel(); ++i) out[i] = a.val()[i] * b.val()[i];
  return detail::make_op(std::move(out), {a, b}, [a, b](Node& n) mutable {
    if (a.node()->requires_grad) {
      auto& g = a.grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * b.val()[i];
    }
    if (b.node()->requires_grad) {
      auto& g = b.grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * a.val()[i];
    }
  });
}

inline Var scale(const Var& a, double c) {
  NdArray out(a.shape());
  for (long i = 0; i < a.numel(); ++i) out[i] = a.val()[i] * c;
  return detail::make_op(std::move(out), {a}, [a, c](Node& n) mutable {
    if (!a.node()->requires_grad) return;
    auto& g = a.grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * c;
  });
}

inline Var relu(const Var& a) {
  NdArray out(a.shape());
  for (long i = 0; i < a.numel(); ++i) out[i] = a.val()[i] > 0.0 ? a.val()[i] : 0.0;
  return detail::make_op(std::move(out), {a}, [a](Node& n) mutable {
    if (!a.node()->requires_grad) return;
    auto& g = a.grad();
    for (size_t i = 0; i < g.size(); ++i)
      if (a.val()[i] > 0.0) g[i] += n.grad[i];
  });
}

// ---- shape manipulation ----

inline Var reshape(const Var& a, Shape s) {
  if (shape_numel(s) != a.numel())
    throw ShapeError("reshape: numel mismatch " + shape_str(a.shape()) + " -> " + shape_str(s));
  NdArray out(std::move(s), a.val().data);
  return detail::make_op(std::move(out), {a}, [a](Node& n) mutable {
    if (!a.node()->requires_grad) return;
    auto& g = a.grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

// out[i] = a[idx[i]]. Indices need not be a bijection; the backward pass is
// a scatter-add, so this doubles as broadcast/repeat.
inline Var gather(const Var& a, std::vector<long> idx, Shape out_shape) {
  if (static_cast<long>(idx.size()) != shape_numel(out_shape))
    throw ShapeError("gather: index count does not match output shape");
  NdArray out(std::move(out_shape));
  for (size_t i = 0; i < idx.size(); ++i) out[i] = a.val()[static_cast<size_t>(idx[i])];
  auto ix = std::make_shared<std::vector<long>>(std::move(idx));
  return detail::make_op(std::move(out), {a}, [a, ix](Node& n) mutable {
    if (!a.node()->requires_grad) return;
    auto& g = a.grad();
    for (size_t i = 0; i < ix->size(); ++i) g[static_cast<size_t>((*ix)[i])] += n.grad[i];
  });
}

inline Var transpose_last2(const Var& a) {
  const Shape& s = a.shape();
  if (s.size() < 2) throw ShapeError("transpose_last2: rank < 2");
  int M = s[s.size() - 2], N = s[s.size() - 1];
  long B = a.numel() / (static_cast<long>(M) * N);
  Shape os = s;
  std::swap(os[os.size() - 2], os[os.size() - 1]);
  std::vector<long> idx(static_cast<size_t>(a.numel()));
  long p = 0;
  for (long b = 0; b < B; ++b)
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < M; ++i) idx[p++] = (b * M + i) * N + j;
  return gather(a, std::move(idx), os);
}

// ---- linear algebra ----

// Batched matmul: a [B,M,K] x b [B,K,N] -> [B,M,N]; rank-2 inputs mean B=1.
inline Var matmul(const Var& a, const Var& b) {
  Shape sa = a.shape(), sb = b.shape();
  bool rank2 = sa.size() == 2;
  if (rank2) { sa.insert(sa.begin(), 1); sb.insert(sb.begin(), 1); }
  if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0] || sa[2] != sb[1])
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  int B = sa[0], M = sa[1], K = sa[2], N = sb[2];
  Shape os = rank2 ? Shape{M, N} : Shape{B, M, N};
  NdArray out(os);
  const double* pa = a.val().data.data();
  const double* pb = b.val().data.data();
  double* po = out.data.data();
  for (int bb = 0; bb < B; ++bb) {
    const double* A = pa + static_cast<long>(bb) * M * K;
    const double* Bm = pb + static_cast<long>(bb) * K * N;
    double* O = po + static_cast<long>(bb) * M * N;
    for (int i = 0; i < M; ++i)
      for (int k = 0; k < K; ++k) {
        double av = A[i * K + k];
        if (av == 0.0) continue;
        const double* brow = Bm + k * N;
        double* orow = O + i * N;
        for (int j = 0; j < N; ++j) orow[j] += av * brow[j];
      }
  }
  return detail::make_op(std::move(out), {a, b}, [a, b, B, M, K, N](Node& n) mutable {
    const double* g = n.grad.data();
    if (a.node()->requires_grad) {
      double* ga = a.grad().data();
      const double* pb2 = b.val().data.data();
      for (int bb = 0; bb < B; ++bb)
        for (int i = 0; i < M; ++i)
          for (int j = 0; j < N; ++j) {
            double gv = g[(static_cast<long>(bb) * M + i) * N + j];
            if (gv == 0.0) continue;
            const double* brow = pb2 + (static_cast<long>(bb) * K) * N + j;
            for (int k = 0; k < K; ++k)
              ga[(static_cast<long>(bb) * M + i) * K + k] += gv * brow[static_cast<long>(k) * N];
          }
    }
    if (b.node()->requires_grad) {
      double* gb = b.grad().data();
      const double* pa2 = a.val().data.data();
      for (int bb = 0; bb < B; ++bb)
        for (int i = 0; i < M; ++i)
          for (int k = 0; k < K; ++k) {
            double av = pa2[(static_cast<long>(bb) * M + i) * K + k];
            if (av == 0.0) continue;
            const double* grow = g + (static_cast<long>(bb) * M + i) * N;
            double* brow = gb + (static_cast<long>(bb) * K + k) * N;
            for (int j = 0; j < N; ++j) brow[j] += av * grow[j];
          }
    }
  });
}

// x [...,K] * w [K,M] + bias [M]
inline Var linear(const Var& x, const Var& w, const Var& bias) {
  const Shape& sx = x.shape();
  int K = sx.back();
  if (w.shape().size() != 2 || w.shape()[0] != K)
    throw ShapeError("linear: weight shape " + shape_str(w.shape()) + " vs input " +
                     shape_str(sx));
  int M = w.shape()[1];
  long rows = x.numel() / K;
  Var x2 = reshape(x, {static_cast<int>(rows), K});
  Var y = matmul(x2, w);
  // broadcast bias over rows
  std::vector<long> idx(static_cast<size_t>(rows) * M);
  for (long r = 0; r < rows; ++r)
    for (int m = 0; m < M; ++m) idx[static_cast<size_t>(r) * M + m] = m;
  y = add(y, gather(bias, std::move(idx), {static_cast<int>(rows), M}));
  Shape os = sx;
  os.back() = M;
  return reshape(y, os);
}

// ---- normalization & softmax ----

inline Var softmax_lastdim(const Var& x) {
  const Shape& s = x.shape();
  int K = s.back();
  long rows = x.numel() / K;
  NdArray out(s);
  for (long r = 0; r < rows; ++r) {
    const double* xi = x.val().data.data() + r * K;
    double* yi = out.data.data() + r * K;
    double mx = xi[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, xi[k]);
    double z = 0.0;
    for (int k = 0; k < K; ++k) { yi[k] = std::exp(xi[k] - mx); z += yi[k]; }
    for (int k = 0; k < K; ++k) yi[k] /= z;
  }
  return detail::make_op(std::move(out), {x}, [x, rows, K](Node& n) mutable {
    if (!x.node()->requires_grad) return;
    double* gx = x.grad().data();
    for (long r = 0; r < rows; ++r) {
      const double* y = n.val.data.data() + r * K;
      const double* gy = n.grad.data() + r * K;
      double dot = 0.0;
      for (int k = 0; k < K; ++k) dot += gy[k] * y[k];
      for (int k = 0; k < K; ++k) gx[r * K + k] += y[k] * (gy[k] - dot);
    }
  });
}

inline Var layernorm_lastdim(const Var& x, const Var& gamma, const Var& beta,
                             double eps = 1e-6) {
  const Shape& s = x.shape();
  int C = s.back();
  if (gamma.numel() != C || beta.numel() != C)
    throw ShapeError("layernorm: gamma/beta size must equal last dim");
  long rows = x.numel() / C;
  NdArray out(s);
  auto mu = std::make_shared<std::vector<double>>(rows);
  auto istd = std::make_shared<std::vector<double>>(rows);
  for (long r = 0; r < rows; ++r) {
    const double* xi = x.val().data.data() + r * C;
    double m = 0.0;
    for (int c = 0; c < C; ++c) m += xi[c];
    m /= C;
    double v = 0.0;
    for (int c = 0; c < C; ++c) v += (xi[c] - m) * (xi[c] - m);
    v /= C;
    double is = 1.0 / std::sqrt(v + eps);
    (*mu)[r] = m;
    (*istd)[r] = is;
    for (int c = 0; c < C; ++c)
      out[r * C + c] = (xi[c] - m) * is * gamma.val()[c] + beta.val()[c];
  }
  return detail::make_op(std::move(out), {x, gamma, beta},
                         [x, gamma, beta, mu, istd, rows, C](Node& n) mutable {
    for (long r = 0; r < rows; ++r) {
      const double* xi = x.val().data.data() + r * C;
      const double* gy = n.grad.data() + r * C;
      double m = (*mu)[r], is = (*istd)[r];
      if (gamma.node()->requires_grad) {
        auto& gg = gamma.grad();
        for (int c = 0; c < C; ++c) gg[c] += gy[c] * (xi[c] - m) * is;
      }
      if (beta.node()->requires_grad) {
        auto& gb = beta.grad();
        for (int c = 0; c < C; ++c) gb[c] += gy[c];
      }
      if (x.node()->requires_grad) {
        double* gx = x.grad().data() + r * C;
        // dL/dxhat
        double sum_gh = 0.0, sum_ghx = 0.0;
        for (int c = 0; c < C; ++c) {
          double gh = gy[c] * gamma.val()[c];
          sum_gh += gh;
          sum_ghx += gh * (xi[c] - m) * is;
        }
        for (int c = 0; c < C; ++c) {
          double gh = gy[c] * gamma.val()[c];
          double xh = (xi[c] - m) * is;
          gx[c] += is * (gh - sum_gh / C - xh * sum_ghx / C);
        }
      }
    }
  });
}

// y = x / sqrt(mean(x^2)); throws on (numerically) zero input power.
inline Var power_normalize(const Var& x) {
  long n = x.numel();
  double m = 0.0;
  for (long i = 0; i < n; ++i) m += x.val()[i] * x.val()[i];
  m /= static_cast<double>(n);
  if (m < 1e-300)
    throw NumericalError("power_normalize: zero-power input cannot be normalized");
  double s = std::sqrt(m);
  NdArray out(x.shape());
  for (long i = 0; i < n; ++i) out[i] = x.val()[i] / s;
  return detail::make_op(std::move(out), {x}, [x, s, n](Node& nd) mutable {
    if (!x.node()->requires_grad) return;
    double dot = 0.0;
    for (long i = 0; i < n; ++i) dot += nd.grad[i] * x.val()[i];
    double c = dot / (s * s * s * static_cast<double>(n));
    auto& g = x.grad();
    for (long i = 0; i < n; ++i) g[i] += nd.grad[i] / s - x.val()[i] * c;
  });
}

// ---- convolution & pooling (CHW layout) ----

// 3x3-style same convolution, stride 1, zero padding. x [C,H,W], w [O,C,kh,kw], b [O].
inline Var conv2d(const Var& x, const Var& w, const Var& bias) {
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  if (sx.size() != 3 || sw.size() != 4 || sw[1] != sx[0])
    throw ShapeError("conv2d: expected x[C,H,W], w[O,C,kh,kw]; got " + shape_str(sx) +
                     ", " + shape_str(sw));
  int C = sx[0], H = sx[1], W = sx[2], O = sw[0], kh = sw[2], kw = sw[3];
  if (bias.numel() != O) throw ShapeError("conv2d: bias size must equal output channels");
  int ph = kh / 2, pw = kw / 2;
  NdArray out({O, H, W});
  const double* px = x.val().data.data();
  const double* pw_ = w.val().data.data();
  double* po = out.data.data();
  for (int o = 0; o < O; ++o) {
    double bv = bias.val()[o];
    for (long i = 0; i < static_cast<long>(H) * W; ++i) po[static_cast<long>(o) * H * W + i] = bv;
    for (int c = 0; c < C; ++c)
      for (int m = 0; m < kh; ++m)
        for (int nk = 0; nk < kw; ++nk) {
          double wv = pw_[((static_cast<long>(o) * C + c) * kh + m) * kw + nk];
          if (wv == 0.0) continue;
          int di = m - ph, dj = nk - pw;
          int i0 = std::max(0, -di), i1 = std::min(H, H - di);
          int j0 = std::max(0, -dj), j1 = std::min(W, W - dj);
          for (int i = i0; i < i1; ++i) {
            const double* xr = px + (static_cast<long>(c) * H + i + di) * W + dj;
            double* orow = po + (static_cast<long>(o) * H + i) * W;
            for (int j = j0; j < j1; ++j) orow[j] += wv * xr[j];
          }
        }
  }
  return detail::make_op(std::move(out), {x, w, bias},
                         [x, w, bias, C, H, W, O, kh, kw, ph, pw](Node& n) mutable {
    const double* g = n.grad.data();
    const double* px = x.val().data.data();
    const double* pw_ = w.val().data.data();
    if (bias.node()->requires_grad) {
      auto& gb = bias.grad();
      for (int o = 0; o < O; ++o) {
        double s = 0.0;
        for (long i = 0; i < static_cast<long>(H) * W; ++i) s += g[static_cast<long>(o) * H * W + i];
        gb[o] += s;
      }
    }
    for (int o = 0; o < O; ++o)
      for (int c = 0; c < C; ++c)
        for (int m = 0; m < kh; ++m)
          for (int nk = 0; nk < kw; ++nk) {
            int di = m - ph, dj = nk - pw;
            int i0 = std::max(0, -di), i1 = std::min(H, H - di);
            int j0 = std::max(0, -dj), j1 = std::min(W, W - dj);
            long widx = ((static_cast<long>(o) * C + c) * kh + m) * kw + nk;
            double wv = pw_[widx];
            double gw = 0.0;
            bool need_x = x.node()->requires_grad;
            double* gx = need_x ? x.grad().data() : nullptr;
            for (int i = i0; i < i1; ++i) {
              const double* grow = g + (static_cast<long>(o) * H + i) * W;
              const double* xr = px + (static_cast<long>(c) * H + i + di) * W + dj;
              double* gxr = need_x ? gx + (static_cast<long>(c) * H + i + di) * W + dj : nullptr;
              for (int j = j0; j < j1; ++j) {
                gw += grow[j] * xr[j];
                if (need_x) gxr[j] += grow[j] * wv;
              }
            }
            if (w.node()->requires_grad) w.grad()[widx] += gw;
          }
  });
}

struct PoolResult {
  Var out;
  std::vector<long> indices;  // flat input index of each output element's argmax
};

// 2x2 max pooling, stride 2; ties break toward the lowest linear index.
inline PoolResult maxpool2x2(const Var& x) {
  const Shape& s = x.shape();
  if (s.size() != 3 || s[1] % 2 != 0 || s[2] % 2 != 0)
    throw ShapeError("maxpool2x2: x[C,H,W] with even H,W required; got " + shape_str(s));
  int C = s[0], H = s[1], W = s[2], h = H / 2, w = W / 2;
  NdArray out({C, h, w});
  std::vector<long> idx(static_cast<size_t>(C) * h * w);
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        long best = (static_cast<long>(c) * H + 2 * i) * W + 2 * j;
        double bv = x.val()[best];
        const long cand[3] = {(static_cast<long>(c) * H + 2 * i) * W + 2 * j + 1,
                              (static_cast<long>(c) * H + 2 * i + 1) * W + 2 * j,
                              (static_cast<long>(c) * H + 2 * i + 1) * W + 2 * j + 1};
        for (long k : cand)
          if (x.val()[k] > bv) { bv = x.val()[k]; best = k; }
        long oi = (static_cast<long>(c) * h + i) * w + j;
        out[oi] = bv;
        idx[oi] = best;
      }
  auto ix = std::make_shared<std::vector<long>>(idx);
  Var ov = detail::make_op(std::move(out), {x}, [x, ix](Node& n) mutable {
    if (!x.node()->requires_grad) return;
    auto& g = x.grad();
    for (size_t i = 0; i < ix->size(); ++i) g[static_cast<size_t>((*ix)[i])] += n.grad[i];
  });
  return {ov, std::move(idx)};
}

// Places each value at its recorded index; zeros elsewhere.
inline Var maxunpool2x2(const Var& x, const std::vector<long>& indices, int H, int W) {
  const Shape& s = x.shape();
  if (s.size() != 3 || static_cast<long>(indices.size()) != x.numel())
    throw ShapeError("maxunpool2x2: index count must match input numel");
  if (s[1] * 2 != H || s[2] * 2 != W)
    throw ShapeError("maxunpool2x2: output size must be 2x input size");
  int C = s[0];
  NdArray out({C, H, W});
  for (long i = 0; i < x.numel(); ++i) {
    if (indices[i] < 0 || indices[i] >= static_cast<long>(out.data.size()))
      throw ShapeError("maxunpool2x2: index out of range");
    out[static_cast<size_t>(indices[i])] = x.val()[i];
  }
  auto ix = std::make_shared<std::vector<long>>(indices);
  return detail::make_op(std::move(out), {x}, [x, ix](Node& n) mutable {
    if (!x.node()->requires_grad) return;
    auto& g = x.grad();
    for (size_t i = 0; i < ix->size(); ++i) g[i] += n.grad[static_cast<size_t>((*ix)[i])];
  });
}

// ---- reductions & losses ----

inline Var sum(const Var& x) {
  double s = 0.0;
  for (long i = 0; i < x.numel(); ++i) s += x.val()[i];
  return detail::make_op(NdArray({1}, {s}), {x}, [x](Node& n) mutable {
    if (!x.node()->requires_grad) return;
    auto& g = x.grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[0];
  });
}

inline Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

inline Var mse(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "mse");
  Var d = sub(a, b);
  return mean(mul(d, d));
}

// Mean cross-entropy of row-wise softmax over logits [N,K] against labels.
inline Var softmax_xent(const Var& logits, const std::vector<int>& labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || static_cast<size_t>(s[0]) != labels.size())
    throw ShapeError("softmax_xent: logits [N,K] with N labels required");
  int N = s[0], K = s[1];
  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(N) * K);
  double loss = 0.0;
  for (int r = 0; r < N; ++r) {
    const double* xi = logits.val().data.data() + static_cast<long>(r) * K;
    double mx = xi[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, xi[k]);
    double z = 0.0;
    for (int k = 0; k < K; ++k) { (*probs)[static_cast<long>(r) * K + k] = std::exp(xi[k] - mx); z += (*probs)[static_cast<long>(r) * K + k]; }
    for (int k = 0; k < K; ++k) (*probs)[static_cast<long>(r) * K + k] /= z;
    int y = labels[r];
    if (y < 0 || y >= K) throw DomainError("softmax_xent: label out of range");
    loss -= std::log(std::max((*probs)[static_cast<long>(r) * K + y], 1e-300));
  }
  loss /= N;
  auto lab = std::make_shared<std::vector<int>>(labels);
  return detail::make_op(NdArray({1}, {loss}), {logits}, [logits, probs, lab, N, K](Node& n) mutable {
    if (!logits.node()->requires_grad) return;
    auto& g = logits.grad();
    double gy = n.grad[0] / N;
    for (int r = 0; r < N; ++r)
      for (int k = 0; k < K; ++k)
        g[static_cast<long>(r) * K + k] +=
            gy * ((*probs)[static_cast<long>(r) * K + k] - (k == (*lab)[r] ? 1.0 : 0.0));
  });
}

// ---- backward driver ----

inline void backward(const Var& root) {
  if (root.numel() != 1) throw ShapeError("backward: root must be scalar");
  // topological order (DFS, iterative)
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({root.node().get(), 0});
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [nd, ci] = stack.back();
    if (ci < nd->parents.size()) {
      Node* p = nd->parents[ci++].get();
      if (!seen.count(p)) { seen.insert(p); stack.push_back({p, 0}); }
    } else {
      order.push_back(nd);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad();
  root.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward && (*it)->requires_grad) (*it)->backward(**it);
}

// Xavier/Glorot uniform initialization.
inline NdArray xavier_uniform(const Shape& shape, int fan_in, int fan_out, Rng& rng) {
  NdArray a(shape);
  double lim = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : a.data) v = rng.uniform(-lim, lim);
  return a;
}

}  // namespace irst::ag
