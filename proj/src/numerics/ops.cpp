#include "cmp/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cmp/common/error.hpp"

namespace cmp::num {
namespace {

template <typename T>
void require_matrix(const char* op, const Tensor<T>& a) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
  }
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

// Row-major kernels; all accumulate into c.
// c[M×N] += a[M×K] · b[K×N]
template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* __restrict a, const T* __restrict b,
             T* __restrict c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* __restrict ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* __restrict bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[M×N] += a[M×K] · b[N×K]ᵀ
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  thread_local std::vector<T> bt;
  bt.resize(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(m, k, n, a, bt.data(), c);
}

// c[M×N] += a[K×M]ᵀ · b[K×N]
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* __restrict a, const T* __restrict b,
             T* __restrict c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* ap = a + p * m;
    const T* __restrict bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = ap[i];
      T* __restrict ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

struct AxisLayout {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis) {
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  std::vector<T> out(m * n, T(0));
  gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data());
  return make_result<T>("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      gemm_nt(m, n, k, self.grad.data(), pb.value.data(), pa.grad.data());
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      gemm_tn(k, m, n, pa.value.data(), self.grad.data(), pb.grad.data());
    }
  });
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix("matmul_nt", a);
  require_matrix("matmul_nt", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw ShapeError("matmul_nt: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()) + "^T");
  }
  std::vector<T> out(m * n, T(0));
  gemm_nt(m, k, n, a.data().data(), b.data().data(), out.data());
  return make_result<T>("matmul_nt", {m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      gemm_nn(m, n, k, self.grad.data(), pb.value.data(), pa.grad.data());
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      gemm_tn(n, m, k, self.grad.data(), pa.value.data(), pb.grad.data());
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_matrix("transpose", a);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<T> out(m * n);
  const auto x = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return make_result<T>("transpose", {n, m}, std::move(out), {a}, [m, n](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[j * m + i];
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  std::vector<T> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result<T>("add", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  std::vector<T> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  std::vector<T> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (T& v : out) v *= factor;
  return make_result<T>("scale", a.shape(), std::move(out), {a}, [factor](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += factor * self.grad[i];
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  const std::size_t n = x.shape().back();
  if (bias.size() != n) {
    throw ShapeError("add_bias: bias " + shape_string(bias.shape()) + " does not match last axis of " +
                     shape_string(x.shape()));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % n];
  return make_result<T>("add_bias", x.shape(), std::move(out), {x, bias}, [n](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pb = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i % n] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  }
  std::vector<T> out(a.data().begin(), a.data().end());
  return make_result<T>("reshape", std::move(shape), std::move(out), {a}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  // tanh approximation
  constexpr T kC = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = T(0.044715);
  const auto in = x.data();
  std::vector<T> out(in.size());
  std::vector<T> deriv(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T v = in[i];
    const T t = std::tanh(kC * (v + kA * v * v * v));
    out[i] = T(0.5) * v * (T(1) + t);
    deriv[i] = T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * kC * (T(1) + T(3) * kA * v * v);
  }
  return make_result<T>("gelu", x.shape(), std::move(out), {x}, [deriv = std::move(deriv)](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * deriv[i];
  });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (T& v : out) v = std::exp(v);
  return make_result<T>("exp", x.shape(), std::move(out), {x}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * self.value[i];
  });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (T& v : out) {
    if (!(v > T(0))) throw NumericError("log: non-positive argument");
    v = std::log(v);
  }
  return make_result<T>("log", x.shape(), std::move(out), {x}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] / p.value[i];
  });
}

namespace {

template <typename T>
std::vector<T> softmax_values(const Tensor<T>& x, const AxisLayout& l, bool log_space) {
  const auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t r = 0; r < l.inner; ++r) {
      const std::size_t base = o * l.len * l.inner + r;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < l.len; ++i) mx = std::max(mx, in[base + i * l.inner]);
      T total = 0;
      for (std::size_t i = 0; i < l.len; ++i) total += std::exp(in[base + i * l.inner] - mx);
      const T log_total = std::log(total);
      for (std::size_t i = 0; i < l.len; ++i) {
        const T shifted = in[base + i * l.inner] - mx;
        out[base + i * l.inner] = log_space ? shifted - log_total : std::exp(shifted) / total;
      }
    }
  }
  return out;
}

template <typename T>
AxisLayout checked_axis(const char* op, const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for " +
                     shape_string(x.shape()));
  }
  return axis_layout(x.shape(), axis);
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const AxisLayout l = checked_axis("softmax", x, axis);
  auto out = softmax_values(x, l, false);
  return make_result<T>("softmax", x.shape(), std::move(out), {x}, [l](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t r = 0; r < l.inner; ++r) {
        const std::size_t base = o * l.len * l.inner + r;
        T dot = 0;
        for (std::size_t i = 0; i < l.len; ++i) dot += g[base + i * l.inner] * y[base + i * l.inner];
        for (std::size_t i = 0; i < l.len; ++i) {
          const std::size_t at = base + i * l.inner;
          p.grad[at] += y[at] * (g[at] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, std::size_t axis) {
  const AxisLayout l = checked_axis("log_softmax", x, axis);
  auto out = softmax_values(x, l, true);
  return make_result<T>("log_softmax", x.shape(), std::move(out), {x}, [l](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t r = 0; r < l.inner; ++r) {
        const std::size_t base = o * l.len * l.inner + r;
        T total = 0;
        for (std::size_t i = 0; i < l.len; ++i) total += g[base + i * l.inner];
        for (std::size_t i = 0; i < l.len; ++i) {
          const std::size_t at = base + i * l.inner;
          p.grad[at] += g[at] - std::exp(y[at]) * total;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::size_t n = x.shape().back();
  if (gamma.size() != n || beta.size() != n) {
    throw ShapeError("layer_norm: gamma/beta must have length " + std::to_string(n));
  }
  if (!(eps > T(0))) throw ShapeError("layer_norm: eps must be positive");
  const std::size_t rows = x.size() / n;
  const auto in = x.data();
  const auto g = gamma.data(), b = beta.data();
  std::vector<T> out(in.size()), xhat(in.size()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = in.data() + r * n;
    T mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += xr[j];
    mu /= T(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= T(n);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[r * n + j] = (xr[j] - mu) * inv_std[r];
      out[r * n + j] = g[j] * xhat[r * n + j] + b[j];
    }
  }
  return make_result<T>(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [n, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        if (pg.requires_grad) pg.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        if (px.requires_grad) px.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const T* dy = self.grad.data() + r * n;
          const T* xh = xhat.data() + r * n;
          T sum_dxh = 0, sum_dxh_xh = 0;
          for (std::size_t j = 0; j < n; ++j) {
            const T dxh = dy[j] * pg.value[j];
            sum_dxh += dxh;
            sum_dxh_xh += dxh * xh[j];
            if (pg.requires_grad) pg.grad[j] += dy[j] * xh[j];
            if (pb.requires_grad) pb.grad[j] += dy[j];
          }
          if (!px.requires_grad) continue;
          const T k = inv_std[r] / T(n);
          for (std::size_t j = 0; j < n; ++j) {
            const T dxh = dy[j] * pg.value[j];
            px.grad[r * n + j] += k * (T(n) * dxh - sum_dxh - xh[j] * sum_dxh_xh);
          }
        }
      });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  return make_result<T>("sum", {1}, {total}, {x}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (T& g : p.grad) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  const T inv = T(1) / T(x.size());
  return make_result<T>("mean", {1}, {total * inv}, {x}, [inv](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (T& g : p.grad) g += self.grad[0] * inv;
  });
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  require_matrix("mean_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(n, T(0));
  const auto in = x.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += in[i * n + j];
  for (T& v : out) v /= T(m);
  return make_result<T>("mean_rows", {1, n}, std::move(out), {x}, [m, n](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[j] / T(m);
  });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require_matrix("concat_rows", p);
    if (p.cols() != n) {
      throw ShapeError("concat_rows: column mismatch " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    offsets.push_back(m * n);
    m += p.rows();
  }
  std::vector<T> out;
  out.reserve(m * n);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result<T>("concat_rows", {m, n}, std::move(out), parts,
                        [offsets = std::move(offsets)](Node<T>& self) {
                          for (std::size_t k = 0; k < self.parents.size(); ++k) {
                            auto& p = *self.parents[k];
                            if (!p.requires_grad) continue;
                            p.ensure_grad();
                            for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[offsets[k] + i];
                          }
                        });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  std::vector<std::size_t> col_offsets, widths;
  for (const auto& p : parts) {
    require_matrix("concat_cols", p);
    if (p.rows() != m) {
      throw ShapeError("concat_cols: row mismatch " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    col_offsets.push_back(n);
    widths.push_back(p.cols());
    n += p.cols();
  }
  std::vector<T> out(m * n);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto in = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(in.data() + i * widths[k], widths[k], out.data() + i * n + col_offsets[k]);
  }
  return make_result<T>("concat_cols", {m, n}, std::move(out), parts,
                        [m, n, col_offsets = std::move(col_offsets), widths = std::move(widths)](Node<T>& self) {
                          for (std::size_t k = 0; k < self.parents.size(); ++k) {
                            auto& p = *self.parents[k];
                            if (!p.requires_grad) continue;
                            p.ensure_grad();
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < widths[k]; ++j)
                                p.grad[i * widths[k] + j] += self.grad[i * n + col_offsets[k] + j];
                          }
                        });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_matrix("slice_rows", x);
  if (begin >= end || end > x.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_string(x.shape()));
  }
  const std::size_t n = x.cols();
  std::vector<T> out(x.data().begin() + begin * n, x.data().begin() + end * n);
  return make_result<T>("slice_rows", {end - begin, n}, std::move(out), {x}, [begin, n](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[begin * n + i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_matrix("slice_cols", x);
  if (begin >= end || end > x.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_string(x.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols(), w = end - begin;
  std::vector<T> out(m * w);
  const auto in = x.data();
  for (std::size_t i = 0; i < m; ++i) std::copy_n(in.data() + i * n + begin, w, out.data() + i * w);
  return make_result<T>("slice_cols", {m, w}, std::move(out), {x}, [m, n, w, begin](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) p.grad[i * n + begin + j] += self.grad[i * w + j];
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::size_t> ids) {
  require_matrix("gather_rows", table);
  if (ids.empty()) throw ShapeError("gather_rows: no ids");
  const std::size_t n = table.cols();
  std::vector<T> out(ids.size() * n);
  const auto in = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[i]) + " out of range for " +
                       shape_string(table.shape()));
    }
    std::copy_n(in.data() + ids[i] * n, n, out.data() + i * n);
  }
  return make_result<T>("gather_rows", {ids.size(), n}, std::move(out), {table},
                        [n, ids = std::vector<std::size_t>(ids.begin(), ids.end())](Node<T>& self) {
                          auto& p = *self.parents[0];
                          p.ensure_grad();
                          for (std::size_t i = 0; i < ids.size(); ++i)
                            for (std::size_t j = 0; j < n; ++j) p.grad[ids[i] * n + j] += self.grad[i * n + j];
                        });
}

template <typename T>
Tensor<T> pick(const Tensor<T>& x, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  require_matrix("pick", x);
  if (rows.size() != cols.size() || rows.empty()) throw ShapeError("pick: index lists must be equal and nonempty");
  const std::size_t n = x.cols();
  std::vector<std::size_t> flat(rows.size());
  std::vector<T> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows() || cols[i] >= n) throw ShapeError("pick: index out of range");
    flat[i] = rows[i] * n + cols[i];
    out[i] = x.data()[flat[i]];
  }
  return make_result<T>("pick", {rows.size()}, std::move(out), {x}, [flat = std::move(flat)](Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < flat.size(); ++i) p.grad[flat[i]] += self.grad[i];
  });
}

template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x) {
  require_matrix("l2_normalize_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  const auto in = x.data();
  std::vector<T> out(m * n), norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    T ss = 0;
    for (std::size_t j = 0; j < n; ++j) ss += in[i * n + j] * in[i * n + j];
    norms[i] = std::sqrt(ss);
    if (!(norms[i] > T(0))) throw NumericError("l2_normalize_rows: zero-norm row");
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = in[i * n + j] / norms[i];
  }
  return make_result<T>("l2_normalize_rows", {m, n}, std::move(out), {x},
                        [m, n, norms = std::move(norms)](Node<T>& self) {
                          auto& p = *self.parents[0];
                          p.ensure_grad();
                          for (std::size_t i = 0; i < m; ++i) {
                            const T* y = self.value.data() + i * n;
                            const T* g = self.grad.data() + i * n;
                            T dot = 0;
                            for (std::size_t j = 0; j < n; ++j) dot += y[j] * g[j];
                            for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += (g[j] - y[j] * dot) / norms[i];
                          }
                        });
}

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads,
                    std::vector<T>* weights) {
  require_matrix("attention", q);
  require_matrix("attention", k);
  require_matrix("attention", v);
  const std::size_t lq = q.rows(), lk = k.rows(), dm = q.cols();
  if (k.cols() != dm || v.cols() != dm || v.rows() != lk) {
    throw ShapeError("attention: incompatible q " + shape_string(q.shape()) + ", k " + shape_string(k.shape()) +
                     ", v " + shape_string(v.shape()));
  }
  if (heads == 0 || dm % heads != 0) {
    throw ShapeError("attention: model dim " + std::to_string(dm) + " not divisible by " + std::to_string(heads) +
                     " heads");
  }
  const std::size_t d = dm / heads;
  const T inv_sqrt_d = T(1) / std::sqrt(T(d));
  const T* qd = q.data().data();
  const T* kd = k.data().data();
  const T* vd = v.data().data();
  std::vector<T> probs(heads * lq * lk);
  std::vector<T> out(lq * dm, T(0));
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * d;
    T* ph = probs.data() + h * lq * lk;
    for (std::size_t i = 0; i < lq; ++i) {
      T* row = ph + i * lk;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < lk; ++j) {
        T s = 0;
        for (std::size_t c = 0; c < d; ++c) s += qd[i * dm + off + c] * kd[j * dm + off + c];
        row[j] = s * inv_sqrt_d;
        mx = std::max(mx, row[j]);
      }
      T total = 0;
      for (std::size_t j = 0; j < lk; ++j) {
        row[j] = std::exp(row[j] - mx);
        total += row[j];
      }
      for (std::size_t j = 0; j < lk; ++j) row[j] /= total;
      T* orow = out.data() + i * dm + off;
      for (std::size_t j = 0; j < lk; ++j) {
        const T pj = row[j];
        const T* vrow = vd + j * dm + off;
        for (std::size_t c = 0; c < d; ++c) orow[c] += pj * vrow[c];
      }
    }
  }
  if (weights) *weights = probs;
  return make_result<T>(
      "attention", {lq, dm}, std::move(out), {q, k, v},
      [lq, lk, dm, d, heads, inv_sqrt_d, probs = std::move(probs)](Node<T>& self) {
        auto& pq = *self.parents[0];
        auto& pk = *self.parents[1];
        auto& pv = *self.parents[2];
        if (pq.requires_grad) pq.ensure_grad();
        if (pk.requires_grad) pk.ensure_grad();
        if (pv.requires_grad) pv.ensure_grad();
        std::vector<T> dp(lk);
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t off = h * d;
          const T* ph = probs.data() + h * lq * lk;
          for (std::size_t i = 0; i < lq; ++i) {
            const T* go = self.grad.data() + i * dm + off;
            const T* prow = ph + i * lk;
            T dot = 0;
            for (std::size_t j = 0; j < lk; ++j) {
              const T* vrow = pv.value.data() + j * dm + off;
              T s = 0;
              for (std::size_t c = 0; c < d; ++c) s += go[c] * vrow[c];
              dp[j] = s;
              dot += s * prow[j];
              if (pv.requires_grad) {
                T* gv = pv.grad.data() + j * dm + off;
                for (std::size_t c = 0; c < d; ++c) gv[c] += prow[j] * go[c];
              }
            }
            for (std::size_t j = 0; j < lk; ++j) {
              const T ds = prow[j] * (dp[j] - dot) * inv_sqrt_d;
              if (ds == T(0)) continue;
              if (pq.requires_grad) {
                T* gq = pq.grad.data() + i * dm + off;
                const T* krow = pk.value.data() + j * dm + off;
                for (std::size_t c = 0; c < d; ++c) gq[c] += ds * krow[c];
              }
              if (pk.requires_grad) {
                T* gk = pk.grad.data() + j * dm + off;
                const T* qrow = pq.value.data() + i * dm + off;
                for (std::size_t c = 0; c < d; ++c) gk[c] += ds * qrow[c];
              }
            }
          }
        }
      });
}

#define CMP_INSTANTIATE_OPS(T)                                                                          \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> transpose(const Tensor<T>&);                                                       \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> scale(const Tensor<T>&, T);                                                        \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                  \
  template Tensor<T> gelu(const Tensor<T>&);                                                            \
  template Tensor<T> exp(const Tensor<T>&);                                                             \
  template Tensor<T> log(const Tensor<T>&);                                                             \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                            \
  template Tensor<T> log_softmax(const Tensor<T>&, std::size_t);                                        \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);               \
  template Tensor<T> sum(const Tensor<T>&);                                                             \
  template Tensor<T> mean(const Tensor<T>&);                                                            \
  template Tensor<T> mean_rows(const Tensor<T>&);                                                       \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);                                        \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                                        \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);                            \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);                            \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);                       \
  template Tensor<T> pick(const Tensor<T>&, std::span<const std::size_t>, std::span<const std::size_t>); \
  template Tensor<T> l2_normalize_rows(const Tensor<T>&);                                               \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::vector<T>*);

CMP_INSTANTIATE_OPS(float)
CMP_INSTANTIATE_OPS(double)

}  // namespace cmp::num
