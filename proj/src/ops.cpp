#include "relu_sparsity/ops.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "relu_sparsity/errors.hpp"
#include "relu_sparsity/kernels.hpp"

namespace relu_sparsity::ops {

namespace {

template <typename T>
void require_rank2(const BasicTensor<T>& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " must be rank 2, got " + shape_to_string(t.shape()));
  }
}

template <typename T>
BasicTensor<T> transposed(const BasicTensor<T>& t) {
  const std::size_t rows = t.dim(0), cols = t.dim(1);
  BasicTensor<T> out(Shape{cols, rows});
  kernels::transpose<T>(rows, cols, t.data(), out.data());
  return out;
}

}  // namespace

template <typename T>
Var matmul(BasicGraph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  require_rank2(av, "matmul lhs");
  require_rank2(bv, "matmul rhs");
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k) {
    throw DimensionError("matmul inner dimensions differ: " + shape_to_string(av.shape()) + " x " +
                         shape_to_string(bv.shape()));
  }
  BasicTensor<T> out(Shape{m, n});
  kernels::gemm<T>(m, k, n, av.data(), bv.data(), out.data());
  return g.record(std::move(out), {a, b}, [m, k, n](BasicGraph<T>& gr, Var self) {
    const auto& in = gr.inputs(self);
    const Var a = in[0], b = in[1];
    const auto dc = gr.grad(self);
    if (auto* da = gr.grad_buffer(a)) {
      const auto bt = transposed(gr.value(b));
      kernels::gemm<T>(m, n, k, dc.data(), bt.data(), da->data(), true);
    }
    if (auto* db = gr.grad_buffer(b)) {
      const auto at = transposed(gr.value(a));
      kernels::gemm<T>(k, m, n, at.data(), dc.data(), db->data(), true);
    }
  });
}

template <typename T>
Var add(BasicGraph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  if (av.shape() != bv.shape()) {
    throw DimensionError("add operands differ: " + shape_to_string(av.shape()) + " vs " +
                         shape_to_string(bv.shape()));
  }
  BasicTensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return g.record(std::move(out), {a, b}, [](BasicGraph<T>& gr, Var self) {
    const auto dc = gr.grad(self);
    for (Var in : gr.inputs(self)) gr.accumulate_grad(in, dc);
  });
}

template <typename T>
Var add_bias(BasicGraph<T>& g, Var x, Var bias) {
  const auto& xv = g.value(x);
  const auto& bv = g.value(bias);
  const std::size_t n = xv.last_dim();
  if (bv.rank() != 1 || bv.size() != n) {
    throw DimensionError("bias " + shape_to_string(bv.shape()) + " does not match last axis of " +
                         shape_to_string(xv.shape()));
  }
  BasicTensor<T> out = xv;
  const std::size_t rows = out.rows();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
  return g.record(std::move(out), {x, bias}, [rows, n](BasicGraph<T>& gr, Var self) {
    const auto& in = gr.inputs(self);
    const auto dc = gr.grad(self);
    gr.accumulate_grad(in[0], dc);
    if (auto* db = gr.grad_buffer(in[1])) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) (*db)[j] += dc[r * n + j];
    }
  });
}

template <typename T>
Var relu(BasicGraph<T>& g, Var x) {
  const auto& xv = g.value(x);
  BasicTensor<T> out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > T{0} ? xv[i] : T{0};
  return g.record(std::move(out), {x}, [](BasicGraph<T>& gr, Var self) {
    const Var x = gr.inputs(self)[0];
    auto* dx = gr.grad_buffer(x);
    if (dx == nullptr) return;
    const auto dc = gr.grad(self);
    const auto& xv = gr.value(x);
    for (std::size_t i = 0; i < dc.size(); ++i)
      if (xv[i] > T{0}) (*dx)[i] += dc[i];
  });
}

template <typename T>
Var column_mask(BasicGraph<T>& g, Var x, std::span<const T> keep) {
  const auto& xv = g.value(x);
  const std::size_t n = xv.last_dim();
  if (keep.size() != n) {
    throw DimensionError("mask length " + std::to_string(keep.size()) + " does not match last axis of " +
                         shape_to_string(xv.shape()));
  }
  std::vector<T> k(keep.begin(), keep.end());
  for (T v : k)
    if (v != T{0} && v != T{1}) throw ArgumentError("mask entries must be 0 or 1");
  BasicTensor<T> out(xv.shape());
  const std::size_t rows = xv.rows();
  // Select rather than multiply so masked entries are +0.0 even for -0.0 / inf inputs.
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = k[j] != T{0} ? xv[r * n + j] : T{0};
  return g.record(std::move(out), {x}, [k = std::move(k), rows, n](BasicGraph<T>& gr, Var self) {
    auto* dx = gr.grad_buffer(gr.inputs(self)[0]);
    if (dx == nullptr) return;
    const auto dc = gr.grad(self);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < n; ++j)
        if (k[j] != T{0}) (*dx)[r * n + j] += dc[r * n + j];
  });
}

template <typename T>
Var layer_norm(BasicGraph<T>& g, Var x, Var gain, Var bias, T eps) {
  const auto& xv = g.value(x);
  const std::size_t d = xv.last_dim();
  if (g.value(gain).size() != d || g.value(bias).size() != d) {
    throw DimensionError("layer_norm affine parameters must match last axis of " + shape_to_string(xv.shape()));
  }
  const std::size_t rows = xv.rows();
  const auto& gv = g.value(gain);
  const auto& bv = g.value(bias);
  auto xhat = std::make_shared<BasicTensor<T>>(xv.shape());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  BasicTensor<T> out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.raw() + r * d;
    T mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<T>(d);
    const T inv = T{1} / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mean) * inv;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = gv[j] * h + bv[j];
    }
  }
  return g.record(std::move(out), {x, gain, bias}, [xhat, inv_std, rows, d](BasicGraph<T>& gr, Var self) {
    const auto& in = gr.inputs(self);
    const auto dy = gr.grad(self);
    const auto& gv = gr.value(in[1]);
    if (auto* dx = gr.grad_buffer(in[0])) {
      std::vector<T> dxhat(d);
      for (std::size_t r = 0; r < rows; ++r) {
        T mean_dxhat = 0, mean_dxhat_xhat = 0;
        for (std::size_t j = 0; j < d; ++j) {
          dxhat[j] = dy[r * d + j] * gv[j];
          mean_dxhat += dxhat[j];
          mean_dxhat_xhat += dxhat[j] * (*xhat)[r * d + j];
        }
        mean_dxhat /= static_cast<T>(d);
        mean_dxhat_xhat /= static_cast<T>(d);
        const T inv = (*inv_std)[r];
        for (std::size_t j = 0; j < d; ++j) {
          (*dx)[r * d + j] += inv * (dxhat[j] - mean_dxhat - (*xhat)[r * d + j] * mean_dxhat_xhat);
        }
      }
    }
    if (auto* dg = gr.grad_buffer(in[1])) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) (*dg)[j] += dy[r * d + j] * (*xhat)[r * d + j];
    }
    if (auto* db = gr.grad_buffer(in[2])) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) (*db)[j] += dy[r * d + j];
    }
  });
}

template <typename T>
Var embedding(BasicGraph<T>& g, Var table, std::span<const std::int32_t> ids) {
  const auto& tv = g.value(table);
  require_rank2(tv, "embedding table");
  const std::size_t vocab = tv.dim(0), d = tv.dim(1);
  if (ids.empty()) throw DimensionError("embedding lookup needs at least one id");
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  BasicTensor<T> out(Shape{idv.size(), d});
  for (std::size_t r = 0; r < idv.size(); ++r) {
    const std::int32_t id = idv[r];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab));
    }
    std::copy_n(tv.raw() + static_cast<std::size_t>(id) * d, d, out.raw() + r * d);
  }
  return g.record(std::move(out), {table}, [idv = std::move(idv), d](BasicGraph<T>& gr, Var self) {
    auto* dt = gr.grad_buffer(gr.inputs(self)[0]);
    if (dt == nullptr) return;
    const auto dc = gr.grad(self);
    for (std::size_t r = 0; r < idv.size(); ++r) {
      T* dst = dt->raw() + static_cast<std::size_t>(idv[r]) * d;
      const T* src = dc.raw() + r * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

template <typename T>
Var causal_self_attention(BasicGraph<T>& g, Var qkv, std::size_t batch, std::size_t seq, std::size_t heads) {
  const auto& qv = g.value(qkv);
  require_rank2(qv, "attention input");
  if (heads == 0 || qv.dim(1) % 3 != 0 || (qv.dim(1) / 3) % heads != 0) {
    throw DimensionError("attention input width must be 3 * d_model with d_model divisible by heads");
  }
  if (qv.dim(0) != batch * seq) throw DimensionError("attention input rows must equal batch * seq");
  const std::size_t d = qv.dim(1) / 3;
  const std::size_t dh = d / heads;
  const std::size_t width = 3 * d;
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));

  // probs[(b*heads + h), i, j] for j <= i; zero above the diagonal.
  auto probs = std::make_shared<BasicTensor<T>>(Shape{batch * heads, seq, seq});
  BasicTensor<T> out(Shape{batch * seq, d});
  const T* src = qv.raw();

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t bh = 0; bh < static_cast<std::ptrdiff_t>(batch * heads); ++bh) {
    const std::size_t b = static_cast<std::size_t>(bh) / heads;
    const std::size_t h = static_cast<std::size_t>(bh) % heads;
    std::vector<T> kt(dh * seq);
    for (std::size_t j = 0; j < seq; ++j)
      for (std::size_t c = 0; c < dh; ++c) kt[c * seq + j] = src[(b * seq + j) * width + d + h * dh + c];
    T* p = probs->raw() + static_cast<std::size_t>(bh) * seq * seq;
    for (std::size_t i = 0; i < seq; ++i) {
      const T* q = src + (b * seq + i) * width + h * dh;
      T* s = p + i * seq;
      for (std::size_t c = 0; c < dh; ++c) {
        const T qc = q[c];
        const T* krow = kt.data() + c * seq;
        for (std::size_t j = 0; j <= i; ++j) s[j] += qc * krow[j];
      }
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j <= i; ++j) {
        s[j] *= scale;
        mx = std::max(mx, s[j]);
      }
      T total = 0;
      for (std::size_t j = 0; j <= i; ++j) {
        s[j] = std::exp(s[j] - mx);
        total += s[j];
      }
      for (std::size_t j = 0; j <= i; ++j) s[j] /= total;
      T* o = out.raw() + (b * seq + i) * d + h * dh;
      for (std::size_t j = 0; j <= i; ++j) {
        const T pj = s[j];
        const T* v = src + (b * seq + j) * width + 2 * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) o[c] += pj * v[c];
      }
    }
  }

  return g.record(std::move(out), {qkv}, [probs, batch, seq, heads, d, dh, width, scale](BasicGraph<T>& gr,
                                                                                           Var self) {
    const Var in = gr.inputs(self)[0];
    auto* dqkv = gr.grad_buffer(in);
    if (dqkv == nullptr) return;
    const auto dout = gr.grad(self);
    const T* src = gr.value(in).raw();
    T* dst = dqkv->raw();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bh = 0; bh < static_cast<std::ptrdiff_t>(batch * heads); ++bh) {
      const std::size_t b = static_cast<std::size_t>(bh) / heads;
      const std::size_t h = static_cast<std::size_t>(bh) % heads;
      const T* p = probs->raw() + static_cast<std::size_t>(bh) * seq * seq;
      std::vector<T> vt(dh * seq);
      for (std::size_t j = 0; j < seq; ++j)
        for (std::size_t c = 0; c < dh; ++c) vt[c * seq + j] = src[(b * seq + j) * width + 2 * d + h * dh + c];
      std::vector<T> dp(seq), ds(seq);
      for (std::size_t i = 0; i < seq; ++i) {
        const T* go = dout.raw() + (b * seq + i) * d + h * dh;
        const T* prow = p + i * seq;
        std::fill(dp.begin(), dp.begin() + static_cast<std::ptrdiff_t>(i + 1), T{0});
        for (std::size_t c = 0; c < dh; ++c) {
          const T gc = go[c];
          const T* vrow = vt.data() + c * seq;
          for (std::size_t j = 0; j <= i; ++j) dp[j] += gc * vrow[j];
        }
        // dV_j += P_ij * dO_i
        for (std::size_t j = 0; j <= i; ++j) {
          T* dv = dst + (b * seq + j) * width + 2 * d + h * dh;
          const T pj = prow[j];
          for (std::size_t c = 0; c < dh; ++c) dv[c] += pj * go[c];
        }
        T dot = 0;
        for (std::size_t j = 0; j <= i; ++j) dot += prow[j] * dp[j];
        for (std::size_t j = 0; j <= i; ++j) ds[j] = prow[j] * (dp[j] - dot) * scale;
        T* dq = dst + (b * seq + i) * width + h * dh;
        const T* q = src + (b * seq + i) * width + h * dh;
        for (std::size_t j = 0; j <= i; ++j) {
          const T sj = ds[j];
          const T* k = src + (b * seq + j) * width + d + h * dh;
          T* dk = dst + (b * seq + j) * width + d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) {
            dq[c] += sj * k[c];
            dk[c] += sj * q[c];
          }
        }
      }
    }
  });
}

template <typename T>
Var softmax_cross_entropy(BasicGraph<T>& g, Var logits, std::span<const std::int32_t> targets) {
  const auto& lv = g.value(logits);
  require_rank2(lv, "logits");
  const std::size_t n = lv.dim(0), v = lv.dim(1);
  if (targets.size() != n) throw DimensionError("one target per logits row is required");
  auto probs = std::make_shared<BasicTensor<T>>(lv.shape());
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::int32_t t = tv[r];
    if (t < 0 || static_cast<std::size_t>(t) >= v) {
      throw IndexError("target id " + std::to_string(t) + " outside [0, " + std::to_string(v) + ")");
    }
    const T* row = lv.raw() + r * v;
    T* pr = probs->raw() + r * v;
    T mx = row[0];
    for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    T z = 0;
    for (std::size_t j = 0; j < v; ++j) {
      pr[j] = std::exp(row[j] - mx);
      z += pr[j];
    }
    for (std::size_t j = 0; j < v; ++j) pr[j] /= z;
    total += static_cast<double>(std::log(z) - (row[static_cast<std::size_t>(t)] - mx));
  }
  auto out = BasicTensor<T>::scalar(static_cast<T>(total / static_cast<double>(n)));
  return g.record(std::move(out), {logits}, [probs, tv = std::move(tv), n, v](BasicGraph<T>& gr, Var self) {
    auto* dl = gr.grad_buffer(gr.inputs(self)[0]);
    if (dl == nullptr) return;
    const T upstream = gr.grad(self)[0] / static_cast<T>(n);
    for (std::size_t r = 0; r < n; ++r) {
      const T* pr = probs->raw() + r * v;
      T* d = dl->raw() + r * v;
      for (std::size_t j = 0; j < v; ++j) d[j] += upstream * pr[j];
      d[static_cast<std::size_t>(tv[r])] -= upstream;
    }
  });
}

template <typename T>
Var sum(BasicGraph<T>& g, Var x) {
  const auto& xv = g.value(x);
  T total = 0;
  for (T e : xv.data()) total += e;
  return g.record(BasicTensor<T>::scalar(total), {x}, [](BasicGraph<T>& gr, Var self) {
    const Var x = gr.inputs(self)[0];
    auto* dx = gr.grad_buffer(x);
    if (dx == nullptr) return;
    const T up = gr.grad(self)[0];
    for (auto& e : dx->data()) e += up;
  });
}

#define RELU_SPARSITY_INSTANTIATE_OPS(T)                                                           \
  template Var matmul<T>(BasicGraph<T>&, Var, Var);                                               \
  template Var add<T>(BasicGraph<T>&, Var, Var);                                                  \
  template Var add_bias<T>(BasicGraph<T>&, Var, Var);                                             \
  template Var relu<T>(BasicGraph<T>&, Var);                                                      \
  template Var column_mask<T>(BasicGraph<T>&, Var, std::span<const T>);                           \
  template Var layer_norm<T>(BasicGraph<T>&, Var, Var, Var, T);                                   \
  template Var embedding<T>(BasicGraph<T>&, Var, std::span<const std::int32_t>);                  \
  template Var causal_self_attention<T>(BasicGraph<T>&, Var, std::size_t, std::size_t, std::size_t); \
  template Var softmax_cross_entropy<T>(BasicGraph<T>&, Var, std::span<const std::int32_t>);      \
  template Var sum<T>(BasicGraph<T>&, Var);

RELU_SPARSITY_INSTANTIATE_OPS(float)
RELU_SPARSITY_INSTANTIATE_OPS(double)

#undef RELU_SPARSITY_INSTANTIATE_OPS

}  // namespace relu_sparsity::ops
