#include "bottomup/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace bottomup {

namespace mac_counter {
namespace {
thread_local std::uint64_t g_count = 0;
}
void reset() noexcept { g_count = 0; }
std::uint64_t get() noexcept { return g_count; }
void add(std::uint64_t n) noexcept { g_count += n; }
}  // namespace mac_counter

namespace {

void require_same_graph(const Var& a, const Var& b, const char* op) {
  if (&a.graph() != &b.graph()) throw ContractError(std::string(op) + ": operands live on different graphs");
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// c += a * b with a: MxK, b: KxN (row-major). Inner loop runs over N;
// zero entries of a (common after ReLU) are skipped.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c += a^T * b with a: KxM, b: KxN.
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c += a * b^T with a: MxK, b: NxK.
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_acc(a, bt.data(), c, m, k, n);
}

void softmax_inplace(std::span<double> v, std::size_t stride, std::size_t count) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) mx = std::max(mx, v[i * stride]);
  double z = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double e = std::exp(v[i * stride] - mx);
    v[i * stride] = e;
    z += e;
  }
  const double inv = 1.0 / z;
  for (std::size_t i = 0; i < count; ++i) v[i * stride] *= inv;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  gemm_acc(a.data().data(), b.data().data(), c.data().data(), m, k, n);
  mac_counter::add(static_cast<std::uint64_t>(m) * k * n);
  return c;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  Tensor t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Tensor softmax(const Tensor& x) {
  require_rank(x, 1, "softmax");
  Tensor y = x;
  softmax_inplace(y.data(), 1, y.size());
  return y;
}

Tensor softmax_columns(const Tensor& x) {
  Tensor y = x;
  softmax_columns_inplace(y);
  return y;
}

void softmax_columns_inplace(Tensor& x) {
  require_rank(x, 2, "softmax_columns");
  const auto h = x.dim(0), w = x.dim(1);
  for (std::size_t j = 0; j < w; ++j) softmax_inplace(x.data().subspan(j), w, h);
}

Var add(const Var& a, const Var& b) {
  require_same_graph(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  add_into(out, b.value());
  return a.graph().record(std::move(out), {a, b}, [](const Tensor& up, const Tensor&, GradSlots g) {
    if (g[0]) add_into(*g[0], up);
    if (g[1]) add_into(*g[1], up);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_graph(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return a.graph().record(std::move(out), {a, b}, [](const Tensor& up, const Tensor&, GradSlots g) {
    if (g[0]) add_into(*g[0], up);
    if (g[1]) {
      auto d = g[1]->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= up[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_graph(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  const Tensor& av = a.value();
  const Tensor& bt = b.value();
  return a.graph().record(std::move(out), {a, b}, [&av, &bt](const Tensor& up, const Tensor&, GradSlots g) {
    if (g[0]) {
      auto d = g[0]->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i] * bt[i];
    }
    if (g[1]) {
      auto d = g[1]->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i] * av[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= s;
  return a.graph().record(std::move(out), {a}, [s](const Tensor& up, const Tensor&, GradSlots g) {
    auto d = g[0]->data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * up[i];
  });
}

Var add_bias(const Var& x, const Var& bias) {
  require_same_graph(x, bias, "add_bias");
  require_rank(x.value(), 2, "add_bias");
  const auto m = x.value().dim(0), n = x.value().dim(1);
  if (bias.value().size() != n) {
    throw DimensionError("add_bias: bias " + shape_to_string(bias.shape()) + " does not match rows of " +
                         shape_to_string(x.shape()));
  }
  Tensor out = x.value();
  const auto& b = bias.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += b[j];
  return x.graph().record(std::move(out), {x, bias}, [m, n](const Tensor& up, const Tensor&, GradSlots g) {
    if (g[0]) add_into(*g[0], up);
    if (g[1]) {
      auto d = g[1]->data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) d[j] += up.at(i, j);
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  require_same_graph(a, b, "matmul");
  Tensor out = matmul(a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  return a.graph().record(std::move(out), {a, b}, [&av, &bv](const Tensor& up, const Tensor&, GradSlots g) {
    const auto m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    // dA = up * B^T, dB = A^T * up
    if (g[0]) gemm_nt_acc(up.data().data(), bv.data().data(), g[0]->data().data(), m, n, k);
    if (g[1]) gemm_tn_acc(av.data().data(), up.data().data(), g[1]->data().data(), k, m, n);
  });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  const Tensor& xv = x.value();
  return x.graph().record(std::move(out), {x}, [&xv](const Tensor& up, const Tensor&, GradSlots g) {
    auto d = g[0]->data();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (xv[i] > 0.0) d[i] += up[i];
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  return x.graph().record(std::move(out), {x}, [](const Tensor& up, const Tensor& y, GradSlots g) {
    auto d = g[0]->data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i] * y[i] * (1.0 - y[i]);
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.graph().record(Tensor::scalar(s), {x}, [](const Tensor& up, const Tensor&, GradSlots g) {
    const double u = up[0];
    for (auto& d : g[0]->data()) d += u;
  });
}

namespace {

// Softmax Jacobian-vector product along a strided lane:
// dx_i += y_i * (up_i - sum_k up_k y_k).
void softmax_backward_lane(const Tensor& y, const Tensor& up, Tensor& dx, std::size_t offset,
                           std::size_t stride, std::size_t count) {
  double dot = 0.0;
  for (std::size_t i = 0; i < count; ++i) dot += up[offset + i * stride] * y[offset + i * stride];
  for (std::size_t i = 0; i < count; ++i) {
    const auto idx = offset + i * stride;
    dx[idx] += y[idx] * (up[idx] - dot);
  }
}

}  // namespace

Var softmax(const Var& x) {
  return x.graph().record(softmax(x.value()), {x}, [](const Tensor& up, const Tensor& y, GradSlots g) {
    softmax_backward_lane(y, up, *g[0], 0, 1, y.size());
  });
}

Var softmax_columns(const Var& x) {
  return x.graph().record(softmax_columns(x.value()), {x}, [](const Tensor& up, const Tensor& y, GradSlots g) {
    const auto h = y.dim(0), w = y.dim(1);
    for (std::size_t j = 0; j < w; ++j) softmax_backward_lane(y, up, *g[0], j, w, h);
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.graph().record(std::move(out), {x}, [](const Tensor& up, const Tensor&, GradSlots g) { add_into(*g[0], up); });
}

Var concat_channels(const Var& a, const Var& b) {
  require_same_graph(a, b, "concat_channels");
  require_rank(a.value(), 3, "concat_channels");
  require_rank(b.value(), 3, "concat_channels");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.dim(0) != bv.dim(0) || av.dim(1) != bv.dim(1)) {
    throw DimensionError("concat_channels: spatial mismatch " + shape_to_string(av.shape()) + " vs " +
                         shape_to_string(bv.shape()));
  }
  const auto pixels = av.dim(0) * av.dim(1);
  const auto ca = av.dim(2), cb = bv.dim(2);
  Tensor out({av.dim(0), av.dim(1), ca + cb});
  for (std::size_t p = 0; p < pixels; ++p) {
    std::copy_n(av.data().data() + p * ca, ca, out.data().data() + p * (ca + cb));
    std::copy_n(bv.data().data() + p * cb, cb, out.data().data() + p * (ca + cb) + ca);
  }
  return a.graph().record(std::move(out), {a, b}, [pixels, ca, cb](const Tensor& up, const Tensor&, GradSlots g) {
    for (std::size_t p = 0; p < pixels; ++p) {
      if (g[0])
        for (std::size_t c = 0; c < ca; ++c) (*g[0])[p * ca + c] += up[p * (ca + cb) + c];
      if (g[1])
        for (std::size_t c = 0; c < cb; ++c) (*g[1])[p * cb + c] += up[p * (ca + cb) + ca + c];
    }
  });
}

Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
  require_rank(x.value(), 2, "gather_rows");
  const auto m = x.value().dim(0), n = x.value().dim(1);
  if (rows.empty()) throw ContractError("gather_rows: empty index list");
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Tensor out({idx.size(), n});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= m) {
      throw DimensionError("gather_rows: row " + std::to_string(idx[r]) + " out of range for " +
                           shape_to_string(x.shape()));
    }
    std::copy_n(x.value().data().data() + idx[r] * n, n, out.data().data() + r * n);
  }
  return x.graph().record(std::move(out), {x}, [idx = std::move(idx), n](const Tensor& up, const Tensor&, GradSlots g) {
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < n; ++c) (*g[0])[idx[r] * n + c] += up[r * n + c];
  });
}

Var pointwise_linear(const Var& x, const Var& w, const Var& b) {
  require_rank(x.value(), 3, "pointwise_linear");
  require_rank(w.value(), 2, "pointwise_linear");
  const auto h = x.value().dim(0), wd = x.value().dim(1), cin = x.value().dim(2);
  if (w.value().dim(0) != cin) {
    throw DimensionError("pointwise_linear: weights " + shape_to_string(w.shape()) + " do not accept input " +
                         shape_to_string(x.shape()));
  }
  const auto cout = w.value().dim(1);
  Var flat = reshape(x, {h * wd, cin});
  Var y = add_bias(matmul(flat, w), b);
  return reshape(y, {h, wd, cout});
}

namespace {
constexpr double kLogEps = 1e-12;
}

Var focal_loss(const Var& logits, const Tensor& targets) {
  require_same_shape(logits.value(), targets, "focal_loss");
  const Tensor& x = logits.value();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-x[i]));
    const double t = targets[i];
    total -= t * (1 - p) * (1 - p) * std::log(p + kLogEps) + (1 - t) * p * p * std::log(1 - p + kLogEps);
  }
  return logits.graph().record(Tensor::scalar(total), {logits}, [&x, targets](const Tensor& up, const Tensor&, GradSlots g) {
    const double u = up[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-x[i]));
      const double t = targets[i];
      const double d_pos = 2 * (1 - p) * std::log(p + kLogEps) - (1 - p) * (1 - p) / (p + kLogEps);
      const double d_neg = -2 * p * std::log(1 - p + kLogEps) + p * p / (1 - p + kLogEps);
      (*g[0])[i] += u * (t * d_pos + (1 - t) * d_neg) * p * (1 - p);
    }
  });
}

Var l1_loss(const Var& x, const Tensor& target) {
  require_same_shape(x.value(), target, "l1_loss");
  const Tensor& xv = x.value();
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += std::abs(xv[i] - target[i]);
  return x.graph().record(Tensor::scalar(total), {x}, [&xv, target](const Tensor& up, const Tensor&, GradSlots g) {
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double d = xv[i] - target[i];
      (*g[0])[i] += up[0] * static_cast<double>((d > 0) - (d < 0));
    }
  });
}

}  // namespace bottomup
