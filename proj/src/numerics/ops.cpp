#include "rfpx/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kernels.hpp"
#include "rfpx/error.hpp"

namespace rfpx::ops {

namespace {

using Backward = std::function<void(detail::Node&)>;

Tensor make_result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs,
                   Backward backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  if (grad_enabled()) {
    for (const auto& in : inputs) {
      if (in.requires_grad()) node->requires_grad = true;
    }
  }
  if (node->requires_grad) {
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

// Grad buffer of input `i`, or nullptr when that input needs no gradient.
double* input_grad(detail::Node& self, std::size_t i) {
  auto& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.ensure_grad();
  return in.grad.data();
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <typename F, typename D>
Tensor unary(const Tensor& a, F forward, D derivative_from_output) {
  std::vector<double> out(a.numel());
  const auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
  return make_result(a.shape(), std::move(out), {a}, [derivative_from_output](detail::Node& self) {
    double* ga = input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      ga[i] += self.grad[i] * derivative_from_output(self.value[i]);
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
  return make_result({m, n}, std::move(out), {a, b}, [](detail::Node& self) {
    const auto& A = *self.inputs[0];
    const auto& B = *self.inputs[1];
    const auto m = A.shape[0], k = A.shape[1], n = B.shape[1];
    if (double* ga = input_grad(self, 0)) {
      const auto bt = kernels::transposed(B.value.data(), k, n);
      kernels::gemm_acc(self.grad.data(), bt.data(), ga, m, n, k);
    }
    if (double* gb = input_grad(self, 1)) {
      const auto at = kernels::transposed(A.value.data(), m, k);
      kernels::gemm_acc(at.data(), self.grad.data(), gb, k, m, n);
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const auto m = a.rows(), n = a.cols();
  auto out = kernels::transposed(a.values().data(), m, n);
  return make_result({n, m}, std::move(out), {a}, [](detail::Node& self) {
    const auto n = self.shape[0], m = self.shape[1];
    if (double* ga = input_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const auto x = a.values(), y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (double* g = input_grad(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto x = a.values(), y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_rank2(a, "add_row");
  require_rank2(row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: cannot broadcast " + shape_string(row.shape()) + " onto " +
                         shape_string(a.shape()));
  }
  const auto m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const auto x = a.values(), r = row.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + r[j];
  }
  return make_result({m, n}, std::move(out), {a, row}, [](detail::Node& self) {
    const auto m = self.shape[0], n = self.shape[1];
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto x = a.values(), y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    const auto& x = self.inputs[0]->value;
    const auto& y = self.inputs[1]->value;
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * y[i];
    }
    if (double* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  const auto x = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](detail::Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
    }
  });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) throw DimensionError("scale_by: factor must hold one value, got " + shape_string(s.shape()));
  const double f = s.values()[0];
  std::vector<double> out(a.numel());
  const auto x = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * f;
  return make_result(a.shape(), std::move(out), {a, s}, [](detail::Node& self) {
    const auto& x = self.inputs[0]->value;
    const double f = self.inputs[1]->value[0];
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * f;
    }
    if (double* g = input_grad(self, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * x[i];
      g[0] += acc;
    }
  });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Tensor softmax_rows(const Tensor& a) {
  require_rank2(a, "softmax_rows");
  const auto m = a.rows(), n = a.cols();
  const auto x = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (std::isnan(row[j])) throw NumericInputError("softmax_rows: NaN in row " + std::to_string(i));
      mx = std::max(mx, row[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - mx);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  return make_result({m, n}, std::move(out), {a}, [](detail::Node& self) {
    double* g = input_grad(self, 0);
    const auto m = self.shape[0], n = self.shape[1];
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = self.value.data() + i * n;
      const double* gy = self.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const auto n = parts[0].cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) {
      throw DimensionError("concat_rows: column mismatch " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());

  auto node = std::make_shared<detail::Node>();
  node->shape = {m, n};
  node->value = std::move(out);
  if (grad_enabled())
    for (const auto& p : parts) node->requires_grad = node->requires_grad || p.requires_grad();
  if (node->requires_grad) {
    for (const auto& p : parts) node->inputs.push_back(p.node());
    node->backward = [](detail::Node& self) {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < self.inputs.size(); ++k) {
        const auto count = self.inputs[k]->value.size();
        if (double* g = input_grad(self, k)) {
          for (std::size_t i = 0; i < count; ++i) g[i] += self.grad[offset + i];
        }
        offset += count;
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_rows(std::span<const Tensor>(parts));
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  const auto m = a.rows(), na = a.cols(), nb = b.cols();
  std::vector<double> out(m * (na + nb));
  const auto x = a.values(), y = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(x.data() + i * na, na, out.data() + i * (na + nb));
    std::copy_n(y.data() + i * nb, nb, out.data() + i * (na + nb) + na);
  }
  return make_result({m, na + nb}, std::move(out), {a, b}, [na, nb](detail::Node& self) {
    const auto m = self.shape[0];
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < na; ++j) g[i * na + j] += self.grad[i * (na + nb) + j];
    }
    if (double* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < nb; ++j) g[i * nb + j] += self.grad[i * (na + nb) + na + j];
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_rows");
  if (begin >= end || end > a.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_string(a.shape()));
  }
  const auto n = a.cols();
  std::vector<double> out(a.values().begin() + begin * n, a.values().begin() + end * n);
  return make_result({end - begin, n}, std::move(out), {a}, [begin, n](detail::Node& self) {
    double* g = input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * n + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_cols");
  if (begin >= end || end > a.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_string(a.shape()));
  }
  const auto m = a.rows(), n = a.cols(), w = end - begin;
  std::vector<double> out(m * w);
  const auto x = a.values();
  for (std::size_t i = 0; i < m; ++i) std::copy_n(x.data() + i * n + begin, w, out.data() + i * w);
  return make_result({m, w}, std::move(out), {a}, [begin, n, w](detail::Node& self) {
    double* g = input_grad(self, 0);
    const auto m = self.shape[0];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor max_rows(const Tensor& a) {
  require_rank2(a, "max_rows");
  const auto m = a.rows(), n = a.cols();
  const auto x = a.values();
  std::vector<double> out(x.begin(), x.begin() + n);
  std::vector<std::size_t> argmax(n, 0);
  for (std::size_t i = 1; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (x[i * n + j] > out[j]) {
        out[j] = x[i * n + j];
        argmax[j] = i;
      }
    }
  }
  return make_result({1, n}, std::move(out), {a}, [argmax = std::move(argmax), n](detail::Node& self) {
    double* g = input_grad(self, 0);
    for (std::size_t j = 0; j < n; ++j) g[argmax[j] * n + j] += self.grad[j];
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return make_result({1, 1}, {total}, {a}, [](detail::Node& self) {
    double* g = input_grad(self, 0);
    const auto count = self.inputs[0]->value.size();
    for (std::size_t i = 0; i < count; ++i) g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor mse(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "mse");
  const auto diff = sub(prediction, target);
  return mean(mul(diff, diff));
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& labels) {
  require_same_shape(logits, labels, "bce_with_logits");
  if (labels.requires_grad()) throw ContractError("bce_with_logits: labels must not require grad");
  const auto z = logits.values(), y = labels.values();
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw ContractError("bce_with_logits: labels must be 0 or 1");
    total += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  return make_result({1, 1}, {total}, {logits, labels}, [](detail::Node& self) {
    double* g = input_grad(self, 0);
    const auto& z = self.inputs[0]->value;
    const auto& y = self.inputs[1]->value;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double p = z[i] >= 0 ? 1.0 / (1.0 + std::exp(-z[i])) : std::exp(z[i]) / (1.0 + std::exp(z[i]));
      g[i] += self.grad[0] * (p - y[i]);
    }
  });
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  require_rank2(q, "scaled_dot_attention");
  require_rank2(k, "scaled_dot_attention");
  require_rank2(v, "scaled_dot_attention");
  if (q.cols() != k.cols()) {
    throw DimensionError("scaled_dot_attention: query/key widths differ " + shape_string(q.shape()) + " vs " +
                         shape_string(k.shape()));
  }
  if (k.rows() != v.rows()) {
    throw DimensionError("scaled_dot_attention: key/value counts differ " + shape_string(k.shape()) + " vs " +
                         shape_string(v.shape()));
  }
  const auto nq = q.rows(), d = q.cols(), nk = k.rows(), dv = v.cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<double> scores(nq * nk, 0.0);
  {
    const auto kt = kernels::transposed(k.values().data(), nk, d);
    kernels::gemm_acc(q.values().data(), kt.data(), scores.data(), nq, d, nk);
  }
  for (double& s : scores) {
    if (std::isnan(s)) throw NumericInputError("scaled_dot_attention: NaN score");
    s *= inv_sqrt_d;
  }

  // Reductions over the key axis sum their terms in sorted order so the
  // result is exactly invariant under any joint permutation of (K, V).
  std::vector<double> terms(nk);
  auto canonical_sum = [&terms]() {
    std::sort(terms.begin(), terms.end());
    double total = 0.0;
    for (double t : terms) total += t;
    return total;
  };

  auto probs = std::make_shared<std::vector<double>>(nq * nk);
  auto& p = *probs;
  for (std::size_t i = 0; i < nq; ++i) {
    const double* row = scores.data() + i * nk;
    const double mx = *std::max_element(row, row + nk);
    for (std::size_t j = 0; j < nk; ++j) terms[j] = p[i * nk + j] = std::exp(row[j] - mx);
    const double total = canonical_sum();
    for (std::size_t j = 0; j < nk; ++j) p[i * nk + j] /= total;
  }

  std::vector<double> out(nq * dv);
  const auto vv = v.values();
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t c = 0; c < dv; ++c) {
      for (std::size_t j = 0; j < nk; ++j) terms[j] = p[i * nk + j] * vv[j * dv + c];
      out[i * dv + c] = canonical_sum();
    }
  }

  return make_result({nq, dv}, std::move(out), {q, k, v}, [probs, inv_sqrt_d](detail::Node& self) {
    const auto& Q = *self.inputs[0];
    const auto& K = *self.inputs[1];
    const auto& V = *self.inputs[2];
    const auto nq = Q.shape[0], d = Q.shape[1], nk = K.shape[0], dv = V.shape[1];
    const auto& P = *probs;
    if (double* gv = input_grad(self, 2)) {
      const auto pt = kernels::transposed(P.data(), nq, nk);
      kernels::gemm_acc(pt.data(), self.grad.data(), gv, nk, nq, dv);
    }
    if (!Q.requires_grad && !K.requires_grad) return;
    std::vector<double> dp(nq * nk, 0.0);
    {
      const auto vt = kernels::transposed(V.value.data(), nk, dv);
      kernels::gemm_acc(self.grad.data(), vt.data(), dp.data(), nq, dv, nk);
    }
    for (std::size_t i = 0; i < nq; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < nk; ++j) dot += dp[i * nk + j] * P[i * nk + j];
      for (std::size_t j = 0; j < nk; ++j) dp[i * nk + j] = P[i * nk + j] * (dp[i * nk + j] - dot) * inv_sqrt_d;
    }
    if (double* gq = input_grad(self, 0)) kernels::gemm_acc(dp.data(), K.value.data(), gq, nq, nk, d);
    if (double* gk = input_grad(self, 1)) {
      const auto dst = kernels::transposed(dp.data(), nq, nk);
      kernels::gemm_acc(dst.data(), Q.value.data(), gk, nk, nq, d);
    }
  });
}

}  // namespace rfpx::ops
