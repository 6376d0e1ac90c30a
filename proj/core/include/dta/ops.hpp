// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations over Tape/Var. Forward computation runs
// eagerly at call time; each op registers a closure that scatters the
// output gradient to its parents. Closures hold Var handles and resolve
// pointers through the tape when the reverse sweep runs, and they must
// guard every accumulation with needs_grad on the receiving parent.
#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <span>
#include <vector>

#include "dta/errors.hpp"
#include "dta/kernels.hpp"
#include "dta/tensor.hpp"

namespace dta {

namespace detail {

template <class T>
Tape<T>& same_tape(Var<T> a, Var<T> b) {
  assert(a.valid() && b.valid() && a.tape == b.tape);
  (void)b;
  return *a.tape;
}

inline std::string shape_str(const std::vector<int>& s) {
  std::string r = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) r += " x ";
    r += std::to_string(s[i]);
  }
  return r + "]";
}

// Cross-input shape contract; violations are reported, not asserted,
// because they can reach release builds through config-sized dimensions.
template <class T>
void require_shapes(bool ok, const char* op, const Tape<T>& t, Var<T> a, Var<T> b) {
  if (!ok)
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                                shape_str(t.shape(a)) + " and " + shape_str(t.shape(b)));
}

}  // namespace detail

// [m x k] * [k x n] -> [m x n]
template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  const auto& sa = t.shape(a);
  const auto& sb = t.shape(b);
  detail::require_shapes(sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0], "matmul", t, a, b);
  const int m = sa[0], k = sa[1], n = sb[1];
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  Var<T> out = t.make({m, n}, ng, {});
  kernels::gemm_nn_acc(t.data_ptr(a), t.data_ptr(b), t.data_ptr(out), m, k, n);
  t.set_back(out, [a, b, out, m, k, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    if (tt.needs_grad(a)) kernels::gemm_nt_acc(g, tt.data_ptr(b), tt.grad_ptr(a), m, n, k);
    if (tt.needs_grad(b)) kernels::gemm_tn_acc(tt.data_ptr(a), g, tt.grad_ptr(b), k, m, n);
  });
  return out;
}

// [m x k] * [n x k]^T -> [m x n]
template <class T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  const auto& sa = t.shape(a);
  const auto& sb = t.shape(b);
  detail::require_shapes(sa.size() == 2 && sb.size() == 2 && sa[1] == sb[1], "matmul_nt", t, a, b);
  const int m = sa[0], k = sa[1], n = sb[0];
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  Var<T> out = t.make({m, n}, ng, {});
  kernels::gemm_nt_acc(t.data_ptr(a), t.data_ptr(b), t.data_ptr(out), m, k, n);
  t.set_back(out, [a, b, out, m, k, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    if (tt.needs_grad(a)) kernels::gemm_nn_acc(g, tt.data_ptr(b), tt.grad_ptr(a), m, n, k);
    if (tt.needs_grad(b)) kernels::gemm_tn_acc(g, tt.data_ptr(a), tt.grad_ptr(b), n, m, k);
  });
  return out;
}

template <class T>
Var<T> transpose(Var<T> a) {
  Tape<T>& t = *a.tape;
  const auto& sa = t.shape(a);
  assert(sa.size() == 2);
  const int m = sa[0], n = sa[1];
  Var<T> out = t.make({n, m}, t.needs_grad(a), {});
  const T* x = t.data_ptr(a);
  T* y = t.data_ptr(out);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) y[static_cast<size_t>(j) * m + i] = x[static_cast<size_t>(i) * n + j];
  t.set_back(out, [a, out, m, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    T* ga = tt.grad_ptr(a);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) ga[static_cast<size_t>(i) * n + j] += g[static_cast<size_t>(j) * m + i];
  });
  return out;
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  detail::require_shapes(t.shape(a) == t.shape(b), "add", t, a, b);
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  Var<T> out = t.make(t.shape(a), ng, {});
  const int64_t n = t.numel(out);
  const T* xa = t.data_ptr(a);
  const T* xb = t.data_ptr(b);
  T* y = t.data_ptr(out);
  for (int64_t i = 0; i < n; ++i) y[i] = xa[i] + xb[i];
  t.set_back(out, [a, b, out, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    if (tt.needs_grad(a)) {
      T* ga = tt.grad_ptr(a);
      for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
    }
    if (tt.needs_grad(b)) {
      T* gb = tt.grad_ptr(b);
      for (int64_t i = 0; i < n; ++i) gb[i] += g[i];
    }
  });
  return out;
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  detail::require_shapes(t.shape(a) == t.shape(b), "sub", t, a, b);
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  Var<T> out = t.make(t.shape(a), ng, {});
  const int64_t n = t.numel(out);
  const T* xa = t.data_ptr(a);
  const T* xb = t.data_ptr(b);
  T* y = t.data_ptr(out);
  for (int64_t i = 0; i < n; ++i) y[i] = xa[i] - xb[i];
  t.set_back(out, [a, b, out, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    if (tt.needs_grad(a)) {
      T* ga = tt.grad_ptr(a);
      for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
    }
    if (tt.needs_grad(b)) {
      T* gb = tt.grad_ptr(b);
      for (int64_t i = 0; i < n; ++i) gb[i] -= g[i];
    }
  });
  return out;
}

// Elementwise product.
template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  detail::require_shapes(t.shape(a) == t.shape(b), "mul", t, a, b);
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  Var<T> out = t.make(t.shape(a), ng, {});
  const int64_t n = t.numel(out);
  const T* xa = t.data_ptr(a);
  const T* xb = t.data_ptr(b);
  T* y = t.data_ptr(out);
  for (int64_t i = 0; i < n; ++i) y[i] = xa[i] * xb[i];
  t.set_back(out, [a, b, out, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    if (tt.needs_grad(a)) {
      T* ga = tt.grad_ptr(a);
      const T* xb2 = tt.data_ptr(b);
      for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * xb2[i];
    }
    if (tt.needs_grad(b)) {
      T* gb = tt.grad_ptr(b);
      const T* xa2 = tt.data_ptr(a);
      for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * xa2[i];
    }
  });
  return out;
}

template <class T>
Var<T> scale(Var<T> a, T c) {
  Tape<T>& t = *a.tape;
  Var<T> out = t.make(t.shape(a), t.needs_grad(a), {});
  const int64_t n = t.numel(out);
  const T* x = t.data_ptr(a);
  T* y = t.data_ptr(out);
  for (int64_t i = 0; i < n; ++i) y[i] = c * x[i];
  t.set_back(out, [a, out, n, c]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    T* ga = tt.grad_ptr(a);
    for (int64_t i = 0; i < n; ++i) ga[i] += c * g[i];
  });
  return out;
}

// [m x n] + broadcast row [1 x n]
template <class T>
Var<T> add_rowvec(Var<T> a, Var<T> v) {
  Tape<T>& t = detail::same_tape(a, v);
  const auto& sa = t.shape(a);
  const auto& sv = t.shape(v);
  detail::require_shapes(sa.size() == 2 && sv.size() == 2 && sv[0] == 1 && sv[1] == sa[1],
                         "add_rowvec", t, a, v);
  const int m = sa[0], n = sa[1];
  const bool ng = t.needs_grad(a) || t.needs_grad(v);
  Var<T> out = t.make({m, n}, ng, {});
  const T* x = t.data_ptr(a);
  const T* b = t.data_ptr(v);
  T* y = t.data_ptr(out);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) y[static_cast<size_t>(i) * n + j] = x[static_cast<size_t>(i) * n + j] + b[j];
  t.set_back(out, [a, v, out, m, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    if (tt.needs_grad(a)) {
      T* ga = tt.grad_ptr(a);
      for (int64_t i = 0; i < static_cast<int64_t>(m) * n; ++i) ga[i] += g[i];
    }
    if (tt.needs_grad(v)) {
      T* gv = tt.grad_ptr(v);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) gv[j] += g[static_cast<size_t>(i) * n + j];
    }
  });
  return out;
}

// [m x n] + broadcast column [m x 1]
template <class T>
Var<T> add_colvec(Var<T> a, Var<T> v) {
  Tape<T>& t = detail::same_tape(a, v);
  const auto& sa = t.shape(a);
  const auto& sv = t.shape(v);
  detail::require_shapes(sa.size() == 2 && sv.size() == 2 && sv[0] == sa[0] && sv[1] == 1,
                         "add_colvec", t, a, v);
  const int m = sa[0], n = sa[1];
  const bool ng = t.needs_grad(a) || t.needs_grad(v);
  Var<T> out = t.make({m, n}, ng, {});
  const T* x = t.data_ptr(a);
  const T* b = t.data_ptr(v);
  T* y = t.data_ptr(out);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) y[static_cast<size_t>(i) * n + j] = x[static_cast<size_t>(i) * n + j] + b[i];
  t.set_back(out, [a, v, out, m, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    if (tt.needs_grad(a)) {
      T* ga = tt.grad_ptr(a);
      for (int64_t i = 0; i < static_cast<int64_t>(m) * n; ++i) ga[i] += g[i];
    }
    if (tt.needs_grad(v)) {
      T* gv = tt.grad_ptr(v);
      for (int i = 0; i < m; ++i) {
        T s = 0;
        for (int j = 0; j < n; ++j) s += g[static_cast<size_t>(i) * n + j];
        gv[i] += s;
      }
    }
  });
  return out;
}

// max(0, x); the subgradient at exactly zero is taken as zero.
template <class T>
Var<T> relu(Var<T> a) {
  Tape<T>& t = *a.tape;
  Var<T> out = t.make(t.shape(a), t.needs_grad(a), {});
  const int64_t n = t.numel(out);
  const T* x = t.data_ptr(a);
  T* y = t.data_ptr(out);
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  t.set_back(out, [a, out, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    const T* x2 = tt.data_ptr(a);
    T* ga = tt.grad_ptr(a);
    for (int64_t i = 0; i < n; ++i)
      if (x2[i] > T(0)) ga[i] += g[i];
  });
  return out;
}

template <class T>
Var<T> exp(Var<T> a) {
  Tape<T>& t = *a.tape;
  Var<T> out = t.make(t.shape(a), t.needs_grad(a), {});
  const int64_t n = t.numel(out);
  const T* x = t.data_ptr(a);
  T* y = t.data_ptr(out);
  for (int64_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
  t.set_back(out, [a, out, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    const T* y2 = tt.data_ptr(out);
    T* ga = tt.grad_ptr(a);
    for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * y2[i];
  });
  return out;
}

template <class T>
Var<T> log(Var<T> a) {
  Tape<T>& t = *a.tape;
  Var<T> out = t.make(t.shape(a), t.needs_grad(a), {});
  const int64_t n = t.numel(out);
  const T* x = t.data_ptr(a);
  T* y = t.data_ptr(out);
  for (int64_t i = 0; i < n; ++i) {
    if (!(x[i] > T(0))) throw NumericError("log: input not strictly positive");
    y[i] = std::log(x[i]);
  }
  t.set_back(out, [a, out, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    const T* x2 = tt.data_ptr(a);
    T* ga = tt.grad_ptr(a);
    for (int64_t i = 0; i < n; ++i) ga[i] += g[i] / x2[i];
  });
  return out;
}

template <class T>
Var<T> sum(Var<T> a) {
  Tape<T>& t = *a.tape;
  Var<T> out = t.make({1}, t.needs_grad(a), {});
  const int64_t n = t.numel(a);
  const T* x = t.data_ptr(a);
  T s = 0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  t.data_ptr(out)[0] = s;
  t.set_back(out, [a, out, n]() {
    Tape<T>& tt = *out.tape;
    const T g = tt.grad_ptr(out)[0];
    T* ga = tt.grad_ptr(a);
    for (int64_t i = 0; i < n; ++i) ga[i] += g;
  });
  return out;
}

template <class T>
Var<T> mean(Var<T> a) {
  Tape<T>& t = *a.tape;
  const int64_t n = t.numel(a);
  Var<T> out = t.make({1}, t.needs_grad(a), {});
  const T* x = t.data_ptr(a);
  T s = 0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  t.data_ptr(out)[0] = s / static_cast<T>(n);
  t.set_back(out, [a, out, n]() {
    Tape<T>& tt = *out.tape;
    const T g = tt.grad_ptr(out)[0] / static_cast<T>(n);
    T* ga = tt.grad_ptr(a);
    for (int64_t i = 0; i < n; ++i) ga[i] += g;
  });
  return out;
}

// Row-wise log-sum-exp with max-shift stabilization: [m x n] -> [m x 1].
template <class T>
Var<T> lse_rows(Var<T> a) {
  Tape<T>& t = *a.tape;
  const auto& sa = t.shape(a);
  assert(sa.size() == 2);
  const int m = sa[0], n = sa[1];
  Var<T> out = t.make({m, 1}, t.needs_grad(a), {});
  const T* x = t.data_ptr(a);
  T* y = t.data_ptr(out);
  for (int i = 0; i < m; ++i) {
    const T* row = x + static_cast<size_t>(i) * n;
    T mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    T s = 0;
    for (int j = 0; j < n; ++j) s += std::exp(row[j] - mx);
    y[i] = mx + std::log(s);
  }
  t.set_back(out, [a, out, m, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    const T* x2 = tt.data_ptr(a);
    const T* y2 = tt.data_ptr(out);
    T* ga = tt.grad_ptr(a);
    for (int i = 0; i < m; ++i) {
      const T* row = x2 + static_cast<size_t>(i) * n;
      T* grow = ga + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) grow[j] += g[i] * std::exp(row[j] - y2[i]);
    }
  });
  return out;
}

// Main diagonal of a square matrix: [n x n] -> [n x 1].
template <class T>
Var<T> diagonal(Var<T> a) {
  Tape<T>& t = *a.tape;
  const auto& sa = t.shape(a);
  assert(sa.size() == 2 && sa[0] == sa[1]);
  const int n = sa[0];
  Var<T> out = t.make({n, 1}, t.needs_grad(a), {});
  const T* x = t.data_ptr(a);
  T* y = t.data_ptr(out);
  for (int i = 0; i < n; ++i) y[i] = x[static_cast<size_t>(i) * n + i];
  t.set_back(out, [a, out, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    T* ga = tt.grad_ptr(a);
    for (int i = 0; i < n; ++i) ga[static_cast<size_t>(i) * n + i] += g[i];
  });
  return out;
}

// Column-wise max: [m x n] -> [1 x n]. The gradient flows only to the
// first row attaining each column's max.
template <class T>
Var<T> colmax(Var<T> a) {
  Tape<T>& t = *a.tape;
  const auto& sa = t.shape(a);
  assert(sa.size() == 2);
  const int m = sa[0], n = sa[1];
  Var<T> out = t.make({1, n}, t.needs_grad(a), {});
  const T* x = t.data_ptr(a);
  T* y = t.data_ptr(out);
  std::vector<int> arg(static_cast<size_t>(n), 0);
  for (int j = 0; j < n; ++j) {
    T best = x[j];
    int bi = 0;
    for (int i = 1; i < m; ++i) {
      const T v = x[static_cast<size_t>(i) * n + j];
      if (v > best) {
        best = v;
        bi = i;
      }
    }
    y[j] = best;
    arg[static_cast<size_t>(j)] = bi;
  }
  t.set_back(out, [a, out, n, arg = std::move(arg)]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    T* ga = tt.grad_ptr(a);
    const int cols = tt.shape(a)[1];
    for (int j = 0; j < n; ++j) ga[static_cast<size_t>(arg[static_cast<size_t>(j)]) * cols + j] += g[j];
  });
  return out;
}

// Row-wise max: [m x n] -> [m x 1]. The gradient flows only to the first
// column attaining each row's max.
template <class T>
Var<T> rowmax(Var<T> a) {
  Tape<T>& t = *a.tape;
  const auto& sa = t.shape(a);
  assert(sa.size() == 2);
  const int m = sa[0], n = sa[1];
  Var<T> out = t.make({m, 1}, t.needs_grad(a), {});
  const T* x = t.data_ptr(a);
  T* y = t.data_ptr(out);
  std::vector<int> arg(static_cast<size_t>(m), 0);
  for (int i = 0; i < m; ++i) {
    const T* row = x + static_cast<size_t>(i) * n;
    T best = row[0];
    int bj = 0;
    for (int j = 1; j < n; ++j) {
      if (row[j] > best) {
        best = row[j];
        bj = j;
      }
    }
    y[i] = best;
    arg[static_cast<size_t>(i)] = bj;
  }
  t.set_back(out, [a, out, m, n, arg = std::move(arg)]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    T* ga = tt.grad_ptr(a);
    for (int i = 0; i < m; ++i) ga[static_cast<size_t>(i) * n + arg[static_cast<size_t>(i)]] += g[i];
  });
  return out;
}

// Stack rank-2 blocks with equal column counts along the row axis.
template <class T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  assert(!parts.empty());
  Tape<T>& t = *parts[0].tape;
  const int n = t.shape(parts[0])[1];
  int mtotal = 0;
  bool ng = false;
  for (const Var<T>& p : parts) {
    assert(p.tape == &t);
    const auto& sp = t.shape(p);
    detail::require_shapes(sp.size() == 2 && sp[1] == n, "concat_rows", t, parts[0], p);
    mtotal += sp[0];
    ng = ng || t.needs_grad(p);
  }
  Var<T> out = t.make({mtotal, n}, ng, {});
  T* y = t.data_ptr(out);
  int row = 0;
  for (const Var<T>& p : parts) {
    const auto src = t.data(p);
    std::copy(src.begin(), src.end(), y + static_cast<size_t>(row) * n);
    row += t.shape(p)[0];
  }
  std::vector<Var<T>> held(parts.begin(), parts.end());
  t.set_back(out, [held = std::move(held), out, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    int row2 = 0;
    for (const Var<T>& p : held) {
      const int mp = tt.shape(p)[0];
      if (tt.needs_grad(p)) {
        T* gp = tt.grad_ptr(p);
        const T* gsrc = g + static_cast<size_t>(row2) * n;
        for (int64_t i = 0; i < static_cast<int64_t>(mp) * n; ++i) gp[i] += gsrc[i];
      }
      row2 += mp;
    }
  });
  return out;
}

template <class T>
Var<T> concat_rows(std::initializer_list<Var<T>> parts) {
  std::vector<Var<T>> v(parts);
  return concat_rows(std::span<const Var<T>>(v));
}

// Join two rank-2 blocks with equal row counts along the column axis.
template <class T>
Var<T> concat_cols(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  const auto& sa = t.shape(a);
  const auto& sb = t.shape(b);
  detail::require_shapes(sa.size() == 2 && sb.size() == 2 && sa[0] == sb[0], "concat_cols", t, a, b);
  const int m = sa[0], na = sa[1], nb = sb[1];
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  Var<T> out = t.make({m, na + nb}, ng, {});
  const T* xa = t.data_ptr(a);
  const T* xb = t.data_ptr(b);
  T* y = t.data_ptr(out);
  for (int i = 0; i < m; ++i) {
    T* row = y + static_cast<size_t>(i) * (na + nb);
    std::copy_n(xa + static_cast<size_t>(i) * na, na, row);
    std::copy_n(xb + static_cast<size_t>(i) * nb, nb, row + na);
  }
  t.set_back(out, [a, b, out, m, na, nb]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    if (tt.needs_grad(a)) {
      T* ga = tt.grad_ptr(a);
      for (int i = 0; i < m; ++i) {
        const T* grow = g + static_cast<size_t>(i) * (na + nb);
        for (int j = 0; j < na; ++j) ga[static_cast<size_t>(i) * na + j] += grow[j];
      }
    }
    if (tt.needs_grad(b)) {
      T* gb = tt.grad_ptr(b);
      for (int i = 0; i < m; ++i) {
        const T* grow = g + static_cast<size_t>(i) * (na + nb) + na;
        for (int j = 0; j < nb; ++j) gb[static_cast<size_t>(i) * nb + j] += grow[j];
      }
    }
  });
  return out;
}

// Select rows by index; repeated indices accumulate gradient into the
// same source row.
template <class T>
Var<T> gather_rows(Var<T> a, std::vector<int> idx) {
  Tape<T>& t = *a.tape;
  const auto& sa = t.shape(a);
  assert(sa.size() == 2);
  const int m = sa[0], n = sa[1];
  const int r = static_cast<int>(idx.size());
  assert(r > 0);
  for (int i : idx) {
    assert(i >= 0 && i < m);
    (void)i;
  }
  (void)m;
  Var<T> out = t.make({r, n}, t.needs_grad(a), {});
  const T* x = t.data_ptr(a);
  T* y = t.data_ptr(out);
  for (int i = 0; i < r; ++i)
    std::copy_n(x + static_cast<size_t>(idx[static_cast<size_t>(i)]) * n, n, y + static_cast<size_t>(i) * n);
  t.set_back(out, [a, out, n, r, idx = std::move(idx)]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    T* ga = tt.grad_ptr(a);
    for (int i = 0; i < r; ++i) {
      T* dst = ga + static_cast<size_t>(idx[static_cast<size_t>(i)]) * n;
      const T* src = g + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) dst[j] += src[j];
    }
  });
  return out;
}

// Token embedding laid out channel-major for the convolution stack:
// w is [vocab x e], ids has length L, output is [e x L] whose column p
// is row ids[p] of w.
template <class T>
Var<T> embedding_cols(Var<T> w, std::vector<int> ids) {
  Tape<T>& t = *w.tape;
  const auto& sw = t.shape(w);
  assert(sw.size() == 2);
  const int vocab = sw[0], e = sw[1];
  const int len = static_cast<int>(ids.size());
  assert(len > 0);
  for (int id : ids) {
    assert(id >= 0 && id < vocab);
    (void)id;
  }
  (void)vocab;
  Var<T> out = t.make({e, len}, t.needs_grad(w), {});
  const T* x = t.data_ptr(w);
  T* y = t.data_ptr(out);
  for (int p = 0; p < len; ++p) {
    const T* row = x + static_cast<size_t>(ids[static_cast<size_t>(p)]) * e;
    for (int r = 0; r < e; ++r) y[static_cast<size_t>(r) * len + p] = row[r];
  }
  t.set_back(out, [w, out, e, len, ids = std::move(ids)]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    T* gw = tt.grad_ptr(w);
    for (int p = 0; p < len; ++p) {
      T* dst = gw + static_cast<size_t>(ids[static_cast<size_t>(p)]) * e;
      for (int r = 0; r < e; ++r) dst[r] += g[static_cast<size_t>(r) * len + p];
    }
  });
  return out;
}

// Valid stride-1 cross-correlation: x is [cin x l], w is [cout x cin x k],
// output is [cout x (l - k + 1)].
template <class T>
Var<T> conv1d(Var<T> x, Var<T> w) {
  Tape<T>& t = detail::same_tape(x, w);
  const auto& sx = t.shape(x);
  const auto& sw = t.shape(w);
  detail::require_shapes(sx.size() == 2 && sw.size() == 3 && sw[1] == sx[0] && sx[1] >= sw[2],
                         "conv1d", t, x, w);
  const int cin = sx[0], l = sx[1], cout = sw[0], k = sw[2];
  const int lout = l - k + 1;
  const bool ng = t.needs_grad(x) || t.needs_grad(w);
  Var<T> out = t.make({cout, lout}, ng, {});
  kernels::conv1d_acc(t.data_ptr(x), t.data_ptr(w), t.data_ptr(out), cin, l, cout, k);
  t.set_back(out, [x, w, out, cin, l, cout, k]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    if (tt.needs_grad(x)) kernels::conv1d_data_grad_acc(g, tt.data_ptr(w), tt.grad_ptr(x), cin, l, cout, k);
    if (tt.needs_grad(w)) kernels::conv1d_weight_grad_acc(tt.data_ptr(x), g, tt.grad_ptr(w), cin, l, cout, k);
  });
  return out;
}

// Row-wise Euclidean norm: [m x n] -> [m x 1]. A zero row has norm 0 and
// is treated as locally constant (subgradient 0).
template <class T>
Var<T> rownorm(Var<T> a) {
  Tape<T>& t = *a.tape;
  const auto& sa = t.shape(a);
  assert(sa.size() == 2);
  const int m = sa[0], n = sa[1];
  Var<T> out = t.make({m, 1}, t.needs_grad(a), {});
  const T* x = t.data_ptr(a);
  T* y = t.data_ptr(out);
  for (int i = 0; i < m; ++i) {
    const T* row = x + static_cast<size_t>(i) * n;
    T d2 = 0;
    for (int j = 0; j < n; ++j) d2 += row[j] * row[j];
    y[i] = std::sqrt(d2);
  }
  t.set_back(out, [a, out, m, n]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    const T* x2 = tt.data_ptr(a);
    const T* y2 = tt.data_ptr(out);
    T* ga = tt.grad_ptr(a);
    for (int i = 0; i < m; ++i) {
      if (y2[i] == T(0)) continue;
      const T s = g[i] / y2[i];
      const T* row = x2 + static_cast<size_t>(i) * n;
      T* grow = ga + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) grow[j] += s * row[j];
    }
  });
  return out;
}

// log of the mean over unordered distinct row pairs of exp(-2 * ||xu - xv||_2).
// Rows are treated as points; coincident rows contribute exp(0) and are
// locally constant (zero subgradient for their pair term).
template <class T>
Var<T> uniformity_loss(Var<T> x) {
  Tape<T>& t = *x.tape;
  const auto& sx = t.shape(x);
  assert(sx.size() == 2 && sx[0] >= 2);
  const int m = sx[0], n = sx[1];
  const T pairs = static_cast<T>(m) * static_cast<T>(m - 1) / T(2);
  const T* xd = t.data_ptr(x);
  T s = 0;
  for (int u = 0; u < m; ++u) {
    const T* xu = xd + static_cast<size_t>(u) * n;
    for (int v = u + 1; v < m; ++v) {
      const T* xv = xd + static_cast<size_t>(v) * n;
      T d2 = 0;
      for (int j = 0; j < n; ++j) {
        const T d = xu[j] - xv[j];
        d2 += d * d;
      }
      s += std::exp(T(-2) * std::sqrt(d2));
    }
  }
  if (!(s > T(0)) || !std::isfinite(s))
    throw NumericError("uniformity: pair kernel sum is not positive and finite");
  Var<T> out = t.make({1}, t.needs_grad(x), {});
  t.data_ptr(out)[0] = std::log(s / pairs);
  t.set_back(out, [x, out, m, n, s]() {
    Tape<T>& tt = *out.tape;
    const T g = tt.grad_ptr(out)[0];
    const T* xd2 = tt.data_ptr(x);
    T* gx = tt.grad_ptr(x);
    for (int u = 0; u < m; ++u) {
      const T* xu = xd2 + static_cast<size_t>(u) * n;
      T* gu = gx + static_cast<size_t>(u) * n;
      for (int v = u + 1; v < m; ++v) {
        const T* xv = xd2 + static_cast<size_t>(v) * n;
        T* gv = gx + static_cast<size_t>(v) * n;
        T d2 = 0;
        for (int j = 0; j < n; ++j) {
          const T d = xu[j] - xv[j];
          d2 += d * d;
        }
        const T r = std::sqrt(d2);
        if (r == T(0)) continue;
        const T coef = g * std::exp(T(-2) * r) * T(-2) / (s * r);
        for (int j = 0; j < n; ++j) {
          const T d = coef * (xu[j] - xv[j]);
          gu[j] += d;
          gv[j] -= d;
        }
      }
    }
  });
  return out;
}

// Scale each row to unit L2 norm. Rows with norm below 1e-30 are mapped
// to zero and treated as locally constant.
template <class T>
Var<T> normalize_rows(Var<T> x) {
  Tape<T>& t = *x.tape;
  const auto& sx = t.shape(x);
  assert(sx.size() == 2);
  const int m = sx[0], n = sx[1];
  Var<T> out = t.make({m, n}, t.needs_grad(x), {});
  const T* xd = t.data_ptr(x);
  T* y = t.data_ptr(out);
  std::vector<T> norms(static_cast<size_t>(m), T(0));
  for (int i = 0; i < m; ++i) {
    const T* row = xd + static_cast<size_t>(i) * n;
    T d2 = 0;
    for (int j = 0; j < n; ++j) d2 += row[j] * row[j];
    const T nn = std::sqrt(d2);
    norms[static_cast<size_t>(i)] = nn;
    T* yrow = y + static_cast<size_t>(i) * n;
    if (nn < T(1e-30)) {
      std::fill_n(yrow, n, T(0));
    } else {
      for (int j = 0; j < n; ++j) yrow[j] = row[j] / nn;
    }
  }
  t.set_back(out, [x, out, m, n, norms = std::move(norms)]() {
    Tape<T>& tt = *out.tape;
    const T* g = tt.grad_ptr(out);
    const T* y2 = tt.data_ptr(out);
    T* gx = tt.grad_ptr(x);
    for (int i = 0; i < m; ++i) {
      const T nn = norms[static_cast<size_t>(i)];
      if (nn < T(1e-30)) continue;
      const T* grow = g + static_cast<size_t>(i) * n;
      const T* yrow = y2 + static_cast<size_t>(i) * n;
      T* gxr = gx + static_cast<size_t>(i) * n;
      T dot = 0;
      for (int j = 0; j < n; ++j) dot += grow[j] * yrow[j];
      for (int j = 0; j < n; ++j) gxr[j] += (grow[j] - dot * yrow[j]) / nn;
    }
  });
  return out;
}

}  // namespace dta
