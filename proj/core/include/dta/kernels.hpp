// SPDX-License-Identifier: Apache-2.0
//
// Register-blocked dense kernels. Every kernel accumulates into its output
// buffer, so callers that want plain assignment must pass zeroed memory.
// Layout is row-major everywhere; filter tensors are [cout][cin][k].
#pragma once

#include <cassert>
#include <cstddef>

namespace dta::kernels {

// c[m x n] += a[m x k] * b[k x n]
template <class T>
void gemm_nn_acc(const T* __restrict__ a, const T* __restrict__ b, T* __restrict__ c, int m, int k, int n) {
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + static_cast<size_t>(i) * k;
    const T* a1 = a0 + k;
    const T* a2 = a1 + k;
    const T* a3 = a2 + k;
    T* c0 = c + static_cast<size_t>(i) * n;
    T* c1 = c0 + n;
    T* c2 = c1 + n;
    T* c3 = c2 + n;
    for (int p = 0; p < k; ++p) {
      const T* brow = b + static_cast<size_t>(p) * n;
      const T s0 = a0[p];
      const T s1 = a1[p];
      const T s2 = a2[p];
      const T s3 = a3[p];
      for (int j = 0; j < n; ++j) {
        const T bv = brow[j];
        c0[j] += s0 * bv;
        c1[j] += s1 * bv;
        c2[j] += s2 * bv;
        c3[j] += s3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    T* crow = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T* brow = b + static_cast<size_t>(p) * n;
      const T s = arow[p];
      for (int j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

// c[m x n] += a[m x k] * b[n x k]^T
template <class T>
void gemm_nt_acc(const T* __restrict__ a, const T* __restrict__ b, T* __restrict__ c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    T* crow = c + static_cast<size_t>(i) * n;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
      const T* b0 = b + static_cast<size_t>(j) * k;
      const T* b1 = b0 + k;
      const T* b2 = b1 + k;
      const T* b3 = b2 + k;
      T acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
      for (int p = 0; p < k; ++p) {
        const T av = arow[p];
        acc0 += av * b0[p];
        acc1 += av * b1[p];
        acc2 += av * b2[p];
        acc3 += av * b3[p];
      }
      crow[j] += acc0;
      crow[j + 1] += acc1;
      crow[j + 2] += acc2;
      crow[j + 3] += acc3;
    }
    for (; j < n; ++j) {
      const T* brow = b + static_cast<size_t>(j) * k;
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// c[m x n] += a[k x m]^T * b[k x n]
template <class T>
void gemm_tn_acc(const T* __restrict__ a, const T* __restrict__ b, T* __restrict__ c, int m, int k, int n) {
  int p = 0;
  for (; p + 4 <= k; p += 4) {
    const T* a0 = a + static_cast<size_t>(p) * m;
    const T* a1 = a0 + m;
    const T* a2 = a1 + m;
    const T* a3 = a2 + m;
    const T* b0 = b + static_cast<size_t>(p) * n;
    const T* b1 = b0 + n;
    const T* b2 = b1 + n;
    const T* b3 = b2 + n;
    for (int i = 0; i < m; ++i) {
      const T s0 = a0[i];
      const T s1 = a1[i];
      const T s2 = a2[i];
      const T s3 = a3[i];
      T* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j)
        crow[j] += s0 * b0[j] + s1 * b1[j] + s2 * b2[j] + s3 * b3[j];
    }
  }
  for (; p < k; ++p) {
    const T* arow = a + static_cast<size_t>(p) * m;
    const T* brow = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const T s = arow[i];
      T* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

// y[cout x lout] += valid stride-1 cross-correlation of x[cin x l] with
// w[cout x cin x k], where lout = l - k + 1. The inner loop runs along the
// output axis (unit stride, vectorizable); per output element the (ci, q)
// accumulation order still matches the naive nesting, so results are
// bit-identical to a per-position accumulator when y starts zeroed.
template <class T>
void conv1d_acc(const T* __restrict__ x, const T* __restrict__ w, T* __restrict__ y, int cin, int l, int cout, int k) {
  const int lout = l - k + 1;
  assert(lout > 0);
  for (int co = 0; co < cout; ++co) {
    const T* wbase = w + static_cast<size_t>(co) * cin * k;
    T* yrow = y + static_cast<size_t>(co) * lout;
    for (int ci = 0; ci < cin; ++ci) {
      const T* xrow = x + static_cast<size_t>(ci) * l;
      const T* wrow = wbase + static_cast<size_t>(ci) * k;
      for (int q = 0; q < k; ++q) {
        const T wq = wrow[q];
        const T* xs = xrow + q;
        for (int p = 0; p < lout; ++p) yrow[p] += wq * xs[p];
      }
    }
  }
}

// gx[cin x l] += sum over (co, q) of w[co][ci][q] * gy[co][p] at x = p + q.
template <class T>
void conv1d_data_grad_acc(const T* __restrict__ gy, const T* __restrict__ w, T* __restrict__ gx, int cin, int l, int cout, int k) {
  const int lout = l - k + 1;
  assert(lout > 0);
  for (int co = 0; co < cout; ++co) {
    const T* gyrow = gy + static_cast<size_t>(co) * lout;
    for (int ci = 0; ci < cin; ++ci) {
      const T* wrow = w + (static_cast<size_t>(co) * cin + ci) * k;
      T* gxrow = gx + static_cast<size_t>(ci) * l;
      for (int q = 0; q < k; ++q) {
        const T wq = wrow[q];
        T* dst = gxrow + q;
        for (int p = 0; p < lout; ++p) dst[p] += wq * gyrow[p];
      }
    }
  }
}

// gw[cout x cin x k] += correlation of the input with the output gradient:
// gw[co][ci][q] = sum over p of gy[co][p] * x[ci][p + q].
template <class T>
void conv1d_weight_grad_acc(const T* __restrict__ x, const T* __restrict__ gy, T* __restrict__ gw, int cin, int l, int cout, int k) {
  const int lout = l - k + 1;
  assert(lout > 0);
  for (int co = 0; co < cout; ++co) {
    const T* gyrow = gy + static_cast<size_t>(co) * lout;
    for (int ci = 0; ci < cin; ++ci) {
      const T* xrow = x + static_cast<size_t>(ci) * l;
      T* dst = gw + (static_cast<size_t>(co) * cin + ci) * k;
      for (int q = 0; q < k; ++q) {
        const T* xs = xrow + q;
        T acc = 0;
        for (int p = 0; p < lout; ++p) acc += gyrow[p] * xs[p];
        dst[q] += acc;
      }
    }
  }
}

}  // namespace dta::kernels
