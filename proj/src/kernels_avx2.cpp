#include "upright/kernels.hpp"

#ifdef UPRIGHT_HAVE_AVX2_TU

#include <immintrin.h>

#include <cmath>
#include <cstring>

// AVX2+FMA variants. Per-element accumulation order matches the scalar
// reference (sums run over k ascending), so the two tables differ only by
// FMA contraction and the vector exp; reductions (dot/sum) use four lanes
// and are compared with tolerance.

namespace upright::kern {
namespace {

// exp for four doubles: Cody-Waite reduction, degree-12 Taylor on |r| <= ln2/2.
// Relative error ~1e-14 on the clamped range, plenty below the equivalence
// tolerance used in the tests.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.0);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  static const double coeff[13] = {
      1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0, 1.0 / 40320.0,
      1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,     1.0 / 6.0,
      0.5,               1.0,              1.0};
  __m256d p = _mm256_set1_pd(coeff[0]);
  for (int i = 1; i < 13; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(coeff[i]));

  const __m128i n32 = _mm256_cvtpd_epi32(n);
  const __m256i n64 = _mm256_cvtepi32_epi64(n32);
  const __m256i pow2 = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(pow2));
}

void gemm_nn_avx2(const double* A, int lda, const double* B, int ldb, double* C, int ldc, int m,
                  int k, int n, bool accumulate) {
  int j0 = 0;
  for (; j0 + 8 <= n; j0 += 8) {
    for (int i = 0; i < m; ++i) {
      const double* a = A + int64_t(i) * lda;
      double* c = C + int64_t(i) * ldc + j0;
      __m256d acc0, acc1;
      if (accumulate) {
        acc0 = _mm256_loadu_pd(c);
        acc1 = _mm256_loadu_pd(c + 4);
      } else {
        acc0 = _mm256_setzero_pd();
        acc1 = _mm256_setzero_pd();
      }
      for (int p = 0; p < k; ++p) {
        const __m256d av = _mm256_set1_pd(a[p]);
        const double* b = B + int64_t(p) * ldb + j0;
        acc0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b), acc0);
        acc1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + 4), acc1);
      }
      _mm256_storeu_pd(c, acc0);
      _mm256_storeu_pd(c + 4, acc1);
    }
  }
  for (; j0 + 4 <= n; j0 += 4) {
    for (int i = 0; i < m; ++i) {
      const double* a = A + int64_t(i) * lda;
      double* c = C + int64_t(i) * ldc + j0;
      __m256d acc = accumulate ? _mm256_loadu_pd(c) : _mm256_setzero_pd();
      for (int p = 0; p < k; ++p)
        acc = _mm256_fmadd_pd(_mm256_set1_pd(a[p]), _mm256_loadu_pd(B + int64_t(p) * ldb + j0), acc);
      _mm256_storeu_pd(c, acc);
    }
  }
  for (; j0 < n; ++j0) {
    for (int i = 0; i < m; ++i) {
      const double* a = A + int64_t(i) * lda;
      double acc = accumulate ? C[int64_t(i) * ldc + j0] : 0.0;
      for (int p = 0; p < k; ++p) acc = std::fma(a[p], B[int64_t(p) * ldb + j0], acc);
      C[int64_t(i) * ldc + j0] = acc;
    }
  }
}

void gemm_tn_avx2(const double* A, int lda, const double* B, int ldb, double* C, int ldc, int m,
                  int k, int n, bool accumulate) {
  // C strip stays L1-resident; k is blocked by four to cut C traffic.
  int j0 = 0;
  for (; j0 + 8 <= n; j0 += 8) {
    if (!accumulate) {
      for (int i = 0; i < m; ++i) std::memset(C + int64_t(i) * ldc + j0, 0, 8 * sizeof(double));
    }
    int p0 = 0;
    for (; p0 + 4 <= k; p0 += 4) {
      __m256d b00 = _mm256_loadu_pd(B + int64_t(p0 + 0) * ldb + j0);
      __m256d b01 = _mm256_loadu_pd(B + int64_t(p0 + 0) * ldb + j0 + 4);
      __m256d b10 = _mm256_loadu_pd(B + int64_t(p0 + 1) * ldb + j0);
      __m256d b11 = _mm256_loadu_pd(B + int64_t(p0 + 1) * ldb + j0 + 4);
      __m256d b20 = _mm256_loadu_pd(B + int64_t(p0 + 2) * ldb + j0);
      __m256d b21 = _mm256_loadu_pd(B + int64_t(p0 + 2) * ldb + j0 + 4);
      __m256d b30 = _mm256_loadu_pd(B + int64_t(p0 + 3) * ldb + j0);
      __m256d b31 = _mm256_loadu_pd(B + int64_t(p0 + 3) * ldb + j0 + 4);
      for (int i = 0; i < m; ++i) {
        double* c = C + int64_t(i) * ldc + j0;
        __m256d c0 = _mm256_loadu_pd(c);
        __m256d c1 = _mm256_loadu_pd(c + 4);
        const __m256d a0 = _mm256_set1_pd(A[int64_t(p0 + 0) * lda + i]);
        const __m256d a1 = _mm256_set1_pd(A[int64_t(p0 + 1) * lda + i]);
        const __m256d a2 = _mm256_set1_pd(A[int64_t(p0 + 2) * lda + i]);
        const __m256d a3 = _mm256_set1_pd(A[int64_t(p0 + 3) * lda + i]);
        c0 = _mm256_fmadd_pd(a0, b00, c0);
        c1 = _mm256_fmadd_pd(a0, b01, c1);
        c0 = _mm256_fmadd_pd(a1, b10, c0);
        c1 = _mm256_fmadd_pd(a1, b11, c1);
        c0 = _mm256_fmadd_pd(a2, b20, c0);
        c1 = _mm256_fmadd_pd(a2, b21, c1);
        c0 = _mm256_fmadd_pd(a3, b30, c0);
        c1 = _mm256_fmadd_pd(a3, b31, c1);
        _mm256_storeu_pd(c, c0);
        _mm256_storeu_pd(c + 4, c1);
      }
    }
    for (; p0 < k; ++p0) {
      __m256d b0 = _mm256_loadu_pd(B + int64_t(p0) * ldb + j0);
      __m256d b1 = _mm256_loadu_pd(B + int64_t(p0) * ldb + j0 + 4);
      for (int i = 0; i < m; ++i) {
        double* c = C + int64_t(i) * ldc + j0;
        const __m256d av = _mm256_set1_pd(A[int64_t(p0) * lda + i]);
        _mm256_storeu_pd(c, _mm256_fmadd_pd(av, b0, _mm256_loadu_pd(c)));
        _mm256_storeu_pd(c + 4, _mm256_fmadd_pd(av, b1, _mm256_loadu_pd(c + 4)));
      }
    }
  }
  // narrow tail via the scalar path
  if (j0 < n) {
    for (int i = 0; i < m; ++i) {
      double* c = C + int64_t(i) * ldc;
      for (int j = j0; j < n; ++j) {
        double acc = accumulate ? c[j] : 0.0;
        for (int p = 0; p < k; ++p) acc = std::fma(A[int64_t(p) * lda + i], B[int64_t(p) * ldb + j], acc);
        c[j] = acc;
      }
    }
  }
}

void gemm_nt_avx2(const double* A, int lda, const double* B, int ldb, double* C, int ldc, int m,
                  int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* a = A + int64_t(i) * lda;
    double* c = C + int64_t(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const double* b = B + int64_t(j) * ldb;
      __m256d acc = _mm256_setzero_pd();
      int p = 0;
      for (; p + 4 <= k; p += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + p), _mm256_loadu_pd(b + p), acc);
      alignas(32) double lanes[4];
      _mm256_store_pd(lanes, acc);
      double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
      for (; p < k; ++p) s = std::fma(a[p], b[p], s);
      c[j] = accumulate ? c[j] + s : s;
    }
  }
}

void add_bias_rows_avx2(double* X, const double* b, int rows, int cols, int ldx) {
  for (int i = 0; i < rows; ++i) {
    double* x = X + int64_t(i) * ldx;
    int j = 0;
    for (; j + 4 <= cols; j += 4)
      _mm256_storeu_pd(x + j, _mm256_add_pd(_mm256_loadu_pd(x + j), _mm256_loadu_pd(b + j)));
    for (; j < cols; ++j) x[j] += b[j];
  }
}

void col_sums_avx2(const double* X, double* out, int rows, int cols, int ldx) {
  std::memset(out, 0, sizeof(double) * cols);
  for (int i = 0; i < rows; ++i) {
    const double* x = X + int64_t(i) * ldx;
    int j = 0;
    for (; j + 4 <= cols; j += 4)
      _mm256_storeu_pd(out + j, _mm256_add_pd(_mm256_loadu_pd(out + j), _mm256_loadu_pd(x + j)));
    for (; j < cols; ++j) out[j] += x[j];
  }
}

void elu_avx2(const double* x, double* y, int64_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d neg = _mm256_sub_pd(exp_pd(_mm256_min_pd(v, zero)), one);
    const __m256d mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(y + i, _mm256_blendv_pd(neg, v, mask));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : std::expm1(x[i]);
}

void elu_grad_avx2(const double* x_pre, const double* dy, double* dx, int64_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x_pre + i);
    const __m256d e = exp_pd(_mm256_min_pd(v, zero));
    const __m256d mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    const __m256d slope = _mm256_blendv_pd(e, one, mask);
    _mm256_storeu_pd(dx + i, _mm256_mul_pd(_mm256_loadu_pd(dy + i), slope));
  }
  for (; i < n; ++i) dx[i] = dy[i] * (x_pre[i] > 0.0 ? 1.0 : std::exp(x_pre[i]));
}

void axpy_avx2(double a, const double* x, double* y, int64_t n) {
  const __m256d av = _mm256_set1_pd(a);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot_avx2(const double* a, const double* b, int64_t n) {
  __m256d acc = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void scale_avx2(double a, double* x, int64_t n) {
  const __m256d av = _mm256_set1_pd(a);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

double sum_avx2(const double* x, int64_t n) {
  __m256d acc = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_avx2(const double* x, int64_t n) {
  __m256d acc = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

void adam_step_avx2(double* w, double* m, double* v, const double* g, int64_t n, double beta1,
                    double beta2, double eps, double bc1, double bc2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d ve = _mm256_set1_pd(eps);
  const __m256d vb1 = _mm256_set1_pd(bc1);
  const __m256d vb2 = _mm256_set1_pd(bc2);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_fmadd_pd(ob1, gv, _mm256_mul_pd(b1, _mm256_loadu_pd(m + i)));
    __m256d vv = _mm256_fmadd_pd(ob2, _mm256_mul_pd(gv, gv), _mm256_mul_pd(b2, _mm256_loadu_pd(v + i)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vv, vb2)), ve);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vb1, mv), denom);
    _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    w[i] -= bc1 * m[i] / (std::sqrt(v[i] * bc2) + eps);
  }
}

const KernelTable avx2_impl = {
    gemm_nn_avx2, gemm_tn_avx2, gemm_nt_avx2, add_bias_rows_avx2, col_sums_avx2,
    elu_avx2,     elu_grad_avx2, axpy_avx2,   dot_avx2,           scale_avx2,
    sum_avx2,     sum_sq_avx2,   adam_step_avx2, "avx2"};

}  // namespace

const KernelTable* avx2_table() { return &avx2_impl; }

}  // namespace upright::kern

#endif  // UPRIGHT_HAVE_AVX2_TU
