#include <cmath>
#include <cstring>

#include "upright/kernels.hpp"

// Reference kernels. Loop orders match the AVX2 variants (i, k, j panels for
// the gemms) so both paths accumulate in the same order.

namespace upright::kern {
namespace {

void gemm_nn_scalar(const double* A, int lda, const double* B, int ldb, double* C, int ldc, int m,
                    int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* c = C + int64_t(i) * ldc;
    if (!accumulate) std::memset(c, 0, sizeof(double) * n);
    const double* a = A + int64_t(i) * lda;
    for (int p = 0; p < k; ++p) {
      const double av = a[p];
      const double* b = B + int64_t(p) * ldb;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

void gemm_tn_scalar(const double* A, int lda, const double* B, int ldb, double* C, int ldc, int m,
                    int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* c = C + int64_t(i) * ldc;
    if (!accumulate) std::memset(c, 0, sizeof(double) * n);
    for (int p = 0; p < k; ++p) {
      const double av = A[int64_t(p) * lda + i];
      const double* b = B + int64_t(p) * ldb;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

void gemm_nt_scalar(const double* A, int lda, const double* B, int ldb, double* C, int ldc, int m,
                    int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* a = A + int64_t(i) * lda;
    double* c = C + int64_t(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const double* b = B + int64_t(j) * ldb;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a[p] * b[p];
      c[j] = accumulate ? c[j] + acc : acc;
    }
  }
}

void add_bias_rows_scalar(double* X, const double* b, int rows, int cols, int ldx) {
  for (int i = 0; i < rows; ++i) {
    double* x = X + int64_t(i) * ldx;
    for (int j = 0; j < cols; ++j) x[j] += b[j];
  }
}

void col_sums_scalar(const double* X, double* out, int rows, int cols, int ldx) {
  std::memset(out, 0, sizeof(double) * cols);
  for (int i = 0; i < rows; ++i) {
    const double* x = X + int64_t(i) * ldx;
    for (int j = 0; j < cols; ++j) out[j] += x[j];
  }
}

void elu_scalar(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : std::expm1(x[i]);
}

void elu_grad_scalar(const double* x_pre, const double* dy, double* dx, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * (x_pre[i] > 0.0 ? 1.0 : std::exp(x_pre[i]));
}

void axpy_scalar(double a, const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(const double* a, const double* b, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void scale_scalar(double a, double* x, int64_t n) {
  for (int64_t i = 0; i < n; ++i) x[i] *= a;
}

double sum_scalar(const double* x, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_scalar(const double* x, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

void adam_step_scalar(double* w, double* m, double* v, const double* g, int64_t n, double beta1,
                      double beta2, double eps, double bc1, double bc2) {
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    w[i] -= bc1 * m[i] / (std::sqrt(v[i] * bc2) + eps);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t = {
      gemm_nn_scalar, gemm_tn_scalar, gemm_nt_scalar, add_bias_rows_scalar, col_sums_scalar,
      elu_scalar,     elu_grad_scalar, axpy_scalar,   dot_scalar,           scale_scalar,
      sum_scalar,     sum_sq_scalar,   adam_step_scalar, "scalar"};
  return t;
}

}  // namespace upright::kern
