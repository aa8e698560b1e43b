#pragma once

#include <cstdint>
#include <string>

// Dense double-precision kernels behind the training and inference hot
// loops. Every kernel exists as a scalar reference implementation and, on
// x86-64 with AVX2+FMA, as a vectorized variant; the active table is chosen
// once at runtime. Both variants use the same loop order so they agree to
// rounding (FMA contraction is the only difference); equivalence is covered
// by tests/test_kernels.cpp.
//
// Matrices are row-major with explicit leading dimensions so callers can
// operate on sub-blocks (e.g. one row range per worker thread).

namespace upright::kern {

enum class Isa { scalar, avx2 };

struct KernelTable {
  // C[m x n] (+)= A[m x k] * B[k x n]
  void (*gemm_nn)(const double* A, int lda, const double* B, int ldb, double* C, int ldc, int m,
                  int k, int n, bool accumulate);
  // C[m x n] (+)= A[k x m]^T * B[k x n]
  void (*gemm_tn)(const double* A, int lda, const double* B, int ldb, double* C, int ldc, int m,
                  int k, int n, bool accumulate);
  // C[m x n] (+)= A[m x k] * B[n x k]^T
  void (*gemm_nt)(const double* A, int lda, const double* B, int ldb, double* C, int ldc, int m,
                  int k, int n, bool accumulate);
  // X[rows x cols] += b broadcast over rows
  void (*add_bias_rows)(double* X, const double* b, int rows, int cols, int ldx);
  // column sums: out[j] = sum_i X[i,j]
  void (*col_sums)(const double* X, double* out, int rows, int cols, int ldx);
  void (*elu)(const double* x, double* y, int64_t n);
  // dx = dy .* elu'(x_pre); elu'(x) = x > 0 ? 1 : exp(x)
  void (*elu_grad)(const double* x_pre, const double* dy, double* dx, int64_t n);
  void (*axpy)(double a, const double* x, double* y, int64_t n);
  double (*dot)(const double* a, const double* b, int64_t n);
  void (*scale)(double a, double* x, int64_t n);
  double (*sum)(const double* x, int64_t n);
  double (*sum_sq)(const double* x, int64_t n);
  // Adam with bias-corrected step sizes folded into bc1 = lr/(1-beta1^t), bc2 = 1/(1-beta2^t)
  void (*adam_step)(double* w, double* m, double* v, const double* g, int64_t n, double beta1,
                    double beta2, double eps, double bc1, double bc2);
  const char* name;
};

const KernelTable& table();          // resolved on first use
void force_isa(Isa isa);             // override (tests, --kernels flag)
bool isa_available(Isa isa);
Isa active_isa();
std::string isa_name(Isa isa);

const KernelTable& scalar_table();   // always available, for equivalence tests
const KernelTable* avx2_table();     // null when unsupported

}  // namespace upright::kern
