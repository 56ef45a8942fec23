#pragma once

#include <cstdint>

namespace flowcast::kern {

// Data-parallel numeric kernels. Every kernel exists in a serial reference
// version and an OpenMP version. Both compute each output element with the
// same accumulation order, so their results are bitwise identical; the tests
// assert this and the bench target compares their throughput.

enum class Backend { serial, openmp };

Backend backend();
void set_backend(Backend b);

enum class Unary { identity, tanh_, sigmoid_, relu_ };

// c[M x N] = a[M x K] * b[K x N]
void matmul(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N);
// c[M x N] = a[M x K] * b[N x K]^T
void matmul_nt(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N);
// c[M x N] += a[K x M]^T * b[K x N]
void matmul_tn_acc(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N);
// c[M x K] += a[M x N] * b[K x N]^T   (gradient helper: dA += dC * B^T with b stored [K x N])
void matmul_nt_acc(const double* a, const double* b, double* c, int64_t M, int64_t N, int64_t K);

// out[b,i,f] = sum_j ahat[i,j] * h[b,j,f]; h and out are [(batch*n) x feat]
void graph_mix(const double* ahat, const double* h, double* out, int64_t n, int64_t batch,
               int64_t feat);

// Temporal convolution over rows laid out channel-major: in[r, c*T + t].
// out[r, o*To + t] = sum_{c,k} in[r, c*T + t + k] * w[(o*C + c)*K + k] + bias[o], To = T-K+1
void conv_time(const double* in, const double* w, const double* bias, double* out, int64_t rows,
               int64_t C, int64_t T, int64_t O, int64_t K);
void conv_time_grad_in(const double* gout, const double* w, double* gin, int64_t rows, int64_t C,
                       int64_t T, int64_t O, int64_t K);
void conv_time_grad_w(const double* gout, const double* in, double* gw, int64_t rows, int64_t C,
                      int64_t T, int64_t O, int64_t K);

void map_unary(Unary op, const double* in, double* out, int64_t n);
// gin += dop(stored as out value) * gout
void map_unary_grad(Unary op, const double* out_val, const double* gout, double* gin, int64_t n);

void add(const double* a, const double* b, double* c, int64_t n);
void mul(const double* a, const double* b, double* c, int64_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, int64_t n);
// out = k*a + c0
void affine(const double* a, double k, double c0, double* out, int64_t n);

// h[r, j] += bias[j]
void bias_add(double* h, const double* bias, int64_t rows, int64_t cols);
// gb[j] += sum_r g[r, j]
void bias_grad(const double* g, double* gb, int64_t rows, int64_t cols);

// row_out[r] = sum_j |a[r,j] - b[r,j]|
void rowwise_abs_diff(const double* a, const double* b, double* row_out, int64_t rows, int64_t cols);
// row_out[r] = sum_j (a[r,j] - b[r,j])^2
void rowwise_sq_diff(const double* a, const double* b, double* row_out, int64_t rows, int64_t cols);

}  // namespace flowcast::kern
