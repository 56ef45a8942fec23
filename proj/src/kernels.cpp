#include "flowcast/kernels.hpp"

#include <atomic>

#include "kernels_impl.hpp"

namespace flowcast::kern {

namespace {
std::atomic<Backend> g_backend{Backend::openmp};
}

Backend backend() { return g_backend.load(std::memory_order_relaxed); }
void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

#define FLOWCAST_DISPATCH(fn, ...)                       \
  do {                                                   \
    if (backend() == Backend::serial)                    \
      serial::fn(__VA_ARGS__);                           \
    else                                                 \
      omp::fn(__VA_ARGS__);                              \
  } while (0)

void matmul(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N) {
  FLOWCAST_DISPATCH(matmul, a, b, c, M, K, N);
}
void matmul_nt(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N) {
  FLOWCAST_DISPATCH(matmul_nt, a, b, c, M, K, N);
}
void matmul_tn_acc(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N) {
  FLOWCAST_DISPATCH(matmul_tn_acc, a, b, c, M, K, N);
}
void matmul_nt_acc(const double* a, const double* b, double* c, int64_t M, int64_t N, int64_t K) {
  FLOWCAST_DISPATCH(matmul_nt_acc, a, b, c, M, N, K);
}
void graph_mix(const double* ahat, const double* h, double* out, int64_t n, int64_t batch,
               int64_t feat) {
  FLOWCAST_DISPATCH(graph_mix, ahat, h, out, n, batch, feat);
}
void conv_time(const double* in, const double* w, const double* bias, double* out, int64_t rows,
               int64_t C, int64_t T, int64_t O, int64_t K) {
  FLOWCAST_DISPATCH(conv_time, in, w, bias, out, rows, C, T, O, K);
}
void conv_time_grad_in(const double* gout, const double* w, double* gin, int64_t rows, int64_t C,
                       int64_t T, int64_t O, int64_t K) {
  FLOWCAST_DISPATCH(conv_time_grad_in, gout, w, gin, rows, C, T, O, K);
}
void conv_time_grad_w(const double* gout, const double* in, double* gw, int64_t rows, int64_t C,
                      int64_t T, int64_t O, int64_t K) {
  FLOWCAST_DISPATCH(conv_time_grad_w, gout, in, gw, rows, C, T, O, K);
}
void map_unary(Unary op, const double* in, double* out, int64_t n) {
  FLOWCAST_DISPATCH(map_unary, op, in, out, n);
}
void map_unary_grad(Unary op, const double* out_val, const double* gout, double* gin, int64_t n) {
  FLOWCAST_DISPATCH(map_unary_grad, op, out_val, gout, gin, n);
}
void add(const double* a, const double* b, double* c, int64_t n) {
  FLOWCAST_DISPATCH(add, a, b, c, n);
}
void mul(const double* a, const double* b, double* c, int64_t n) {
  FLOWCAST_DISPATCH(mul, a, b, c, n);
}
void axpy(double alpha, const double* x, double* y, int64_t n) {
  FLOWCAST_DISPATCH(axpy, alpha, x, y, n);
}
void affine(const double* a, double k, double c0, double* out, int64_t n) {
  FLOWCAST_DISPATCH(affine, a, k, c0, out, n);
}
void bias_add(double* h, const double* bias, int64_t rows, int64_t cols) {
  FLOWCAST_DISPATCH(bias_add, h, bias, rows, cols);
}
void bias_grad(const double* g, double* gb, int64_t rows, int64_t cols) {
  FLOWCAST_DISPATCH(bias_grad, g, gb, rows, cols);
}
void rowwise_abs_diff(const double* a, const double* b, double* row_out, int64_t rows,
                      int64_t cols) {
  FLOWCAST_DISPATCH(rowwise_abs_diff, a, b, row_out, rows, cols);
}
void rowwise_sq_diff(const double* a, const double* b, double* row_out, int64_t rows,
                     int64_t cols) {
  FLOWCAST_DISPATCH(rowwise_sq_diff, a, b, row_out, rows, cols);
}

}  // namespace flowcast::kern
