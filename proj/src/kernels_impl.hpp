#pragma once

#include "flowcast/kernels.hpp"

// Internal: the two kernel backends. Same signatures, bitwise-identical
// results; dispatch lives in kernels.cpp.

#define FLOWCAST_KERNEL_DECLS                                                                      \
  void matmul(const double*, const double*, double*, int64_t, int64_t, int64_t);                  \
  void matmul_nt(const double*, const double*, double*, int64_t, int64_t, int64_t);               \
  void matmul_tn_acc(const double*, const double*, double*, int64_t, int64_t, int64_t);           \
  void matmul_nt_acc(const double*, const double*, double*, int64_t, int64_t, int64_t);           \
  void graph_mix(const double*, const double*, double*, int64_t, int64_t, int64_t);               \
  void conv_time(const double*, const double*, const double*, double*, int64_t, int64_t, int64_t, \
                 int64_t, int64_t);                                                                \
  void conv_time_grad_in(const double*, const double*, double*, int64_t, int64_t, int64_t,        \
                         int64_t, int64_t);                                                       \
  void conv_time_grad_w(const double*, const double*, double*, int64_t, int64_t, int64_t,         \
                        int64_t, int64_t);                                                        \
  void map_unary(Unary, const double*, double*, int64_t);                                         \
  void map_unary_grad(Unary, const double*, const double*, double*, int64_t);                     \
  void add(const double*, const double*, double*, int64_t);                                       \
  void mul(const double*, const double*, double*, int64_t);                                       \
  void axpy(double, const double*, double*, int64_t);                                             \
  void affine(const double*, double, double, double*, int64_t);                                   \
  void bias_add(double*, const double*, int64_t, int64_t);                                        \
  void bias_grad(const double*, double*, int64_t, int64_t);                                       \
  void rowwise_abs_diff(const double*, const double*, double*, int64_t, int64_t);                 \
  void rowwise_sq_diff(const double*, const double*, double*, int64_t, int64_t);

namespace flowcast::kern::serial {
FLOWCAST_KERNEL_DECLS
}

namespace flowcast::kern::omp {
FLOWCAST_KERNEL_DECLS
}
