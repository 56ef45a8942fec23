#include "flowcast/kernels.hpp"

#include <cmath>

// Serial reference kernels. The OpenMP versions in kernels_omp.cpp must keep
// the per-element accumulation order used here so both backends agree bitwise.

namespace flowcast::kern::serial {

void matmul(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N) {
  for (int64_t i = 0; i < M; ++i) {
    double* ci = c + i * N;
    for (int64_t j = 0; j < N; ++j) ci[j] = 0.0;
    for (int64_t k = 0; k < K; ++k) {
      const double aik = a[i * K + k];
      const double* bk = b + k * N;
      for (int64_t j = 0; j < N; ++j) ci[j] += aik * bk[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N) {
  for (int64_t i = 0; i < M; ++i) {
    const double* ai = a + i * K;
    for (int64_t j = 0; j < N; ++j) {
      const double* bj = b + j * K;
      double s = 0.0;
      for (int64_t k = 0; k < K; ++k) s += ai[k] * bj[k];
      c[i * N + j] = s;
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N) {
  for (int64_t i = 0; i < M; ++i) {
    for (int64_t j = 0; j < N; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < K; ++k) s += a[k * M + i] * b[k * N + j];
      c[i * N + j] += s;
    }
  }
}

void matmul_nt_acc(const double* a, const double* b, double* c, int64_t M, int64_t N, int64_t K) {
  for (int64_t i = 0; i < M; ++i) {
    for (int64_t j = 0; j < K; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < N; ++k) s += a[i * N + k] * b[j * N + k];
      c[i * K + j] += s;
    }
  }
}

void graph_mix(const double* ahat, const double* h, double* out, int64_t n, int64_t batch,
               int64_t feat) {
  for (int64_t bi = 0; bi < batch * n; ++bi) {
    const int64_t b = bi / n;
    const int64_t i = bi % n;
    double* o = out + bi * feat;
    for (int64_t f = 0; f < feat; ++f) o[f] = 0.0;
    const double* arow = ahat + i * n;
    const double* hb = h + b * n * feat;
    for (int64_t j = 0; j < n; ++j) {
      const double w = arow[j];
      if (w == 0.0) continue;
      const double* hj = hb + j * feat;
      for (int64_t f = 0; f < feat; ++f) o[f] += w * hj[f];
    }
  }
}

void conv_time(const double* in, const double* w, const double* bias, double* out, int64_t rows,
               int64_t C, int64_t T, int64_t O, int64_t K) {
  const int64_t To = T - K + 1;
  for (int64_t r = 0; r < rows; ++r) {
    const double* ir = in + r * C * T;
    double* orow = out + r * O * To;
    for (int64_t o = 0; o < O; ++o) {
      for (int64_t t = 0; t < To; ++t) {
        double s = bias ? bias[o] : 0.0;
        for (int64_t c = 0; c < C; ++c) {
          const double* ic = ir + c * T + t;
          const double* wc = w + (o * C + c) * K;
          for (int64_t k = 0; k < K; ++k) s += ic[k] * wc[k];
        }
        orow[o * To + t] = s;
      }
    }
  }
}

void conv_time_grad_in(const double* gout, const double* w, double* gin, int64_t rows, int64_t C,
                       int64_t T, int64_t O, int64_t K) {
  const int64_t To = T - K + 1;
  for (int64_t r = 0; r < rows; ++r) {
    const double* gr = gout + r * O * To;
    double* gi = gin + r * C * T;
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t t = 0; t < T; ++t) {
        double s = 0.0;
        for (int64_t o = 0; o < O; ++o) {
          const double* wc = w + (o * C + c) * K;
          for (int64_t k = 0; k < K; ++k) {
            const int64_t tp = t - k;
            if (tp >= 0 && tp < To) s += gr[o * To + tp] * wc[k];
          }
        }
        gi[c * T + t] += s;
      }
    }
  }
}

void conv_time_grad_w(const double* gout, const double* in, double* gw, int64_t rows, int64_t C,
                      int64_t T, int64_t O, int64_t K) {
  const int64_t To = T - K + 1;
  for (int64_t o = 0; o < O; ++o) {
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t k = 0; k < K; ++k) {
        double s = 0.0;
        for (int64_t r = 0; r < rows; ++r) {
          const double* gr = gout + r * O * To + o * To;
          const double* ic = in + r * C * T + c * T + k;
          for (int64_t t = 0; t < To; ++t) s += gr[t] * ic[t];
        }
        gw[(o * C + c) * K + k] += s;
      }
    }
  }
}

static inline double apply_unary(Unary op, double x) {
  switch (op) {
    case Unary::identity: return x;
    case Unary::tanh_: return std::tanh(x);
    case Unary::sigmoid_: return 1.0 / (1.0 + std::exp(-x));
    case Unary::relu_: return x > 0.0 ? x : 0.0;
  }
  return x;
}

static inline double unary_grad_from_out(Unary op, double y) {
  switch (op) {
    case Unary::identity: return 1.0;
    case Unary::tanh_: return 1.0 - y * y;
    case Unary::sigmoid_: return y * (1.0 - y);
    case Unary::relu_: return y > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

void map_unary(Unary op, const double* in, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = apply_unary(op, in[i]);
}

void map_unary_grad(Unary op, const double* out_val, const double* gout, double* gin, int64_t n) {
  for (int64_t i = 0; i < n; ++i) gin[i] += unary_grad_from_out(op, out_val[i]) * gout[i];
}

void add(const double* a, const double* b, double* c, int64_t n) {
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* c, int64_t n) {
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void affine(const double* a, double k, double c0, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = k * a[i] + c0;
}

void bias_add(double* h, const double* bias, int64_t rows, int64_t cols) {
  for (int64_t r = 0; r < rows; ++r) {
    double* hr = h + r * cols;
    for (int64_t j = 0; j < cols; ++j) hr[j] += bias[j];
  }
}

void bias_grad(const double* g, double* gb, int64_t rows, int64_t cols) {
  for (int64_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (int64_t r = 0; r < rows; ++r) s += g[r * cols + j];
    gb[j] += s;
  }
}

void rowwise_abs_diff(const double* a, const double* b, double* row_out, int64_t rows,
                      int64_t cols) {
  for (int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int64_t j = 0; j < cols; ++j) s += std::fabs(a[r * cols + j] - b[r * cols + j]);
    row_out[r] = s;
  }
}

void rowwise_sq_diff(const double* a, const double* b, double* row_out, int64_t rows,
                     int64_t cols) {
  for (int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      const double d = a[r * cols + j] - b[r * cols + j];
      s += d * d;
    }
    row_out[r] = s;
  }
}

}  // namespace flowcast::kern::serial
