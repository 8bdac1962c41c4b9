#include <cmath>

#include "kernels.hpp"

namespace mifprop::simd::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void gemv_scalar(const double* w, std::size_t rows, std::size_t cols,
                 const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(w + r * cols, x, cols);
}

void gemv_t_acc_scalar(const double* w, std::size_t rows, std::size_t cols,
                       const double* y, double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) x[c] += row[c] * yr;
  }
}

void ger_acc_scalar(double* g, std::size_t rows, std::size_t cols,
                    const double* u, const double* v) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double ur = u[r];
    if (ur == 0.0) continue;
    double* row = g + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += ur * v[c];
  }
}

void adam_update_scalar(double* w, const double* g, double* m, double* u,
                        std::size_t n, const AdamCoeffs& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * gi;
    u[i] = c.beta2 * u[i] + one_minus_b2 * (gi * gi);
    const double m_hat = m[i] / c.bias1;
    const double u_hat = u[i] / c.bias2;
    w[i] = w[i] - c.lr * m_hat / (std::sqrt(u_hat) + c.eps);
  }
}

}  // namespace

const KernelTable kScalarTable{
    Backend::scalar, "scalar",    dot_scalar,        gemv_scalar,
    gemv_t_acc_scalar, ger_acc_scalar, adam_update_scalar,
};

}  // namespace mifprop::simd::detail
