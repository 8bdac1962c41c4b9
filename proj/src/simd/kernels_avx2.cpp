#include <immintrin.h>

#include "kernels.hpp"

namespace mifprop::simd::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void gemv_avx2(const double* w, std::size_t rows, std::size_t cols,
               const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(w + r * cols, x, cols);
}

// Element-wise kernels below use separate mul/add (no FMA) so they round
// exactly like the scalar reference.

void axpy_nofma(double* dst, const double* src, double alpha, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t c = 0;
  for (; c + 4 <= n; c += 4) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(src + c), a);
    _mm256_storeu_pd(dst + c, _mm256_add_pd(_mm256_loadu_pd(dst + c), prod));
  }
  for (; c < n; ++c) dst[c] += src[c] * alpha;
}

void gemv_t_acc_avx2(const double* w, std::size_t rows, std::size_t cols,
                     const double* y, double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (y[r] == 0.0) continue;
    axpy_nofma(x, w + r * cols, y[r], cols);
  }
}

void ger_acc_avx2(double* g, std::size_t rows, std::size_t cols,
                  const double* u, const double* v) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (u[r] == 0.0) continue;
    axpy_nofma(g + r * cols, v, u[r], cols);
  }
}

void adam_update_avx2(double* w, const double* g, double* m, double* u,
                      std::size_t n, const AdamCoeffs& c) {
  const double omb1 = 1.0 - c.beta1;
  const double omb2 = 1.0 - c.beta2;
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d k1 = _mm256_set1_pd(omb1);
  const __m256d k2 = _mm256_set1_pd(omb2);
  const __m256d bc1 = _mm256_set1_pd(c.bias1);
  const __m256d bc2 = _mm256_set1_pd(c.bias2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(k1, gi));
    const __m256d ui = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(u + i)),
                                     _mm256_mul_pd(k2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(u + i, ui);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d u_hat = _mm256_div_pd(ui, bc2);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat),
                                       _mm256_add_pd(_mm256_sqrt_pd(u_hat), eps));
    _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
  }
  if (i < n) kScalarTable.adam_update(w + i, g + i, m + i, u + i, n - i, c);
}

}  // namespace

const KernelTable kAvx2Table{
    Backend::avx2,   "avx2",       dot_avx2,        gemv_avx2,
    gemv_t_acc_avx2, ger_acc_avx2, adam_update_avx2,
};

}  // namespace mifprop::simd::detail
