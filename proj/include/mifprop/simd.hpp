#pragma once

// Dense linear-algebra kernels used by the network and the optimizer.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The active table is chosen once at startup from the CPU
// feature flags; MIFPROP_SIMD=scalar|avx2 forces a choice. Reductions in the
// AVX2 variant use a different summation order than the scalar reference, so
// the two agree to rounding, not bit-for-bit. Element-wise kernels (adam,
// ger) are bit-identical across variants.

#include <cstddef>
#include <span>
#include <string_view>

namespace mifprop::simd {

enum class Backend { scalar, avx2 };

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias1;  // 1 - beta1^t
  double bias2;  // 1 - beta2^t
};

struct KernelTable {
  Backend backend;
  const char* name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y = W x, W row-major rows x cols
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols,
               const double* x, double* y);
  // x += W^T y
  void (*gemv_t_acc)(const double* w, std::size_t rows, std::size_t cols,
                     const double* y, double* x);
  // G += u v^T
  void (*ger_acc)(double* g, std::size_t rows, std::size_t cols,
                  const double* u, const double* v);
  void (*adam_update)(double* w, const double* g, double* m, double* u,
                      std::size_t n, const AdamCoeffs& c);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

// Currently selected table.
const KernelTable& kernels();

// Throws std::runtime_error if the backend is unavailable on this host.
void select_backend(Backend b);

Backend parse_backend(std::string_view name);

// Span front-ends over the active table.
double dot(std::span<const double> a, std::span<const double> b);
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> y, std::span<double> x);
void ger_acc(std::span<double> g, std::size_t rows, std::size_t cols,
             std::span<const double> u, std::span<const double> v);

}  // namespace mifprop::simd
