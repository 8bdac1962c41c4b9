#include <atomic>
#include <cassert>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels.hpp"

namespace mifprop::simd {
namespace {

bool cpu_has_avx2() {
#if defined(MIFPROP_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const KernelTable* best = avx2_kernels();
  if (const char* env = std::getenv("MIFPROP_SIMD"); env != nullptr && *env != '\0') {
    const Backend wanted = parse_backend(env);
    if (wanted == Backend::scalar) return &scalar_kernels();
    if (best == nullptr) throw std::runtime_error("MIFPROP_SIMD=avx2 but AVX2 is unavailable");
    return best;
  }
  return best != nullptr ? best : &scalar_kernels();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

const KernelTable& scalar_kernels() { return detail::kScalarTable; }

const KernelTable* avx2_kernels() {
#if defined(MIFPROP_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &detail::kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& kernels() { return *active_slot().load(std::memory_order_acquire); }

void select_backend(Backend b) {
  const KernelTable* t = b == Backend::scalar ? &scalar_kernels() : avx2_kernels();
  if (t == nullptr) throw std::runtime_error("requested SIMD backend is unavailable on this host");
  active_slot().store(t, std::memory_order_release);
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  throw std::invalid_argument("unknown SIMD backend '" + std::string(name) + "'");
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return kernels().dot(a.data(), b.data(), a.size());
}

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  assert(w.size() == rows * cols && x.size() == cols && y.size() == rows);
  kernels().gemv(w.data(), rows, cols, x.data(), y.data());
}

void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> y, std::span<double> x) {
  assert(w.size() == rows * cols && y.size() == rows && x.size() == cols);
  kernels().gemv_t_acc(w.data(), rows, cols, y.data(), x.data());
}

void ger_acc(std::span<double> g, std::size_t rows, std::size_t cols,
             std::span<const double> u, std::span<const double> v) {
  assert(g.size() == rows * cols && u.size() == rows && v.size() == cols);
  kernels().ger_acc(g.data(), rows, cols, u.data(), v.data());
}

}  // namespace mifprop::simd
