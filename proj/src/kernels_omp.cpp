#include "s2p/kernels.hpp"

#ifdef S2P_HAVE_OPENMP
#include <omp.h>
#endif

namespace s2p::kernels {

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr long kParallelWork = 1L << 15;
}  // namespace

int max_threads() {
#ifdef S2P_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, int m, int k, int n) {
  const bool wide = static_cast<long>(m) * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (wide)
  for (int i = 0; i < m; ++i) {
    double* row = c.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) row[j] = 0.0;
    for (int p = 0; p < k; ++p) {
      const double av = a[static_cast<std::size_t>(i) * k + p];
      const double* brow = b.data() + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

void matmul_bt(std::span<const double> a, std::span<const double> b, std::span<double> c, int m, int k, int n) {
  const bool wide = static_cast<long>(m) * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (wide)
  for (int i = 0; i < m; ++i) {
    const double* arow = a.data() + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double* brow = b.data() + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[static_cast<std::size_t>(i) * n + j] = acc;
    }
  }
}

void matmul_at_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, int m, int k,
                   int n) {
  const bool wide = static_cast<long>(m) * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (wide)
  for (int i = 0; i < m; ++i) {
    double* row = c.data() + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = a[static_cast<std::size_t>(p) * m + i];
      const double* brow = b.data() + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

void sparse_dots(std::span<const double> dense_query, const std::vector<SparseVector>& docs,
                 std::span<double> out) {
  const auto count = static_cast<std::ptrdiff_t>(docs.size());
#pragma omp parallel for schedule(static) if (count > 256)
  for (std::ptrdiff_t d = 0; d < count; ++d) {
    double acc = 0.0;
    for (const auto& [dim, w] : docs[d]) acc += dense_query[dim] * w;
    out[d] = acc;
  }
}

}  // namespace s2p::kernels
