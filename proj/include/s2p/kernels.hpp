#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace s2p {

/// Sorted (dimension, weight) entries.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

// Dense row-major kernels used by the transformer and the retrieval scorer.
//
// The parallel versions split work by output row only; every output element
// is accumulated in the same order as in the serial version, so both produce
// bit-identical results for any thread count.
namespace kernels {

/// c[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, int m, int k, int n);
/// c[m x n] = a[m x k] * b[n x k]^T
void matmul_bt(std::span<const double> a, std::span<const double> b, std::span<double> c, int m, int k, int n);
/// c[m x n] += a[k x m]^T * b[k x n]
void matmul_at_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, int m, int k,
                   int n);
/// out[d] = <dense_query, docs[d]>
void sparse_dots(std::span<const double> dense_query, const std::vector<SparseVector>& docs,
                 std::span<double> out);

/// Threads the parallel kernels may use (1 without OpenMP).
int max_threads();

namespace serial {
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, int m, int k, int n);
void matmul_bt(std::span<const double> a, std::span<const double> b, std::span<double> c, int m, int k, int n);
void matmul_at_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, int m, int k,
                   int n);
void sparse_dots(std::span<const double> dense_query, const std::vector<SparseVector>& docs,
                 std::span<double> out);
}  // namespace serial

}  // namespace kernels
}  // namespace s2p
