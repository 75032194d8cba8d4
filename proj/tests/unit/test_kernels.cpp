#include <doctest.h>

#include "s2p/kernels.hpp"
#include "s2p/random.hpp"

using namespace s2p;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("matmul matches a hand example") {
    const std::vector<double> a{1, 2, 3, 4, 5, 6};  // 2x3
    const std::vector<double> b{7, 8, 9, 10, 11, 12};  // 3x2
    std::vector<double> c(4);
    kernels::matmul(a, b, c, 2, 3, 2);
    CHECK(c == std::vector<double>{58, 64, 139, 154});
    std::vector<double> bt(4);
    kernels::matmul_bt(a, a, bt, 2, 3, 2);  // a * a^T
    CHECK(bt == std::vector<double>{14, 32, 32, 77});
    const std::vector<double> p{1, 2, 3, 4}, q{5, 6, 7, 8};
    std::vector<double> acc{1, 1, 1, 1};
    kernels::matmul_at_acc(p, q, acc, 2, 2, 2);  // acc += p^T q
    CHECK(acc == std::vector<double>{27, 31, 39, 45});
  }

  TEST_CASE("parallel kernels are bit-identical to the serial reference") {
    CHECK(kernels::max_threads() >= 1);
    for (int trial = 0; trial < 5; ++trial) {
      const int m = 17 + trial * 13, k = 9 + trial * 7, n = 23 + trial * 5;
      const auto a = noise(static_cast<std::size_t>(m) * k, 1 + trial);
      const auto b = noise(static_cast<std::size_t>(k) * n, 100 + trial);
      std::vector<double> c1(static_cast<std::size_t>(m) * n), c2(c1.size());
      kernels::matmul(a, b, c1, m, k, n);
      kernels::serial::matmul(a, b, c2, m, k, n);
      CHECK(c1 == c2);

      const auto bt = noise(static_cast<std::size_t>(n) * k, 200 + trial);
      kernels::matmul_bt(a, bt, c1, m, k, n);
      kernels::serial::matmul_bt(a, bt, c2, m, k, n);
      CHECK(c1 == c2);

      const auto at = noise(static_cast<std::size_t>(k) * m, 300 + trial);
      auto acc1 = noise(static_cast<std::size_t>(m) * n, 400 + trial);
      auto acc2 = acc1;
      kernels::matmul_at_acc(at, b, acc1, m, k, n);
      kernels::serial::matmul_at_acc(at, b, acc2, m, k, n);
      CHECK(acc1 == acc2);
    }

    SeededRng rng(7);
    std::vector<SparseVector> docs(2000);
    for (auto& d : docs)
      for (std::uint32_t j = 0; j < 500; j += 1 + static_cast<std::uint32_t>(rng.below(30))) d.emplace_back(j, rng.unit());
    const auto q = noise(500, 8);
    std::vector<double> o1(docs.size()), o2(docs.size());
    kernels::sparse_dots(q, docs, o1);
    kernels::serial::sparse_dots(q, docs, o2);
    CHECK(o1 == o2);
  }
}
