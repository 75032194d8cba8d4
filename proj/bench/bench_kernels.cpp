// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "s2p/kernels.hpp"
#include "s2p/metric.hpp"
#include "s2p/random.hpp"

namespace {

std::vector<double> random_matrix(std::size_t n, std::uint64_t seed) {
  s2p::SeededRng rng(seed);
  std::vector<double> m(n);
  for (auto& v : m) v = rng.uniform(-1.0, 1.0);
  return m;
}

template <void (*Kernel)(std::span<const double>, std::span<const double>, std::span<double>, int, int, int)>
void bm_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = random_matrix(static_cast<std::size_t>(n) * n, 1);
  const auto b = random_matrix(static_cast<std::size_t>(n) * n, 2);
  std::vector<double> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    Kernel(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * n * n);
}

std::vector<s2p::SparseVector> random_docs(std::size_t count, std::uint32_t dim) {
  s2p::SeededRng rng(7);
  std::vector<s2p::SparseVector> docs(count);
  for (auto& d : docs) {
    for (std::uint32_t j = 0; j < dim; j += 1 + static_cast<std::uint32_t>(rng.below(40))) d.emplace_back(j, rng.unit());
  }
  return docs;
}

template <void (*Kernel)(std::span<const double>, const std::vector<s2p::SparseVector>&, std::span<double>)>
void bm_sparse(benchmark::State& state) {
  const std::uint32_t dim = 4000;
  const auto docs = random_docs(static_cast<std::size_t>(state.range(0)), dim);
  const auto query = random_matrix(dim, 3);
  std::vector<double> out(docs.size());
  for (auto _ : state) {
    Kernel(query, docs, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::vector<s2p::BleuPair> random_bleu_corpus(std::size_t count) {
  s2p::SeededRng rng(11);
  std::vector<s2p::BleuPair> pairs(count);
  auto sentence = [&rng] {
    s2p::TokenSeq s(5 + rng.below(20));
    for (auto& t : s) t = "w" + std::to_string(rng.below(50));
    return s;
  };
  for (auto& p : pairs) {
    p.candidate = sentence();
    p.references = {sentence(), sentence()};
  }
  return pairs;
}

void bm_bleu_serial(benchmark::State& state) {
  const auto pairs = random_bleu_corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(s2p::corpus_bleu_serial(pairs).score);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_bleu_parallel(benchmark::State& state) {
  const auto pairs = random_bleu_corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(s2p::corpus_bleu(pairs).score);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(bm_matmul<s2p::kernels::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_matmul<s2p::kernels::matmul>)->Name("matmul/omp")->Arg(64)->Arg(256);
BENCHMARK(bm_sparse<s2p::kernels::serial::sparse_dots>)->Name("sparse_dots/serial")->Arg(1000)->Arg(16000);
BENCHMARK(bm_sparse<s2p::kernels::sparse_dots>)->Name("sparse_dots/omp")->Arg(1000)->Arg(16000);
BENCHMARK(bm_bleu_serial)->Name("corpus_bleu/serial")->Arg(1000)->Arg(16000);
BENCHMARK(bm_bleu_parallel)->Name("corpus_bleu/omp")->Arg(1000)->Arg(16000);

BENCHMARK_MAIN();
