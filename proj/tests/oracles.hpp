#pragma once

// Independent re-implementations used as test oracles. Nothing here calls
// into the library; the code is deliberately naive (linear scans, no maps).

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <string>
#include <vector>

namespace s2p::oracle {

using Sentence = std::vector<std::string>;

struct Case {
  Sentence candidate;
  std::vector<Sentence> references;
};

inline std::vector<Sentence> windows(const Sentence& s, int n) {
  std::vector<Sentence> out;
  for (int i = 0; i + n <= static_cast<int>(s.size()); ++i) out.emplace_back(s.begin() + i, s.begin() + i + n);
  return out;
}

inline long occurrences(const std::vector<Sentence>& grams, const Sentence& g) {
  long c = 0;
  for (const auto& x : grams) c += (x == g) ? 1 : 0;
  return c;
}

/// Brute-force corpus BLEU: uniform weights, clipped counts summed over the
/// corpus, closest reference length with ties to the shorter, no smoothing.
inline double corpus_bleu(const std::vector<Case>& cases, int max_n = 4) {
  std::vector<long> hit(static_cast<std::size_t>(max_n), 0), total(static_cast<std::size_t>(max_n), 0);
  long c_len = 0, r_len = 0;
  for (const auto& cs : cases) {
    const long c = static_cast<long>(cs.candidate.size());
    c_len += c;
    long best = -1;
    for (const auto& ref : cs.references) {
      const long r = static_cast<long>(ref.size());
      if (best < 0 || std::labs(r - c) < std::labs(best - c) || (std::labs(r - c) == std::labs(best - c) && r < best))
        best = r;
    }
    r_len += best;
    for (int n = 1; n <= max_n; ++n) {
      const auto grams = windows(cs.candidate, n);
      total[static_cast<std::size_t>(n - 1)] += static_cast<long>(grams.size());
      std::vector<Sentence> seen;
      for (const auto& g : grams) {
        if (occurrences(seen, g) > 0) continue;
        seen.push_back(g);
        long cap = 0;
        for (const auto& ref : cs.references) cap = std::max(cap, occurrences(windows(ref, n), g));
        hit[static_cast<std::size_t>(n - 1)] += std::min(occurrences(grams, g), cap);
      }
    }
  }
  double log_mean = 0.0;
  for (int n = 0; n < max_n; ++n) {
    if (hit[static_cast<std::size_t>(n)] == 0) return 0.0;
    log_mean += std::log(static_cast<double>(hit[static_cast<std::size_t>(n)]) /
                         static_cast<double>(total[static_cast<std::size_t>(n)])) /
                max_n;
  }
  const double bp = c_len > r_len ? 1.0 : std::exp(1.0 - static_cast<double>(r_len) / static_cast<double>(c_len));
  return bp * std::exp(log_mean);
}

/// softmax(q·kᵀ/√d) per row, evaluated one element at a time. `visible`
/// is row-major; a row with no visible key is all zeros.
inline std::vector<double> attention_weights(const std::vector<double>& q, const std::vector<double>& k, int rows,
                                             int cols, int d, const std::vector<char>& visible) {
  std::vector<double> w(static_cast<std::size_t>(rows) * cols, 0.0);
  for (int i = 0; i < rows; ++i) {
    double biggest = -INFINITY;
    std::vector<double> s(static_cast<std::size_t>(cols), 0.0);
    for (int j = 0; j < cols; ++j) {
      double dot = 0.0;
      for (int t = 0; t < d; ++t) dot += q[static_cast<std::size_t>(i) * d + t] * k[static_cast<std::size_t>(j) * d + t];
      s[static_cast<std::size_t>(j)] = dot / std::sqrt(static_cast<double>(d));
      if (visible[static_cast<std::size_t>(i) * cols + j]) biggest = std::max(biggest, s[static_cast<std::size_t>(j)]);
    }
    if (biggest == -INFINITY) continue;
    double z = 0.0;
    for (int j = 0; j < cols; ++j)
      if (visible[static_cast<std::size_t>(i) * cols + j]) z += std::exp(s[static_cast<std::size_t>(j)] - biggest);
    for (int j = 0; j < cols; ++j)
      if (visible[static_cast<std::size_t>(i) * cols + j])
        w[static_cast<std::size_t>(i) * cols + j] = std::exp(s[static_cast<std::size_t>(j)] - biggest) / z;
  }
  return w;
}

}  // namespace s2p::oracle
