#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "s2p/error.hpp"

namespace s2p {

using TokenSeq = std::vector<std::string>;
using NGram = std::vector<std::string>;

/// Occurrence counts of every n-gram of one order in a token sequence.
struct NGramProfile {
  int n = 1;
  std::map<NGram, std::int64_t> counts;
};

struct Fraction {
  std::int64_t numerator = 0;
  std::int64_t denominator = 0;
  bool operator==(const Fraction&) const = default;
};

struct BleuSettings {
  int max_n = 4;
  bool smoothing = false;
};

inline constexpr double kSmoothingEpsilon = 1e-9;

struct BleuReport {
  std::vector<Fraction> precisions;  // clipped matches / candidate n-grams, n = 1..max_n
  double brevity_penalty = 1.0;
  double score = 0.0;
  std::int64_t candidate_len = 0;
  std::int64_t reference_len = 0;
  bool smoothing = false;

  /// p_n as used in the geometric mean (after smoothing, if enabled).
  double precision(int n) const;
};

/// Exact whitespace tokenization used for all scoring; case is kept.
TokenSeq tokenize_for_bleu(std::string_view text);

NGramProfile ngram_profile(const TokenSeq& tokens, int n);

Fraction clipped_precision(const TokenSeq& candidate, const std::vector<TokenSeq>& references, int n);

double brevity_penalty(std::int64_t candidate_len, std::int64_t reference_len);

/// Reference length closest to the candidate length, ties toward the shorter.
std::int64_t effective_reference_length(std::size_t candidate_len, const std::vector<TokenSeq>& references);

struct BleuPair {
  TokenSeq candidate;
  std::vector<TokenSeq> references;
};

/// Corpus BLEU: clipped counts and lengths are summed over all pairs before
/// the precisions and the brevity penalty are formed. Per-pair statistics are
/// computed in parallel; the reduction is over integers, so the result does
/// not depend on the thread count.
BleuReport corpus_bleu(const std::vector<BleuPair>& pairs, const BleuSettings& settings = {});
/// Single-threaded reference for corpus_bleu.
BleuReport corpus_bleu_serial(const std::vector<BleuPair>& pairs, const BleuSettings& settings = {});

BleuReport sentence_bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
                         const BleuSettings& settings = {.max_n = 4, .smoothing = true});

/// Aligned plain-text rendering.
std::string format_report(const BleuReport& report);
/// Machine-readable record: p1..pN, bp, score and the raw counts.
std::string report_json(const BleuReport& report);

}  // namespace s2p
