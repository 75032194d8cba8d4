#include "s2p/metric.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace s2p {

namespace {

struct PairStats {
  std::vector<std::int64_t> matches;
  std::vector<std::int64_t> totals;
  std::int64_t candidate_len = 0;
  std::int64_t reference_len = 0;
};

PairStats pair_stats(const BleuPair& pair, int max_n) {
  if (pair.candidate.empty()) throw MetricError("empty candidate");
  if (pair.references.empty()) throw MetricError("candidate without references");
  PairStats s;
  s.matches.resize(static_cast<std::size_t>(max_n));
  s.totals.resize(static_cast<std::size_t>(max_n));
  for (int n = 1; n <= max_n; ++n) {
    const Fraction f = clipped_precision(pair.candidate, pair.references, n);
    s.matches[n - 1] = f.numerator;
    s.totals[n - 1] = f.denominator;
  }
  s.candidate_len = static_cast<std::int64_t>(pair.candidate.size());
  s.reference_len = effective_reference_length(pair.candidate.size(), pair.references);
  return s;
}

BleuReport combine(const std::vector<PairStats>& stats, const BleuSettings& settings) {
  BleuReport r;
  r.smoothing = settings.smoothing;
  r.precisions.assign(static_cast<std::size_t>(settings.max_n), Fraction{});
  for (const auto& s : stats) {
    for (int n = 0; n < settings.max_n; ++n) {
      r.precisions[n].numerator += s.matches[n];
      r.precisions[n].denominator += s.totals[n];
    }
    r.candidate_len += s.candidate_len;
    r.reference_len += s.reference_len;
  }
  // All-empty references leave nothing to be brief against; precision is 0 anyway.
  r.brevity_penalty = r.reference_len > 0 ? brevity_penalty(r.candidate_len, r.reference_len) : 1.0;
  double log_sum = 0.0;
  for (int n = 1; n <= settings.max_n; ++n) {
    const double p = r.precision(n);
    if (p <= 0.0) {
      r.score = 0.0;
      return r;
    }
    log_sum += std::log(p);
  }
  r.score = r.brevity_penalty * std::exp(log_sum / settings.max_n);
  return r;
}

void check_settings(const BleuSettings& settings) {
  if (settings.max_n < 1) throw MetricError("max_n must be at least 1");
}

}  // namespace

double BleuReport::precision(int n) const {
  const Fraction& f = precisions.at(static_cast<std::size_t>(n - 1));
  // A zero count with smoothing gets epsilon matches over at least one n-gram.
  if (f.numerator == 0) {
    return smoothing ? kSmoothingEpsilon / static_cast<double>(std::max<std::int64_t>(f.denominator, 1)) : 0.0;
  }
  return static_cast<double>(f.numerator) / static_cast<double>(f.denominator);
}

TokenSeq tokenize_for_bleu(std::string_view text) {
  TokenSeq out;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < text.size()) {
    while (i < text.size() && space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

NGramProfile ngram_profile(const TokenSeq& tokens, int n) {
  if (n < 1) throw MetricError("n-gram order must be at least 1");
  NGramProfile profile;
  profile.n = n;
  const auto order = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    ++profile.counts[NGram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                           tokens.begin() + static_cast<std::ptrdiff_t>(i + order))];
  }
  return profile;
}

Fraction clipped_precision(const TokenSeq& candidate, const std::vector<TokenSeq>& references, int n) {
  if (candidate.empty()) throw MetricError("empty candidate");
  const NGramProfile cand = ngram_profile(candidate, n);
  std::map<NGram, std::int64_t> max_ref;
  for (const auto& ref : references) {
    for (const auto& [gram, count] : ngram_profile(ref, n).counts) {
      auto& slot = max_ref[gram];
      slot = std::max(slot, count);
    }
  }
  Fraction f;
  for (const auto& [gram, count] : cand.counts) {
    f.denominator += count;
    if (const auto it = max_ref.find(gram); it != max_ref.end()) f.numerator += std::min(count, it->second);
  }
  return f;
}

double brevity_penalty(std::int64_t candidate_len, std::int64_t reference_len) {
  if (candidate_len <= 0 || reference_len <= 0) throw MetricError("lengths must be positive");
  if (candidate_len >= reference_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(reference_len) / static_cast<double>(candidate_len));
}

std::int64_t effective_reference_length(std::size_t candidate_len, const std::vector<TokenSeq>& references) {
  if (references.empty()) throw MetricError("no references");
  std::size_t best = references.front().size();
  for (const auto& ref : references) {
    const auto d = [candidate_len](std::size_t len) {
      return len > candidate_len ? len - candidate_len : candidate_len - len;
    };
    if (d(ref.size()) < d(best) || (d(ref.size()) == d(best) && ref.size() < best)) best = ref.size();
  }
  return static_cast<std::int64_t>(best);
}

BleuReport corpus_bleu_serial(const std::vector<BleuPair>& pairs, const BleuSettings& settings) {
  check_settings(settings);
  if (pairs.empty()) throw MetricError("empty corpus");
  std::vector<PairStats> stats;
  stats.reserve(pairs.size());
  for (const auto& p : pairs) stats.push_back(pair_stats(p, settings.max_n));
  return combine(stats, settings);
}

BleuReport corpus_bleu(const std::vector<BleuPair>& pairs, const BleuSettings& settings) {
  check_settings(settings);
  if (pairs.empty()) throw MetricError("empty corpus");
  for (const auto& p : pairs) {
    if (p.candidate.empty()) throw MetricError("empty candidate");
  }
  std::vector<PairStats> stats(pairs.size());
  const auto count = static_cast<std::ptrdiff_t>(pairs.size());
  bool failed = false;
#pragma omp parallel for schedule(dynamic, 16) if (count > 64)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    if (pairs[i].references.empty()) {
#pragma omp atomic write
      failed = true;
      continue;
    }
    stats[i] = pair_stats(pairs[i], settings.max_n);
  }
  if (failed) throw MetricError("candidate without references");
  return combine(stats, settings);
}

BleuReport sentence_bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
                         const BleuSettings& settings) {
  return corpus_bleu_serial({BleuPair{candidate, references}}, settings);
}

std::string format_report(const BleuReport& r) {
  std::string out;
  char buf[160];
  for (std::size_t n = 0; n < r.precisions.size(); ++n) {
    std::snprintf(buf, sizeof buf, "p%-2zu           %12.6f  (%lld/%lld)\n", n + 1,
                  r.precision(static_cast<int>(n + 1)), static_cast<long long>(r.precisions[n].numerator),
                  static_cast<long long>(r.precisions[n].denominator));
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "brevity       %12.6f\n", r.brevity_penalty);
  out += buf;
  std::snprintf(buf, sizeof buf, "cand_len      %12lld\nref_len       %12lld\n",
                static_cast<long long>(r.candidate_len), static_cast<long long>(r.reference_len));
  out += buf;
  std::snprintf(buf, sizeof buf, "smoothing     %12s\nBLEU          %12.6f\n", r.smoothing ? "on" : "off", r.score);
  out += buf;
  return out;
}

std::string report_json(const BleuReport& r) {
  nlohmann::ordered_json j;
  for (std::size_t n = 0; n < r.precisions.size(); ++n) {
    j["p" + std::to_string(n + 1)] = r.precision(static_cast<int>(n + 1));
  }
  j["bp"] = r.brevity_penalty;
  j["score"] = r.score;
  nlohmann::ordered_json counts;
  for (std::size_t n = 0; n < r.precisions.size(); ++n) {
    counts["matches" + std::to_string(n + 1)] = r.precisions[n].numerator;
    counts["total" + std::to_string(n + 1)] = r.precisions[n].denominator;
  }
  counts["candidate_len"] = r.candidate_len;
  counts["reference_len"] = r.reference_len;
  j["counts"] = counts;
  j["smoothing"] = r.smoothing;
  return j.dump();
}

}  // namespace s2p
