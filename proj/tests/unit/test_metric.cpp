#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "oracles.hpp"
#include "s2p/metric.hpp"
#include "support.hpp"

using namespace s2p;

namespace {

TokenSeq t(const char* text) { return tokenize_for_bleu(text); }

std::vector<BleuPair> to_pairs(const std::vector<oracle::Case>& cases) {
  std::vector<BleuPair> out;
  for (const auto& c : cases) out.push_back({c.candidate, c.references});
  return out;
}

BleuReport bleu1(const char* cand, const char* ref, BleuSettings s = {}) {
  return corpus_bleu({BleuPair{t(cand), {t(ref)}}}, s);
}

}  // namespace

TEST_SUITE("metric") {
  TEST_CASE("ngram profiles") {
    const TokenSeq aba{"a", "b", "a"};
    CHECK(ngram_profile(aba, 1).counts == std::map<NGram, std::int64_t>{{{"a"}, 2}, {{"b"}, 1}});
    CHECK(ngram_profile(aba, 2).counts == std::map<NGram, std::int64_t>{{{"a", "b"}, 1}, {{"b", "a"}, 1}});
    CHECK(ngram_profile({"a"}, 4).counts.empty());
    CHECK_THROWS_AS(ngram_profile(aba, 0), MetricError);
  }

  TEST_CASE("clipped precision") {
    CHECK(clipped_precision(t("the the the the"), {t("the cat sat")}, 1) == Fraction{1, 4});
    CHECK(clipped_precision(t("x y"), {t("a b")}, 1) == Fraction{0, 2});
    const auto s = t("a b c d e");
    for (int n = 1; n <= 5; ++n) CHECK(clipped_precision(s, {s}, n) == Fraction{6 - n, 6 - n});
    // The clip is the maximum over references, not the sum.
    CHECK(clipped_precision(t("a a a"), {t("a x"), t("a a y")}, 1) == Fraction{2, 3});
    CHECK_THROWS_AS(clipped_precision({}, {s}, 1), MetricError);
  }

  TEST_CASE("brevity penalty") {
    CHECK(brevity_penalty(10, 10) == 1.0);
    CHECK(brevity_penalty(4, 5) == doctest::Approx(0.7788007831).epsilon(1e-10));
    CHECK(brevity_penalty(20, 10) == 1.0);
    CHECK_THROWS_AS(brevity_penalty(0, 3), MetricError);
    for (std::int64_t r = 1; r <= 30; ++r)
      for (std::int64_t c = 1; c < 40; ++c) CHECK(brevity_penalty(c, r) <= brevity_penalty(c + 1, r));
  }

  TEST_CASE("effective reference length") {
    CHECK(effective_reference_length(5, {t("a b c"), t("a b c d e f g")}) == 3);  // |5-3| == |5-7|, shorter wins
    CHECK(effective_reference_length(6, {t("a b c"), t("a b c d e f g")}) == 7);
    CHECK_THROWS_AS(effective_reference_length(3, {}), MetricError);
  }

  TEST_CASE("hand-computed fixtures") {
    const double tol = 1e-9;
    // p1..p4 = 4/4, 3/3, 2/2, 1/1; BP = exp(1 - 5/4).
    const auto r = bleu1("a b c d", "a b c d e");
    CHECK(r.precisions == std::vector<Fraction>{{4, 4}, {3, 3}, {2, 2}, {1, 1}});
    CHECK(std::abs(r.brevity_penalty - std::exp(-0.25)) < tol);
    CHECK(std::abs(r.score - 0.7788007830714049) < tol);
    // Clipping: only one "the" counts.
    const auto clip = bleu1("the the the the", "the cat sat", {.max_n = 1});
    CHECK(std::abs(clip.precision(1) - 0.25) < tol);
    CHECK(std::abs(clip.score - 0.25) < tol);
    // No overlap annihilates the geometric mean.
    CHECK(bleu1("a b", "c d").score == 0.0);
    // Identity.
    CHECK(std::abs(bleu1("the cat sat on the mat", "the cat sat on the mat").score - 1.0) < tol);
    // Short prefix: BP = exp(1 - 4/2) and both bigram orders match fully.
    const auto prefix = bleu1("a b", "a b c d", {.max_n = 2});
    CHECK(std::abs(prefix.brevity_penalty - std::exp(-1.0)) < tol);
    CHECK(std::abs(prefix.score - std::exp(-1.0)) < tol);
    const auto prefix4 = bleu1("a b", "a b c d");
    CHECK(std::abs(prefix4.brevity_penalty - std::exp(-1.0)) < tol);
    CHECK(prefix4.score <= prefix4.brevity_penalty);
  }

  TEST_CASE("smoothing") {
    const auto disjoint = sentence_bleu(t("x y z"), {t("a b c")});
    CHECK(disjoint.score > 0.0);
    CHECK(disjoint.score < 0.1);
    // p_n = 1e-9 / max(total, 1) when nothing matches: 3, 2, 1 and 0 n-grams.
    const double expected = std::exp((std::log(1e-9 / 3) + std::log(1e-9 / 2) + std::log(1e-9) + std::log(1e-9)) / 4);
    CHECK(std::abs(disjoint.score - expected) < 1e-20);
    CHECK(bleu1("x y z", "a b c").score == 0.0);  // corpus default is unsmoothed
    CHECK(sentence_bleu(t("a b c d"), {t("a b c d")}).score == 1.0);
  }

  TEST_CASE("matches the brute-force oracle") {
    SeededRng rng(42);
    int nonzero = 0;
    for (int i = 0; i < 200; ++i) {
      const auto cases = test::random_bleu_cases(rng);
      const int max_n = 1 + static_cast<int>(rng.below(4));
      const double want = oracle::corpus_bleu(cases, max_n);
      const auto got = corpus_bleu(to_pairs(cases), {.max_n = max_n});
      CHECK(std::abs(got.score - want) < 1e-12);
      CHECK(corpus_bleu_serial(to_pairs(cases), {.max_n = max_n}).score == got.score);
      nonzero += want > 0.0 ? 1 : 0;
    }
    CHECK(nonzero > 50);
  }

  TEST_CASE("range, identity and numerator bounds") {
    SeededRng rng(9);
    for (int i = 0; i < 300; ++i) {
      const auto pairs = to_pairs(test::random_bleu_cases(rng));
      const auto r = corpus_bleu(pairs);
      CHECK(r.score >= 0.0);
      CHECK(r.score <= 1.0);
      for (const auto& f : r.precisions) CHECK(f.numerator <= f.denominator);
      bool identical = true;
      for (const auto& p : pairs) {
        bool any = false;
        for (const auto& ref : p.references) any = any || ref == p.candidate;
        identical = identical && any;
        for (int n = 1; n <= 4; ++n) {
          const auto f = clipped_precision(p.candidate, p.references, n);
          CHECK(f.numerator <= f.denominator);
        }
      }
      // Score 1 iff every candidate equals its reference, for single-reference
      // candidates of at least max_n tokens. Shorter ones have no 4-grams to
      // match; with several references a candidate can borrow its n-grams
      // from one and its length from another.
      bool applicable = true;
      for (const auto& p : pairs) applicable = applicable && p.candidate.size() >= 4 && p.references.size() == 1;
      if (applicable) CHECK((r.score == 1.0) == identical);
    }
  }

  TEST_CASE("invariant under injective token renaming") {
    SeededRng rng(31);
    for (int i = 0; i < 200; ++i) {
      auto pairs = to_pairs(test::random_bleu_cases(rng));
      const auto before = corpus_bleu(pairs, {.max_n = 2});
      auto rename = [](TokenSeq& s) {
        for (auto& w : s) w = "tok_" + std::string(1, static_cast<char>('z' - (w[0] - 'a')));
      };
      for (auto& p : pairs) {
        rename(p.candidate);
        for (auto& r : p.references) rename(r);
      }
      CHECK(corpus_bleu(pairs, {.max_n = 2}).score == before.score);
    }
  }

  TEST_CASE("serial and parallel corpus scores are bit-identical") {
    SeededRng rng(5);
    std::vector<BleuPair> big;
    for (int i = 0; i < 3000; ++i) {
      BleuPair p;
      p.candidate.resize(3 + rng.below(15));
      for (auto& w : p.candidate) w = "w" + std::to_string(rng.below(30));
      p.references = {p.candidate};
      for (auto& w : p.references[0])
        if (rng.below(3) == 0) w = "w" + std::to_string(rng.below(30));
      big.push_back(std::move(p));
    }
    const auto a = corpus_bleu(big);
    const auto b = corpus_bleu_serial(big);
    CHECK(a.score == b.score);
    CHECK(a.precisions == b.precisions);
    CHECK(a.reference_len == b.reference_len);
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(corpus_bleu({BleuPair{{"a"}, {}}}), MetricError);
    CHECK_THROWS_AS(corpus_bleu({BleuPair{{}, {{"a"}}}}), MetricError);
    CHECK_THROWS_AS(corpus_bleu({BleuPair{{"a"}, {{"a"}}}}, {.max_n = 0}), MetricError);
  }

  TEST_CASE("report renderings") {
    const auto r = bleu1("a b c d", "a b c d e");
    const auto text = format_report(r);
    CHECK(text.find("BLEU              0.778801") != std::string::npos);
    CHECK(text.find("(1/1)") != std::string::npos);
    const auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["p4"].get<double>() == 1.0);
    CHECK(j["bp"].get<double>() == r.brevity_penalty);
    CHECK(j["counts"]["reference_len"].get<int>() == 5);
    CHECK(j["smoothing"].get<bool>() == false);
  }
}
