#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "s2p/corpus.hpp"
#include "s2p/kernels.hpp"

namespace s2p {

enum class PosTag { Noun, Verb, Adj, Num, Func, Other };

const char* to_string(PosTag tag);

struct TaggedToken {
  std::string text;
  PosTag tag = PosTag::Other;
  bool operator==(const TaggedToken&) const = default;
};

/// Lowercases, splits on anything that is not a letter or digit, and tags
/// each token: lexicon, then suffixes, then digits, then code verbs.
/// Throws Error("empty after cleaning") when no token survives.
std::vector<TaggedToken> preprocess_text(std::string_view text);

PosTag tag_word(std::string_view lowercase_word);
bool is_stopword(std::string_view lowercase_word);

struct IndexOptions {
  // Multiplier per PosTag, indexed by the enum value.
  std::array<double, 6> tag_boost{1.5, 1.5, 1.0, 1.0, 2.0, 1.0};
  double stopword_weight = 0.3;

  bool operator==(const IndexOptions&) const = default;
};

class TfIdfIndex {
 public:
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  const std::vector<SparseVector>& doc_vectors() const { return docs_; }
  const std::vector<TaskSample>& samples() const { return samples_; }
  const IndexOptions& options() const { return options_; }
  std::optional<std::uint32_t> dimension(const std::string& term) const;
  std::size_t vocabulary_size() const { return terms_.size(); }

  /// Unit-length (or empty, when no term is known) weighted query vector.
  SparseVector vectorize(const std::vector<TaggedToken>& tokens) const;

 private:
  friend TfIdfIndex build_index(const std::vector<TaskSample>&, const IndexOptions&);
  friend std::optional<TfIdfIndex> load_index(const std::filesystem::path&, const std::vector<TaskSample>&,
                                              const IndexOptions&);

  std::map<std::string, std::uint32_t> vocabulary_;
  std::vector<std::string> terms_;  // dimension -> term, first-occurrence order
  std::vector<double> idf_;
  std::vector<SparseVector> docs_;
  std::vector<TaskSample> samples_;
  IndexOptions options_;
};

/// idf = ln((1+D)/(1+df)) + 1; weight = tf * idf * tag boost (* stopword
/// weight), then L2-normalized. Throws when a description has no terms.
TfIdfIndex build_index(const std::vector<TaskSample>& corpus, const IndexOptions& options = {});

/// Fingerprint of a corpus, used to invalidate cached indexes.
std::string corpus_hash(const std::vector<TaskSample>& corpus);

/// Text cache: header line `s2p-index 1`, corpus hash, options, then terms
/// with idf and sparse document rows, all reals as C99 hex floats.
void save_index(const TfIdfIndex& index, const std::filesystem::path& path);
/// Returns nothing when the cache is missing, from another format version,
/// or built from a different corpus or options.
std::optional<TfIdfIndex> load_index(const std::filesystem::path& path, const std::vector<TaskSample>& corpus,
                                     const IndexOptions& options = {});

struct SyntaxFix {
  enum class Kind { Colon, Indent, TrailingSpace, Unbalanced };
  Kind kind;
  int line = 0;          // 1-based
  std::string detail;
  bool applied = true;   // false for report-only entries (unbalanced brackets)

  bool operator==(const SyntaxFix&) const = default;
};

std::string describe(const SyntaxFix& fix);

struct CorrectedCode {
  std::string code;
  std::vector<SyntaxFix> fixes;
};

/// Post-generation cleanup, in order: bracket balance report, missing `:`
/// on block-keyword lines, indentation re-normalized to 4 spaces per level,
/// trailing whitespace stripped. Idempotent.
CorrectedCode correct_syntax(std::string_view code);

struct CodeCandidate {
  std::string code;
  double similarity = 0.0;
  std::int64_t source_id = 0;
  std::vector<SyntaxFix> syntax_fixes;
};

/// Top-k neighbours by cosine similarity, ties to the lower id, each passed
/// through correct_syntax.
std::vector<CodeCandidate> generate_code(std::string_view query, const TfIdfIndex& index, int k = 1);

/// Cosine similarity of the query against every document, in corpus order.
std::vector<double> score_all(const TfIdfIndex& index, const SparseVector& query);
std::vector<double> score_all_serial(const TfIdfIndex& index, const SparseVector& query);

}  // namespace s2p
