#include "s2p/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "s2p/hash.hpp"

namespace s2p {

namespace {

// Closed-class words: tagged OTHER and down-weighted in the index.
constexpr std::array<std::string_view, 50> kStopwords{
    "a",    "an",    "the",  "and",   "or",    "but",  "if",    "of",    "to",    "in",
    "on",   "at",    "by",   "for",   "with",  "from", "as",    "into",  "is",    "are",
    "was",  "be",    "been", "it",    "its",   "this", "that",  "these", "those", "which",
    "who",  "whom",  "whose", "what", "all",   "any",  "each",  "every", "some",  "no",
    "not",  "than",  "then", "there", "their", "they", "them",  "we",    "you",   "i"};

const std::set<std::string_view>& nouns() {
  static const std::set<std::string_view> words{
      "maximum", "minimum",  "string",    "strings",   "list",     "lists",    "array",    "arrays",
      "number",  "numbers",  "integer",   "integers",  "sum",      "element",  "elements", "word",
      "words",   "character", "characters", "char",    "tuple",    "tuples",   "dictionary", "dict",
      "value",   "values",   "key",       "keys",      "index",    "length",   "average",  "mean",
      "median",  "product",  "factorial", "prime",     "primes",   "square",   "squares",  "cube",
      "root",    "area",     "volume",    "perimeter", "circle",   "triangle", "rectangle", "matrix",
      "vowels",  "vowel",    "digits",    "digit",     "sentence", "count",    "frequency", "substring",
      "sequence", "series",  "year",      "palindrome", "set",     "item",     "items",    "pair",
      "pairs",   "order",    "power",     "text",      "file",     "line",     "lines",    "number",
      "divisor", "divisors", "multiple",  "multiples", "fibonacci", "gcd",     "lcm",      "radius",
      "degree",  "degrees",  "celsius",   "fahrenheit", "binary",  "decimal",  "bits",     "bit",
      "space",   "spaces",   "letter",    "letters",   "case",     "position", "array",    "grid"};
  return words;
}

const std::set<std::string_view>& verbs() {
  static const std::set<std::string_view> words{
      "reverse",  "remove",  "check",     "add",      "convert",   "merge",   "split",   "replace",
      "swap",     "multiply", "divide",   "rotate",   "flatten",   "filter",  "join",    "insert",
      "append",   "delete",  "extract",   "calculate", "get",      "create",  "move",    "shift",
      "toggle",   "search",  "match",     "concatenate", "compare", "determine", "identify", "generate",
      "count",    "capitalize", "strip",  "trim",     "encode",    "decode",  "zip",     "map",
      "round",    "double",  "square",    "subtract", "combine",   "group",   "partition", "interleave"};
  return words;
}

const std::set<std::string_view>& adjectives() {
  static const std::set<std::string_view> words{
      "even",    "odd",      "first",    "last",     "unique",   "duplicate", "common",   "positive",
      "negative", "equal",   "given",    "same",     "distinct", "consecutive", "adjacent", "sorted",
      "empty",   "lower",    "upper",    "uppercase", "lowercase", "perfect", "whole",   "total",
      "nth",     "kth",      "missing",  "repeated", "smaller",  "larger",    "longer",   "shorter"};
  return words;
}

constexpr std::array<std::string_view, 5> kCodeVerbs{"return", "print", "sort", "find", "compute"};

bool ends_with(std::string_view w, std::string_view suffix) {
  // The stem must keep at least two letters, so "bed" and "ring" stay untagged.
  return w.size() >= suffix.size() + 2 && w.substr(w.size() - suffix.size()) == suffix;
}

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

std::string options_line(const IndexOptions& o) {
  std::string s = "options";
  for (double b : o.tag_boost) s += " " + hexfloat(b);
  s += " " + hexfloat(o.stopword_weight);
  return s;
}

double term_weight(const std::string& term, const IndexOptions& options) {
  double w = options.tag_boost[static_cast<std::size_t>(tag_word(term))];
  if (is_stopword(term)) w *= options.stopword_weight;
  return w;
}

}  // namespace

const char* to_string(PosTag tag) {
  switch (tag) {
    case PosTag::Noun: return "NOUN";
    case PosTag::Verb: return "VERB";
    case PosTag::Adj: return "ADJ";
    case PosTag::Num: return "NUM";
    case PosTag::Func: return "FUNC";
    case PosTag::Other: return "OTHER";
  }
  return "?";
}

bool is_stopword(std::string_view w) {
  return std::find(kStopwords.begin(), kStopwords.end(), w) != kStopwords.end();
}

PosTag tag_word(std::string_view w) {
  if (is_stopword(w)) return PosTag::Other;
  if (nouns().count(w)) return PosTag::Noun;
  if (verbs().count(w)) return PosTag::Verb;
  if (adjectives().count(w)) return PosTag::Adj;
  for (auto s : {"ing", "ed", "ize"}) {
    if (ends_with(w, s)) return PosTag::Verb;
  }
  for (auto s : {"tion", "ness", "ment"}) {
    if (ends_with(w, s)) return PosTag::Noun;
  }
  for (auto s : {"est", "ous", "ive"}) {
    if (ends_with(w, s)) return PosTag::Adj;
  }
  if (!w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    return PosTag::Num;
  }
  if (std::find(kCodeVerbs.begin(), kCodeVerbs.end(), w) != kCodeVerbs.end()) return PosTag::Func;
  return PosTag::Other;
}

std::vector<TaggedToken> preprocess_text(std::string_view text) {
  std::vector<TaggedToken> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      const PosTag tag = tag_word(word);
      out.push_back({std::move(word), tag});
      word.clear();
    }
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      word += static_cast<char>(std::tolower(c));
    } else {
      flush();
    }
  }
  flush();
  if (out.empty()) throw Error("empty after cleaning");
  return out;
}

std::optional<std::uint32_t> TfIdfIndex::dimension(const std::string& term) const {
  const auto it = vocabulary_.find(term);
  if (it == vocabulary_.end()) return std::nullopt;
  return it->second;
}

SparseVector TfIdfIndex::vectorize(const std::vector<TaggedToken>& tokens) const {
  std::map<std::uint32_t, double> acc;
  for (const auto& t : tokens) {
    const auto dim = dimension(t.text);
    if (!dim) continue;
    acc[*dim] += idf_[*dim] * term_weight(t.text, options_);
  }
  SparseVector v(acc.begin(), acc.end());
  double norm = 0.0;
  for (const auto& [d, w] : v) norm += w * w;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (auto& [d, w] : v) w /= norm;
  }
  return v;
}

TfIdfIndex build_index(const std::vector<TaskSample>& corpus, const IndexOptions& options) {
  if (corpus.empty()) throw Error("cannot index an empty corpus");
  TfIdfIndex index;
  index.options_ = options;
  index.samples_ = corpus;

  std::vector<std::vector<TaggedToken>> tokenized;
  tokenized.reserve(corpus.size());
  std::vector<std::size_t> df;
  for (const auto& sample : corpus) {
    std::vector<TaggedToken> toks;
    try {
      toks = preprocess_text(sample.description);
    } catch (const Error&) {
      throw Error("document " + std::to_string(sample.id) + " has no indexable terms");
    }
    std::set<std::uint32_t> present;
    for (const auto& t : toks) {
      auto [it, inserted] = index.vocabulary_.try_emplace(t.text, static_cast<std::uint32_t>(index.terms_.size()));
      if (inserted) {
        index.terms_.push_back(t.text);
        df.push_back(0);
      }
      present.insert(it->second);
    }
    for (auto d : present) ++df[d];
    tokenized.push_back(std::move(toks));
  }

  const double docs = static_cast<double>(corpus.size());
  index.idf_.resize(index.terms_.size());
  for (std::size_t d = 0; d < df.size(); ++d) {
    index.idf_[d] = std::log((1.0 + docs) / (1.0 + static_cast<double>(df[d]))) + 1.0;
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    SparseVector v = index.vectorize(tokenized[i]);
    if (v.empty()) throw Error("document " + std::to_string(corpus[i].id) + " has an all-zero vector");
    index.docs_.push_back(std::move(v));
  }
  return index;
}

std::string corpus_hash(const std::vector<TaskSample>& corpus) {
  Fnv1a h;
  for (const auto& s : corpus) {
    h.field(std::to_string(s.id));
    h.field(s.description);
    h.field(s.code);
  }
  return h.hex();
}

void save_index(const TfIdfIndex& index, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "s2p-index 1\n";
  out << "corpus " << corpus_hash(index.samples()) << "\n";
  out << options_line(index.options()) << "\n";
  out << "terms " << index.terms().size() << "\n";
  for (std::size_t d = 0; d < index.terms().size(); ++d) {
    out << index.terms()[d] << '\t' << hexfloat(index.idf()[d]) << "\n";
  }
  out << "docs " << index.doc_vectors().size() << "\n";
  for (const auto& v : index.doc_vectors()) {
    out << v.size();
    for (const auto& [d, w] : v) out << ' ' << d << ':' << hexfloat(w);
    out << "\n";
  }
  write_file(path, out.str());
}

std::optional<TfIdfIndex> load_index(const std::filesystem::path& path, const std::vector<TaskSample>& corpus,
                                     const IndexOptions& options) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line) || line != "s2p-index 1") return std::nullopt;
  if (!std::getline(in, line) || line != "corpus " + corpus_hash(corpus)) return std::nullopt;
  if (!std::getline(in, line) || line != options_line(options)) return std::nullopt;

  TfIdfIndex index;
  index.options_ = options;
  index.samples_ = corpus;
  std::string word;
  std::size_t count = 0;
  if (!(in >> word >> count) || word != "terms") return std::nullopt;
  std::getline(in, line);
  for (std::size_t d = 0; d < count; ++d) {
    if (!std::getline(in, line)) return std::nullopt;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) return std::nullopt;
    index.terms_.push_back(line.substr(0, tab));
    index.vocabulary_[index.terms_.back()] = static_cast<std::uint32_t>(d);
    index.idf_.push_back(std::strtod(line.c_str() + tab + 1, nullptr));
  }
  if (!(in >> word >> count) || word != "docs" || count != corpus.size()) return std::nullopt;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t nnz = 0;
    if (!(in >> nnz)) return std::nullopt;
    SparseVector v;
    for (std::size_t e = 0; e < nnz; ++e) {
      if (!(in >> word)) return std::nullopt;
      const auto colon = word.find(':');
      if (colon == std::string::npos) return std::nullopt;
      v.emplace_back(static_cast<std::uint32_t>(std::stoul(word.substr(0, colon))),
                     std::strtod(word.c_str() + colon + 1, nullptr));
    }
    index.docs_.push_back(std::move(v));
  }
  return index;
}

namespace {

std::vector<double> densify(const TfIdfIndex& index, const SparseVector& query) {
  std::vector<double> dense(index.vocabulary_size(), 0.0);
  for (const auto& [d, w] : query) dense[d] = w;
  return dense;
}

void clamp_unit(std::vector<double>& scores) {
  // Rounding can push a self-similarity a hair above 1.
  for (double& s : scores) s = std::clamp(s, 0.0, 1.0);
}

}  // namespace

std::vector<double> score_all(const TfIdfIndex& index, const SparseVector& query) {
  const auto dense = densify(index, query);
  std::vector<double> scores(index.doc_vectors().size());
  kernels::sparse_dots(dense, index.doc_vectors(), scores);
  clamp_unit(scores);
  return scores;
}

std::vector<double> score_all_serial(const TfIdfIndex& index, const SparseVector& query) {
  const auto dense = densify(index, query);
  std::vector<double> scores(index.doc_vectors().size());
  kernels::serial::sparse_dots(dense, index.doc_vectors(), scores);
  clamp_unit(scores);
  return scores;
}

std::vector<CodeCandidate> generate_code(std::string_view query, const TfIdfIndex& index, int k) {
  if (k < 1) throw Error("k must be at least 1");
  const SparseVector qv = index.vectorize(preprocess_text(query));
  const auto scores = score_all(index, qv);
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto& samples = index.samples();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return samples[a].id < samples[b].id;
  });
  order.resize(std::min(order.size(), static_cast<std::size_t>(k)));

  std::vector<CodeCandidate> out;
  for (std::size_t i : order) {
    CorrectedCode fixed = correct_syntax(samples[i].code);
    out.push_back({std::move(fixed.code), scores[i], samples[i].id, std::move(fixed.fixes)});
  }
  return out;
}

}  // namespace s2p
