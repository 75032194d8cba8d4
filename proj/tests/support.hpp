#pragma once

// Shared by the unit suites and the acceptance binary: fixture locations,
// scratch directories and the fuzz generators.

#include <algorithm>
#include <cstdlib>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "oracles.hpp"
#include "s2p/random.hpp"
#include "s2p/tinyformer.hpp"

namespace s2p::test {

inline std::filesystem::path fixtures() { return S2P_FIXTURES_DIR; }
inline std::filesystem::path fixture(const std::string& rel) { return fixtures() / rel; }
inline std::filesystem::path cli_path() { return S2P_CLI_PATH; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// The demo story as the CLI reads it: file contents minus trailing newlines.
inline std::string demo_story() {
  std::string text = slurp(fixture("demo/story.txt"));
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

/// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("s2p-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Runs a shell command and returns its exit status (-1 if it did not exit).
inline int run(const std::string& command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

/// The CLI with arguments, stdout and stderr sent to the given files.
inline int run_cli(const std::string& args, const std::filesystem::path& out, const std::filesystem::path& err) {
  return run(quoted(cli_path()) + " " + args + " >" + quoted(out) + " 2>" + quoted(err));
}

template <class T>
const T& pick(SeededRng& rng, const std::vector<T>& pool) {
  return pool[static_cast<std::size_t>(rng.below(pool.size()))];
}

inline std::string random_expr(SeededRng& rng, int budget = 2) {
  static const std::vector<std::string> atoms{"x", "y", "n", "total", "items", "0", "1", "42", "3.5",
                                              "'s'", "\"txt\"", "i", "result", "True", "None"};
  static const std::vector<std::string> ops{"+", "-", "*", "/", "%", "//", "**"};
  const auto roll = rng.below(6);
  if (budget <= 0 || roll < 3) return pick(rng, atoms);
  if (roll == 3) return random_expr(rng, budget - 1) + " " + pick(rng, ops) + " " + random_expr(rng, budget - 1);
  if (roll == 4) return "len(" + random_expr(rng, budget - 1) + ")";
  return pick(rng, atoms) + "[" + random_expr(rng, budget - 1) + "]";
}

inline std::string random_cond(SeededRng& rng) {
  static const std::vector<std::string> cmp{"<", ">", "<=", ">=", "==", "!="};
  return random_expr(rng, 1) + " " + pick(rng, cmp) + " " + random_expr(rng, 1);
}

inline std::string random_statement(SeededRng& rng) {
  switch (rng.below(8)) {
    case 0: return "x = " + random_expr(rng);
    case 1: return "total += " + random_expr(rng);
    case 2: return "print(" + random_expr(rng) + ")";
    case 3: return "return " + random_expr(rng);
    case 4: return "items.append(" + random_expr(rng) + ")";
    case 5: return "yield x";
    case 6: return "# note " + std::to_string(rng.below(100));
    default: return "result = [" + random_expr(rng) + ", " + random_expr(rng) + "]";
  }
}

/// A well-indented program of roughly `lines` lines using def/if/elif/else/
/// for/while blocks, nested at most `max_depth` deep. Every opener gets at
/// least one body line; blank lines appear at random.
inline std::string random_program(SeededRng& rng, int lines, int max_depth = 4) {
  struct Open {
    int depth;
    char kind;  // 'i' if, 'l' loop, 'f' def
    bool has_else;
  };
  std::vector<Open> stack;
  std::string out;
  int depth = 0;
  bool need_body = false;
  auto emit = [&](int d, const std::string& text) { out += std::string(static_cast<std::size_t>(d) * 4, ' ') + text + "\n"; };
  for (int k = 0; k < lines || need_body || !stack.empty(); ++k) {
    if (k >= lines && !need_body) {
      // Wind down: close everything.
      stack.clear();
      break;
    }
    const auto roll = rng.below(10);
    if (!need_body && !stack.empty() && roll < 2) {
      // Dedent one or more levels.
      const auto levels = 1 + rng.below(stack.size());
      for (std::uint64_t j = 0; j < levels; ++j) stack.pop_back();
      depth = stack.empty() ? 0 : stack.back().depth + 1;
      continue;
    }
    if (!need_body && !stack.empty() && roll == 2 && stack.back().kind == 'i' && !stack.back().has_else) {
      // Continue the innermost if at its own depth.
      const Open top = stack.back();
      const bool is_else = rng.below(2) == 0;
      emit(top.depth, is_else ? "else:" : "elif " + random_cond(rng) + ":");
      if (is_else) stack.back().has_else = true;
      depth = top.depth + 1;
      need_body = true;
      continue;
    }
    if (depth < max_depth && roll >= 7) {
      switch (rng.below(5)) {
        case 0: emit(depth, "def fn" + std::to_string(k) + "(a, b):"); stack.push_back({depth, 'f', false}); break;
        case 1: emit(depth, "if " + random_cond(rng) + ":"); stack.push_back({depth, 'i', false}); break;
        case 2: emit(depth, "for i in range(" + random_expr(rng, 1) + "):"); stack.push_back({depth, 'l', false}); break;
        case 3: emit(depth, "for v in items:"); stack.push_back({depth, 'l', false}); break;
        default: emit(depth, "while " + random_cond(rng) + ":"); stack.push_back({depth, 'l', false}); break;
      }
      ++depth;
      need_body = true;
      continue;
    }
    if (rng.below(12) == 0) out += "\n";
    std::string stmt = random_statement(rng);
    if (need_body && stmt.front() == '#') stmt = "pass";
    emit(depth, stmt);
    need_body = false;
  }
  return out;
}

/// One comment-free line built from lexemes of every token kind joined with
/// random amounts of whitespace (sometimes none).
inline std::string random_line(SeededRng& rng) {
  static const std::vector<std::string> pieces{
      "x",   "foo_bar", "_tmp", "for", "in",  "if",   "not", "lambda", "0",    "12",   "3.25", "0x1F", "1e-3",
      "7j",  "'a b'",   "\"q\"", "r'\\d'", "b\"raw\"", "f'{x}'", "+", "-", "*", "**", "//", "%", "==", "!=",
      "<=",  ">=",      "<",    ">",   "=",   "+=",   "->",  ":=",     "(",    ")",    "[",    "]",    "{",
      "}",   ",",       ":",    ";",   ".",   "@",    "~",   "$",      "\"\"", "''",   "'''t'''"};
  static const std::vector<std::string> gaps{"", " ", " ", "  ", "\t"};
  const auto n = 1 + rng.below(12);
  std::string line;
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i) line += pick(rng, gaps);
    line += pick(rng, pieces);
  }
  return line;
}

/// Code with the kinds of damage correct_syntax repairs: missing colons,
/// off-unit indentation, trailing blanks, unbalanced brackets, tabs.
inline std::string random_damaged_snippet(SeededRng& rng) {
  static const std::vector<std::string> heads{"def f(a)", "if x > 1", "for i in range(3)", "while n", "else",
                                              "elif y", "x = (1 + 2", "print((1)", "return [a, b", "y = 2",
                                              "items = {1: 2}", "s = 'a:b'", "try", "with open(p) as f"};
  std::string out;
  const auto lines = 1 + rng.below(8);
  for (std::uint64_t i = 0; i < lines; ++i) {
    const auto indent = rng.below(4) == 0 ? rng.below(10) : 4 * rng.below(3);
    out += std::string(static_cast<std::size_t>(indent), rng.below(6) == 0 ? '\t' : ' ');
    out += pick(rng, heads);
    if (rng.below(3) == 0) out += ":";
    if (rng.below(3) == 0) out += std::string(static_cast<std::size_t>(1 + rng.below(3)), ' ');
    if (rng.below(8) == 0) out += "\n";
    out += "\n";
  }
  return out;
}

/// Small BLEU corpora (1-3 pairs, 1-8 tokens, vocabulary of at most 5
/// words). References are mostly edits of the candidate so that higher-order
/// matches are common.
inline std::vector<oracle::Case> random_bleu_cases(SeededRng& rng) {
  static const std::vector<std::string> words{"a", "b", "c", "d", "e"};
  const auto vocab = 2 + rng.below(4);
  auto word = [&] { return words[static_cast<std::size_t>(rng.below(vocab))]; };
  std::vector<oracle::Case> cases(1 + rng.below(3));
  for (auto& c : cases) {
    c.candidate.resize(1 + rng.below(8));
    for (auto& w : c.candidate) w = word();
    c.references.resize(1 + rng.below(3));
    for (auto& r : c.references) {
      r = c.candidate;
      for (auto& w : r)
        if (rng.below(4) == 0) w = word();
      if (rng.below(3) == 0) r.push_back(word());
      if (rng.below(3) == 0 && r.size() > 1) r.erase(r.begin() + static_cast<std::ptrdiff_t>(rng.below(r.size())));
    }
  }
  return cases;
}

/// The gradient-check model: d_model 8, one layer each side, vocab 12.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 8;
  c.heads = 2;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.ffn_dim = 16;
  c.max_len = 12;
  c.seed = 3;
  return c;
}
inline constexpr int kTinyVocab = 12;

inline std::vector<int> random_ids(SeededRng& rng, int len, int vocab) {
  std::vector<int> ids(static_cast<std::size_t>(len));
  for (auto& id : ids)
    id = Vocab::kReserved + static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab - Vocab::kReserved)));
  return ids;
}

inline TrainingExample tiny_example() {
  SeededRng rng(3);
  TrainingExample ex;
  ex.source = random_ids(rng, 5, kTinyVocab);
  const auto body = random_ids(rng, 4, kTinyVocab);
  ex.target_in = {Vocab::kBos};
  ex.target_in.insert(ex.target_in.end(), body.begin(), body.end());
  ex.labels = body;
  ex.labels.push_back(Vocab::kEos);
  return ex;
}

/// True when logits up to each step ignore every later target token, over
/// `trials` random source/target pairs.
inline bool causal_on_random_inputs(const ModelParams& p, int trials, std::uint64_t seed) {
  SeededRng rng(seed);
  for (int trial = 0; trial < trials; ++trial) {
    const int len = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(p.config.max_len - 2)));
    const auto src = random_ids(rng, 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(p.config.max_len))), p.vocab_size);
    auto tgt = random_ids(rng, len, p.vocab_size);
    tgt[0] = Vocab::kBos;
    const auto base = forward(p, src, tgt);
    const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(len - 1)));
    auto changed = tgt;
    for (int j = t + 1; j < len; ++j) changed[static_cast<std::size_t>(j)] = random_ids(rng, 1, p.vocab_size)[0];
    const auto other = forward(p, src, changed);
    for (int r = 0; r <= t; ++r)
      for (int c = 0; c < p.vocab_size; ++c)
        if (other(r, c) != base(r, c)) return false;
  }
  return true;
}

}  // namespace s2p::test
