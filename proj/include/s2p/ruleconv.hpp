#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "s2p/pylex.hpp"

namespace s2p {

enum class RuleTier { Advanced, Prefix, Basic };

const char* to_string(RuleTier tier);

// One element of a rule pattern.
//   word          literal token text
//   {name}        lazy capture of one or more bracket-balanced tokens
//   {name*}       same, but may be empty
//   {name:EXPR}   like {name} without a top-level comma
//   {name:KIND}   exactly one token of the given TokenKind
//   !word         zero-width: the next token is not `word`
struct PatternElement {
  enum class Type { Literal, Capture, NotNext };
  Type type = Type::Literal;
  std::string text;                   // literal text, or capture name
  std::optional<TokenKind> kind;      // single-token capture
  bool allow_empty = false;
  bool single_expression = false;     // {name:EXPR}: no top-level comma
};

struct Rule {
  RuleTier tier = RuleTier::Basic;
  // Line rules match a whole line of the given kind; expression rules (the
  // pattern starts with `~`) rewrite token runs inside rendered captures.
  bool expression = false;
  std::optional<LineKind> kind;       // empty means any kind
  std::vector<PatternElement> pattern;
  std::string template_text;
  std::string source;                 // the rule as written, for messages
  int line = 0;                       // line in the rule table, 0 if built in
};

/// Immutable once loaded. Rules are stored ADVANCED, PREFIX, BASIC, keeping
/// file order within a tier, which is the firing priority.
class RuleSet {
 public:
  RuleSet() = default;
  RuleSet(std::vector<Rule> rules, std::string version);

  const std::vector<Rule>& rules() const { return rules_; }
  const std::string& version() const { return version_; }
  std::size_t size() const { return rules_.size(); }

 private:
  std::vector<Rule> rules_;
  std::string version_;
};

/// Text of the built-in rule table (also shipped as rules/default.rules).
std::string_view builtin_rule_table();
RuleSet builtin_ruleset();
/// Parses and validates a rule table. `origin` prefixes error messages.
RuleSet parse_ruleset(std::string_view text, const std::string& origin = "rules");
/// Loads a table from disk; with no path the built-in table is returned.
RuleSet load_ruleset(const std::optional<std::filesystem::path>& path);

enum class LineRole { Plain, Open, Continue, Close };

struct PseudoLine {
  int depth = 0;
  std::string text;
  LineRole role = LineRole::Plain;
  bool fallback = false;
  int source_line = 0;  // 0 for END lines
};

struct PseudoDoc {
  std::vector<PseudoLine> lines;
  std::size_t source_lines = 0;
  std::size_t fallback_count() const;
  std::string to_text() const;
};

struct RenderedLine {
  std::string text;
  bool fallback = false;
};

/// Renders one classified line with the first matching rule in priority
/// order. Lines no rule matches become `EXECUTE: <code>`.
RenderedLine apply_rules(const LineNode& node, const RuleSet& rules);

using LineRenderer = std::function<RenderedLine(const LineNode&)>;

/// Line-by-line conversion with END emission. Blank and comment lines are
/// dropped; every def/if/for/while line that ends in `:` opens a block that is
/// closed with END FUNCTION/IF/FOR/WHILE when the indentation returns to its
/// level. elif/else continue an open if (else also continues for/while).
PseudoDoc convert_program(std::string_view source, const RuleSet& rules);
PseudoDoc convert_program(std::string_view source, const LineRenderer& render);

/// Writes depth*4 spaces + text per line, LF endings, trailing newline.
std::string format_txt(const PseudoDoc& doc);
void emit_txt(const PseudoDoc& doc, const std::filesystem::path& path);

/// True when openers and END lines nest properly (counter never negative and
/// ends at zero, END kinds match their openers).
bool blocks_balanced(const PseudoDoc& doc);

}  // namespace s2p
