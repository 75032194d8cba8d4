#include "s2p/ruleconv.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <variant>

#include "s2p/corpus.hpp"
#include "s2p/error.hpp"

namespace s2p {

namespace {

// ---------------------------------------------------------------- table parsing

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ') ++i;
    if (i > start) words.emplace_back(s.substr(start, i - start));
  }
  return words;
}

bool is_name(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

bool parse_token_kind(std::string_view name, TokenKind& out) {
  for (TokenKind k : {TokenKind::Keyword, TokenKind::Ident, TokenKind::Number, TokenKind::String,
                      TokenKind::Operator, TokenKind::Delimiter}) {
    if (name == to_string(k)) {
      out = k;
      return true;
    }
  }
  return false;
}

struct Placeholder {
  std::string name;
  std::string filter;
};

using TemplatePart = std::variant<std::string, Placeholder>;

std::vector<TemplatePart> parse_template(const std::string& text, const std::string& where) {
  std::vector<TemplatePart> parts;
  std::string literal;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      literal += text[i++];
      continue;
    }
    const auto close = text.find('}', i);
    if (close == std::string::npos) throw RuleError(where + ": unclosed placeholder");
    std::string inside = text.substr(i + 1, close - i - 1);
    Placeholder ph;
    if (const auto bar = inside.find('|'); bar != std::string::npos) {
      ph.filter = inside.substr(bar + 1);
      inside.resize(bar);
    }
    ph.name = inside;
    if (!is_name(ph.name)) throw RuleError(where + ": malformed placeholder {" + inside + "}");
    if (!ph.filter.empty() && ph.filter != "dec") {
      throw RuleError(where + ": unknown placeholder filter `" + ph.filter + "`");
    }
    if (!literal.empty()) parts.emplace_back(std::move(literal));
    literal.clear();
    parts.emplace_back(std::move(ph));
    i = close + 1;
  }
  if (!literal.empty()) parts.emplace_back(std::move(literal));
  return parts;
}

PatternElement parse_element(const std::string& word, const std::string& where) {
  PatternElement el;
  // `!=` and other operators stay literals; `!` + a word is a lookahead.
  if (word.size() > 1 && word.front() == '!' && (std::isalpha(static_cast<unsigned char>(word[1])) || word[1] == '_')) {
    el.type = PatternElement::Type::NotNext;
    el.text = word.substr(1);
    return el;
  }
  if (word.size() > 2 && word.front() == '{' && word.back() == '}') {
    std::string inside = word.substr(1, word.size() - 2);
    el.type = PatternElement::Type::Capture;
    if (const auto colon = inside.find(':'); colon != std::string::npos) {
      const std::string kind = inside.substr(colon + 1);
      inside.resize(colon);
      TokenKind tk;
      if (kind == "EXPR") {
        el.single_expression = true;
      } else if (parse_token_kind(kind, tk)) {
        el.kind = tk;
      } else {
        throw RuleError(where + ": unknown capture kind `" + kind + "`");
      }
    } else if (!inside.empty() && inside.back() == '*') {
      el.allow_empty = true;
      inside.pop_back();
    }
    if (!is_name(inside)) throw RuleError(where + ": malformed capture " + word);
    el.text = inside;
    return el;
  }
  el.type = PatternElement::Type::Literal;
  el.text = word;
  return el;
}

std::string pattern_key(const Rule& rule) {
  std::string key = rule.expression ? "~" : (rule.kind ? to_string(*rule.kind) : "ANY");
  for (const auto& el : rule.pattern) {
    key += ' ';
    switch (el.type) {
      case PatternElement::Type::Literal: key += el.text; break;
      case PatternElement::Type::NotNext: key += "!" + el.text; break;
      case PatternElement::Type::Capture:
        // Capture names do not change what a pattern matches.
        key += "{";
        if (el.kind) key += to_string(*el.kind);
        if (el.single_expression) key += "EXPR";
        if (el.allow_empty) key += "*";
        key += "}";
        break;
    }
  }
  return key;
}

Rule parse_rule_line(const std::string& line, int line_no, const std::string& origin) {
  const std::string where = origin + ":" + std::to_string(line_no);
  const auto bar1 = line.find(" | ");
  const auto bar2 = bar1 == std::string::npos ? std::string::npos : line.find(" | ", bar1 + 3);
  if (bar2 == std::string::npos) {
    throw RuleError(where + ": expected `TIER | pattern | template`");
  }
  Rule rule;
  rule.line = line_no;
  rule.source = line;
  const std::string tier = trim(line.substr(0, bar1));
  if (tier == "ADVANCED") {
    rule.tier = RuleTier::Advanced;
  } else if (tier == "PREFIX") {
    rule.tier = RuleTier::Prefix;
  } else if (tier == "BASIC") {
    rule.tier = RuleTier::Basic;
  } else {
    throw RuleError(where + ": unknown tier tag `" + tier + "`");
  }

  const auto words = split_words(line.substr(bar1 + 3, bar2 - bar1 - 3));
  if (words.empty()) throw RuleError(where + ": empty pattern");
  if (words[0] == "~") {
    rule.expression = true;
  } else if (words[0] != "ANY") {
    LineKind kind;
    if (!parse_line_kind(words[0], kind)) {
      throw RuleError(where + ": unknown line kind `" + words[0] + "`");
    }
    rule.kind = kind;
  }
  std::set<std::string> names;
  for (std::size_t i = 1; i < words.size(); ++i) {
    PatternElement el = parse_element(words[i], where);
    if (el.type == PatternElement::Type::Capture && !names.insert(el.text).second) {
      throw RuleError(where + ": capture {" + el.text + "} bound twice");
    }
    rule.pattern.push_back(std::move(el));
  }
  if (rule.expression) {
    const bool anchored =
        !rule.pattern.empty() && (rule.pattern[0].type == PatternElement::Type::Literal ||
                                  (rule.pattern[0].type == PatternElement::Type::Capture &&
                                   rule.pattern[0].kind.has_value()));
    if (!anchored) {
      throw RuleError(where + ": expression pattern must start with a literal or a single-token capture");
    }
  }

  rule.template_text = trim(line.substr(bar2 + 3));
  for (const auto& part : parse_template(rule.template_text, where)) {
    if (const auto* ph = std::get_if<Placeholder>(&part); ph && !names.count(ph->name)) {
      throw RuleError(where + ": placeholder {" + ph->name + "} is not bound by the pattern in rule `" +
                      line + "`");
    }
  }
  return rule;
}

// ---------------------------------------------------------------- matching

using Captures = std::map<std::string, std::pair<std::size_t, std::size_t>>;

bool is_open(const Token& t) {
  return t.kind == TokenKind::Delimiter && (t.text == "(" || t.text == "[" || t.text == "{");
}
bool is_close(const Token& t) {
  return t.kind == TokenKind::Delimiter && (t.text == ")" || t.text == "]" || t.text == "}");
}

// Backtracking matcher. On success `match_end` is the index after the match.
// A line rule must consume every token up to `end`.
bool match_from(const std::vector<PatternElement>& pattern, std::size_t ei,
                const std::vector<Token>& tokens, std::size_t ti, std::size_t end, bool anchored_end,
                Captures& caps, std::size_t& match_end) {
  if (ei == pattern.size()) {
    if (anchored_end && ti != end) return false;
    match_end = ti;
    return true;
  }
  const PatternElement& el = pattern[ei];
  switch (el.type) {
    case PatternElement::Type::Literal:
      if (ti < end && tokens[ti].text == el.text) {
        return match_from(pattern, ei + 1, tokens, ti + 1, end, anchored_end, caps, match_end);
      }
      return false;
    case PatternElement::Type::NotNext:
      if (ti < end && tokens[ti].text == el.text) return false;
      return match_from(pattern, ei + 1, tokens, ti, end, anchored_end, caps, match_end);
    case PatternElement::Type::Capture:
      break;
  }
  if (el.kind) {
    if (ti >= end || tokens[ti].kind != *el.kind) return false;
    caps[el.text] = {ti, ti + 1};
    if (match_from(pattern, ei + 1, tokens, ti + 1, end, anchored_end, caps, match_end)) return true;
    caps.erase(el.text);
    return false;
  }
  if (el.allow_empty) {
    caps[el.text] = {ti, ti};
    if (match_from(pattern, ei + 1, tokens, ti, end, anchored_end, caps, match_end)) return true;
  }
  int depth = 0;
  for (std::size_t stop = ti; stop < end; ++stop) {
    const Token& t = tokens[stop];
    if (is_open(t)) ++depth;
    if (is_close(t) && --depth < 0) break;
    if (el.single_expression && depth == 0 && t.kind == TokenKind::Delimiter && t.text == ",") break;
    if (depth != 0) continue;
    caps[el.text] = {ti, stop + 1};
    if (match_from(pattern, ei + 1, tokens, stop + 1, end, anchored_end, caps, match_end)) return true;
  }
  caps.erase(el.text);
  return false;
}

bool is_integer_literal(const std::string& s) {
  if (s.empty() || s.size() > 18) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

class Renderer {
 public:
  Renderer(const RuleSet& rules, const std::vector<Token>& tokens, const std::string& line)
      : tokens_(tokens), line_(line) {
    for (const Rule& r : rules.rules()) {
      if (r.expression) expression_rules_.push_back(&r);
    }
  }

  std::string instantiate(const Rule& rule, const Captures& caps) const {
    std::string out;
    for (const auto& part : parse_template(rule.template_text, rule.source)) {
      if (const auto* lit = std::get_if<std::string>(&part)) {
        out += *lit;
        continue;
      }
      const auto& ph = std::get<Placeholder>(part);
      const auto [b, e] = caps.at(ph.name);
      if (ph.filter == "dec") {
        if (e - b == 1 && tokens_[b].kind == TokenKind::Number && is_integer_literal(tokens_[b].text)) {
          out += std::to_string(std::stoll(tokens_[b].text) - 1);
        } else if (e - b == 1) {
          out += render(b, e) + "-1";
        } else {
          out += "(" + render(b, e) + ")-1";
        }
      } else {
        out += render(b, e);
      }
    }
    return out;
  }

  // Renders tokens [b, e) applying expression rules left to right, keeping
  // the original spacing between untouched tokens.
  std::string render(std::size_t b, std::size_t e) const {
    struct Piece {
      std::string text;
      std::size_t first, last;
      bool rewritten;
    };
    std::vector<Piece> pieces;
    std::size_t i = b;
    while (i < e) {
      bool done = false;
      for (const Rule* rule : expression_rules_) {
        Captures caps;
        std::size_t j = 0;
        if (match_from(rule->pattern, 0, tokens_, i, e, false, caps, j) && j > i) {
          pieces.push_back({instantiate(*rule, caps), i, j - 1, true});
          i = j;
          done = true;
          break;
        }
      }
      if (!done) {
        pieces.push_back({tokens_[i].text, i, i, false});
        ++i;
      }
    }
    std::string out;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      if (k > 0) {
        const Token& prev = tokens_[pieces[k - 1].last];
        const Token& cur = tokens_[pieces[k].first];
        std::string gap = line_.substr(prev.end_column(), cur.column - prev.end_column());
        // Words from a rewrite need a separator, but never before `,` `:` or
        // a closer, and never right after an opener.
        const bool tight = (!pieces[k].rewritten && (is_close(cur) || cur.text == "," || cur.text == ":")) ||
                           (!pieces[k - 1].rewritten && is_open(prev));
        if (gap.empty() && !tight && (pieces[k - 1].rewritten || pieces[k].rewritten)) gap = " ";
        out += gap;
      }
      out += pieces[k].text;
    }
    return out;
  }

 private:
  const std::vector<Token>& tokens_;
  const std::string& line_;
  std::vector<const Rule*> expression_rules_;
};

std::string code_text(const std::vector<Token>& tokens, const std::string& line) {
  if (tokens.empty()) return {};
  const int b = tokens.front().column;
  return line.substr(b, tokens.back().end_column() - b);
}

const char* end_keyword(LineKind kind) {
  switch (kind) {
    case LineKind::FuncDef: return "END FUNCTION";
    case LineKind::If: return "END IF";
    case LineKind::For: return "END FOR";
    case LineKind::While: return "END WHILE";
    default: return "END";
  }
}

bool opens_block(const LineNode& node) {
  if (node.kind != LineKind::FuncDef && node.kind != LineKind::If && node.kind != LineKind::For &&
      node.kind != LineKind::While) {
    return false;
  }
  const auto code = code_tokens(node.tokens);
  return !code.empty() && code.back().kind == TokenKind::Delimiter && code.back().text == ":";
}

bool continues(LineKind open, LineKind next) {
  if (next == LineKind::Elif) return open == LineKind::If;
  if (next == LineKind::Else) return open == LineKind::If || open == LineKind::For || open == LineKind::While;
  return false;
}

}  // namespace

const char* to_string(RuleTier tier) {
  switch (tier) {
    case RuleTier::Advanced: return "ADVANCED";
    case RuleTier::Prefix: return "PREFIX";
    case RuleTier::Basic: return "BASIC";
  }
  return "?";
}

RuleSet::RuleSet(std::vector<Rule> rules, std::string version)
    : rules_(std::move(rules)), version_(std::move(version)) {
  std::stable_sort(rules_.begin(), rules_.end(),
                   [](const Rule& a, const Rule& b) { return a.tier < b.tier; });
}

RuleSet parse_ruleset(std::string_view text, const std::string& origin) {
  std::vector<Rule> rules;
  std::string version = origin;
  std::map<std::pair<RuleTier, std::string>, int> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("@version", 0) == 0) {
      version = trim(line.substr(8));
      continue;
    }
    Rule rule = parse_rule_line(line, line_no, origin);
    const auto key = std::make_pair(rule.tier, pattern_key(rule));
    if (const auto it = seen.find(key); it != seen.end()) {
      throw RuleError(origin + ":" + std::to_string(line_no) + ": ambiguous rule, same pattern as line " +
                      std::to_string(it->second));
    }
    seen[key] = line_no;
    rules.push_back(std::move(rule));
  }
  if (rules.empty()) throw RuleError(origin + ": empty rule table");
  return RuleSet(std::move(rules), version);
}

RuleSet builtin_ruleset() {
  static const RuleSet table = parse_ruleset(builtin_rule_table(), "builtin");
  return table;
}

RuleSet load_ruleset(const std::optional<std::filesystem::path>& path) {
  if (!path) return builtin_ruleset();
  if (!std::filesystem::exists(*path)) throw RuleError("ruleset not found: " + path->string());
  return parse_ruleset(read_file(*path), path->string());
}

std::size_t PseudoDoc::fallback_count() const {
  return static_cast<std::size_t>(
      std::count_if(lines.begin(), lines.end(), [](const PseudoLine& l) { return l.fallback; }));
}

std::string PseudoDoc::to_text() const { return format_txt(*this); }

RenderedLine apply_rules(const LineNode& node, const RuleSet& rules) {
  const auto tokens = code_tokens(node.tokens);
  const std::string line = expand_leading_tabs(node.raw);
  Renderer renderer(rules, tokens, line);
  for (const Rule& rule : rules.rules()) {
    if (rule.expression) continue;
    if (rule.kind && *rule.kind != node.kind) continue;
    Captures caps;
    std::size_t end = 0;
    if (match_from(rule.pattern, 0, tokens, 0, tokens.size(), true, caps, end)) {
      return {renderer.instantiate(rule, caps), false};
    }
  }
  return {"EXECUTE: " + code_text(tokens, line), true};
}

PseudoDoc convert_program(std::string_view source, const RuleSet& rules) {
  return convert_program(source, [&rules](const LineNode& node) { return apply_rules(node, rules); });
}

PseudoDoc convert_program(std::string_view source, const LineRenderer& render) {
  const auto nodes = parse_program(source);
  PseudoDoc doc;
  doc.source_lines = nodes.size();
  struct Open {
    int depth;
    LineKind kind;
  };
  std::vector<Open> stack;
  auto close_top = [&] {
    doc.lines.push_back({stack.back().depth, end_keyword(stack.back().kind), LineRole::Close, false, 0});
    stack.pop_back();
  };

  for (const LineNode& node : nodes) {
    if (node.kind == LineKind::Blank || node.kind == LineKind::Comment) continue;
    const bool may_continue = node.kind == LineKind::Elif || node.kind == LineKind::Else;
    bool continued = false;
    while (!stack.empty() && stack.back().depth >= node.depth) {
      if (may_continue && stack.back().depth == node.depth && continues(stack.back().kind, node.kind)) {
        continued = true;
        break;
      }
      close_top();
    }
    const RenderedLine out = render(node);
    PseudoLine pl{node.depth, out.text, LineRole::Plain, out.fallback, node.line_no};
    if (continued) {
      pl.role = LineRole::Continue;
    } else if (opens_block(node)) {
      pl.role = LineRole::Open;
      stack.push_back({node.depth, node.kind});
    }
    doc.lines.push_back(std::move(pl));
  }
  while (!stack.empty()) close_top();
  return doc;
}

std::string format_txt(const PseudoDoc& doc) {
  std::string out;
  for (const auto& line : doc.lines) {
    out.append(static_cast<std::size_t>(line.depth) * kIndentUnit, ' ');
    out += line.text;
    out += '\n';
  }
  return out;
}

void emit_txt(const PseudoDoc& doc, const std::filesystem::path& path) { write_file(path, format_txt(doc)); }

bool blocks_balanced(const PseudoDoc& doc) {
  std::vector<int> open_depths;
  for (const auto& line : doc.lines) {
    if (line.role == LineRole::Open) {
      open_depths.push_back(line.depth);
    } else if (line.role == LineRole::Close) {
      if (open_depths.empty() || open_depths.back() != line.depth) return false;
      open_depths.pop_back();
    }
  }
  return open_depths.empty();
}

}  // namespace s2p
