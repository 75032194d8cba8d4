#include "s2p/pylex.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace s2p {

namespace {

constexpr std::array<std::string_view, 35> kKeywords{
    "False", "None",   "True",    "and",      "as",       "assert", "async",
    "await", "break",  "class",   "continue", "def",      "del",    "elif",
    "else",  "except", "finally", "for",      "from",     "global", "if",
    "import", "in",    "is",      "lambda",   "nonlocal", "not",    "or",
    "pass",  "raise",  "return",  "try",      "while",    "with",   "yield"};

// Longest first so that the scan below is a longest-match scan.
constexpr std::array<std::string_view, 38> kOperators{
    "**=", "//=", ">>=", "<<=", "->", ":=", "==", "!=", "<=", ">=", "+=", "-=", "*=",
    "/=",  "%=",  "&=",  "|=",  "^=", "@=", "**", "//", "<<", ">>", "+",  "-",  "*",
    "/",   "%",   "@",   "&",   "|",  "^",  "~",  "<",  ">",  "=",  "!",  "?"};

constexpr std::string_view kDelimiters = "()[]{},:;.";

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

bool is_string_prefix(std::string_view word) {
  if (word.size() > 2) return false;
  std::string lower;
  for (char c : word) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower == "r" || lower == "u" || lower == "b" || lower == "f" || lower == "br" ||
         lower == "rb" || lower == "fr" || lower == "rf";
}

// Returns the index one past the closing quote, or npos when unterminated.
std::size_t scan_string(std::string_view text, std::size_t quote_pos) {
  const char q = text[quote_pos];
  const bool triple = quote_pos + 2 < text.size() && text[quote_pos + 1] == q && text[quote_pos + 2] == q;
  std::size_t i = quote_pos + (triple ? 3 : 1);
  while (i < text.size()) {
    if (text[i] == '\\') {
      i += 2;
      continue;
    }
    if (text[i] == q) {
      if (!triple) return i + 1;
      if (i + 2 < text.size() && text[i + 1] == q && text[i + 2] == q) return i + 3;
    }
    ++i;
  }
  return std::string_view::npos;
}

}  // namespace

const char* to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Keyword: return "KEYWORD";
    case TokenKind::Ident: return "IDENT";
    case TokenKind::Number: return "NUMBER";
    case TokenKind::String: return "STRING";
    case TokenKind::Operator: return "OPERATOR";
    case TokenKind::Delimiter: return "DELIMITER";
    case TokenKind::Comment: return "COMMENT";
  }
  return "?";
}

const char* to_string(LineKind kind) {
  switch (kind) {
    case LineKind::FuncDef: return "FUNC_DEF";
    case LineKind::If: return "IF";
    case LineKind::Elif: return "ELIF";
    case LineKind::Else: return "ELSE";
    case LineKind::For: return "FOR";
    case LineKind::While: return "WHILE";
    case LineKind::Return: return "RETURN";
    case LineKind::Assign: return "ASSIGN";
    case LineKind::AugAssign: return "AUG_ASSIGN";
    case LineKind::Call: return "CALL";
    case LineKind::Print: return "PRINT";
    case LineKind::Import: return "IMPORT";
    case LineKind::Comment: return "COMMENT";
    case LineKind::Blank: return "BLANK";
    case LineKind::Other: return "OTHER";
  }
  return "?";
}

bool parse_line_kind(std::string_view name, LineKind& out) {
  for (int k = 0; k <= static_cast<int>(LineKind::Other); ++k) {
    if (name == to_string(static_cast<LineKind>(k))) {
      out = static_cast<LineKind>(k);
      return true;
    }
  }
  return false;
}

bool is_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::vector<Token> lex_line(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto push = [&](TokenKind kind, std::size_t start, std::size_t end) {
    tokens.push_back({kind, std::string(text.substr(start, end - start)), static_cast<int>(start)});
  };

  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == ' ' || c == '\t' || c == '\f' || c == '\r' || c == '\v') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (c == '\n') throw LexError("newline inside a line", static_cast<int>(i));
    if (c == '#') {
      push(TokenKind::Comment, start, n);
      break;
    }
    if (c == '"' || c == '\'') {
      const std::size_t end = scan_string(text, i);
      if (end == std::string_view::npos) {
        throw LexError("unterminated string literal at column " + std::to_string(start),
                       static_cast<int>(start));
      }
      push(TokenKind::String, start, end);
      i = end;
      continue;
    }
    if (ident_start(c)) {
      while (i < n && ident_char(static_cast<unsigned char>(text[i]))) ++i;
      const std::string_view word = text.substr(start, i - start);
      if (i < n && (text[i] == '"' || text[i] == '\'') && is_string_prefix(word)) {
        const std::size_t end = scan_string(text, i);
        if (end == std::string_view::npos) {
          throw LexError("unterminated string literal at column " + std::to_string(start),
                         static_cast<int>(start));
        }
        push(TokenKind::String, start, end);
        i = end;
        continue;
      }
      push(is_keyword(word) ? TokenKind::Keyword : TokenKind::Ident, start, i);
      continue;
    }
    if (std::isdigit(c) || (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
      const bool hex = c == '0' && i + 1 < n && (text[i + 1] == 'x' || text[i + 1] == 'X');
      while (i < n) {
        const auto d = static_cast<unsigned char>(text[i]);
        if (std::isalnum(d) || d == '_' || d == '.') {
          ++i;
        } else if ((d == '+' || d == '-') && !hex && (text[i - 1] == 'e' || text[i - 1] == 'E')) {
          ++i;
        } else {
          break;
        }
      }
      push(TokenKind::Number, start, i);
      continue;
    }
    if (kDelimiters.find(static_cast<char>(c)) != std::string_view::npos) {
      push(TokenKind::Delimiter, start, i + 1);
      ++i;
      continue;
    }
    bool matched = false;
    for (std::string_view op : kOperators) {
      if (text.substr(i, op.size()) == op) {
        push(TokenKind::Operator, start, i + op.size());
        i += op.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      // Anything else ($, backtick, stray bytes) lexes as a one-byte operator.
      push(TokenKind::Operator, start, i + 1);
      ++i;
    }
  }
  return tokens;
}

std::vector<Token> code_tokens(const std::vector<Token>& tokens) {
  std::vector<Token> out = tokens;
  if (!out.empty() && out.back().kind == TokenKind::Comment) out.pop_back();
  return out;
}

LineKind classify_line(const std::vector<Token>& all) {
  if (all.empty()) return LineKind::Blank;
  const auto tokens = code_tokens(all);
  if (tokens.empty()) return LineKind::Comment;

  const Token& first = tokens.front();
  if (first.kind == TokenKind::Keyword) {
    const std::string& k = first.text;
    if (k == "def") return LineKind::FuncDef;
    if (k == "if") return LineKind::If;
    if (k == "elif") return LineKind::Elif;
    if (k == "else") return LineKind::Else;
    if (k == "for") return LineKind::For;
    if (k == "while") return LineKind::While;
    if (k == "return") return LineKind::Return;
    if (k == "import" || k == "from") return LineKind::Import;
    // `True = 1` is not a statement we can name, and neither are the others.
    return LineKind::Other;
  }

  int depth = 0;
  for (const Token& t : tokens) {
    if (t.kind == TokenKind::Delimiter) {
      if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
      if (t.text == ")" || t.text == "]" || t.text == "}") --depth;
      continue;
    }
    if (depth != 0 || t.kind != TokenKind::Operator) continue;
    if (t.text == "=") return LineKind::Assign;
    if (t.text.size() >= 2 && t.text.back() == '=' && t.text != "==" && t.text != "!=" &&
        t.text != "<=" && t.text != ">=") {
      return t.text == ":=" ? LineKind::Other : LineKind::AugAssign;
    }
  }

  if (first.kind == TokenKind::Ident) {
    std::size_t i = 1;
    while (i + 1 < tokens.size() && tokens[i].text == "." && tokens[i + 1].kind == TokenKind::Ident) {
      i += 2;
    }
    if (i < tokens.size() && tokens[i].text == "(") {
      return (i == 1 && first.text == "print") ? LineKind::Print : LineKind::Call;
    }
  }
  return LineKind::Other;
}

std::string expand_leading_tabs(std::string_view line) {
  std::string out;
  std::size_t i = 0;
  for (; i < line.size() && (line[i] == ' ' || line[i] == '\t'); ++i) {
    if (line[i] == '\t') {
      out.append(kIndentUnit, ' ');
    } else {
      out += ' ';
    }
  }
  out.append(line.substr(i));
  return out;
}

std::vector<LineNode> parse_program(std::string_view source) {
  std::vector<LineNode> nodes;
  int prev_depth = -1;  // the first code line must sit at depth 0
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < source.size()) {
    std::size_t end = source.find('\n', pos);
    if (end == std::string_view::npos) end = source.size();
    std::string raw(source.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();

    LineNode node;
    node.line_no = line_no;
    node.raw = raw;
    const std::string line = expand_leading_tabs(raw);
    try {
      node.tokens = lex_line(line);
    } catch (const LexError& e) {
      throw LexError("line " + std::to_string(line_no) + ": " + e.what(), e.column(), line_no);
    }
    node.kind = classify_line(node.tokens);
    if (node.kind == LineKind::Blank || node.kind == LineKind::Comment) {
      node.depth = std::max(prev_depth, 0);
    } else {
      const auto indent = static_cast<int>(line.find_first_not_of(' '));
      if (indent % kIndentUnit != 0) {
        throw ParseError("bad indent at line " + std::to_string(line_no), line_no);
      }
      node.depth = indent / kIndentUnit;
      if (node.depth > prev_depth + 1) {
        throw ParseError("indent jump at line " + std::to_string(line_no), line_no);
      }
      prev_depth = node.depth;
    }
    nodes.push_back(std::move(node));
  }
  return nodes;
}

}  // namespace s2p
