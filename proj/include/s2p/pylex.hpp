#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "s2p/error.hpp"

namespace s2p {

enum class TokenKind { Keyword, Ident, Number, String, Operator, Delimiter, Comment };

struct Token {
  TokenKind kind;
  std::string text;
  int column = 0;  // 0-based start column in the physical line

  int end_column() const { return column + static_cast<int>(text.size()); }
  bool operator==(const Token&) const = default;
};

enum class LineKind {
  FuncDef,
  If,
  Elif,
  Else,
  For,
  While,
  Return,
  Assign,
  AugAssign,
  Call,
  Print,
  Import,
  Comment,
  Blank,
  Other,
};

struct LineNode {
  int line_no = 0;  // 1-based
  int depth = 0;
  LineKind kind = LineKind::Blank;
  std::vector<Token> tokens;
  std::string raw;
};

inline constexpr int kIndentUnit = 4;

const char* to_string(TokenKind kind);
const char* to_string(LineKind kind);
/// Parses the upper-case names produced by to_string(LineKind); false if unknown.
bool parse_line_kind(std::string_view name, LineKind& out);

bool is_keyword(std::string_view word);

/// Splits one physical line into tokens. String literals stay whole, a `#`
/// comment runs to the end of the line. Throws LexError on an unterminated
/// string, naming the column where the literal starts.
std::vector<Token> lex_line(std::string_view text);

/// Line classification: leading keyword, then a depth-0 assignment operator,
/// then a call, else Other. Comments are ignored; an empty sequence is Blank.
LineKind classify_line(const std::vector<Token>& tokens);

/// Expands tabs in the leading whitespace to the indent unit.
std::string expand_leading_tabs(std::string_view line);

/// One LineNode per physical line. Blank and comment lines inherit the depth
/// of the previous code line. Throws ParseError on indentation that is not a
/// multiple of the unit or that jumps more than one level, and LexError (with
/// line set) on lexical errors.
std::vector<LineNode> parse_program(std::string_view source);

/// Tokens without a trailing comment.
std::vector<Token> code_tokens(const std::vector<Token>& tokens);

}  // namespace s2p
