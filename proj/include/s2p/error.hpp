#pragma once

#include <stdexcept>
#include <string>

namespace s2p {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorpusError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RuleError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

/// Raised by the lexer; `column` is 0-based within the offending line.
class LexError : public Error {
 public:
  LexError(const std::string& what, int column, int line = 0)
      : Error(what), column_(column), line_(line) {}
  int column() const { return column_; }
  int line() const { return line_; }

 private:
  int column_;
  int line_;
};

/// Raised by parse_program; `line` is 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line) : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace s2p
