#include <algorithm>
#include <array>
#include <cctype>

#include "s2p/pylex.hpp"
#include "s2p/retrieval.hpp"

namespace s2p {

namespace {

constexpr std::array<std::string_view, 11> kBlockKeywords{
    "def", "if", "elif", "else", "for", "while", "class", "try", "except", "finally", "with"};

struct LineScan {
  bool starts_inside = false;   // continuation of brackets or of a triple-quoted string
  bool ends_in_string = false;  // a triple-quoted string is still open at the end
  bool top_level_colon = false;
  std::size_t depth_at_end = 0;
  std::size_t code_end = 0;     // start of the comment, or the line length
};

struct Unmatched {
  char bracket;
  int line;
};

// Lexical pass over the whole snippet: strings, comments and brackets.
std::vector<LineScan> scan(const std::vector<std::string>& lines, std::vector<Unmatched>& unmatched) {
  std::vector<LineScan> out(lines.size());
  std::vector<Unmatched> stack;
  char triple = 0;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::string& s = lines[li];
    LineScan& ls = out[li];
    ls.starts_inside = triple != 0 || !stack.empty();
    ls.code_end = s.size();
    std::size_t i = 0;
    while (i < s.size()) {
      const char c = s[i];
      if (triple) {
        if (c == '\\') {
          i += 2;
          continue;
        }
        if (c == triple && s.compare(i, 3, std::string(3, triple)) == 0) {
          triple = 0;
          i += 3;
          continue;
        }
        ++i;
        continue;
      }
      if (c == '#') {
        ls.code_end = i;
        break;
      }
      if (c == '"' || c == '\'') {
        if (s.compare(i, 3, std::string(3, c)) == 0) {
          triple = c;
          i += 3;
          continue;
        }
        ++i;
        while (i < s.size() && s[i] != c) i += s[i] == '\\' ? 2 : 1;
        ++i;
        continue;
      }
      const int line_no = static_cast<int>(li) + 1;
      if (c == '(' || c == '[' || c == '{') {
        stack.push_back({c, line_no});
      } else if (c == ')' || c == ']' || c == '}') {
        const char want = c == ')' ? '(' : c == ']' ? '[' : '{';
        if (!stack.empty() && stack.back().bracket == want) {
          stack.pop_back();
        } else {
          unmatched.push_back({c, line_no});
        }
      } else if (c == ':' && stack.empty()) {
        ls.top_level_colon = true;
      }
      ++i;
    }
    ls.ends_in_string = triple != 0;
    ls.depth_at_end = stack.size();
  }
  unmatched.insert(unmatched.end(), stack.begin(), stack.end());
  std::stable_sort(unmatched.begin(), unmatched.end(),
                   [](const Unmatched& a, const Unmatched& b) { return a.line < b.line; });
  return out;
}

std::string first_word(const std::string& line) {
  std::size_t i = line.find_first_not_of(" \t");
  if (i == std::string::npos) return {};
  const std::size_t start = i;
  while (i < line.size() && (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '_')) ++i;
  return line.substr(start, i - start);
}

bool is_blank_or_comment(const std::string& line) {
  const auto i = line.find_first_not_of(" \t\r\f\v");
  return i == std::string::npos || line[i] == '#';
}

}  // namespace

std::string describe(const SyntaxFix& fix) {
  std::string kind;
  switch (fix.kind) {
    case SyntaxFix::Kind::Colon: kind = "colon"; break;
    case SyntaxFix::Kind::Indent: kind = "indent"; break;
    case SyntaxFix::Kind::TrailingSpace: kind = "trailing-space"; break;
    case SyntaxFix::Kind::Unbalanced: kind = "unbalanced"; break;
  }
  std::string out = kind + "@" + std::to_string(fix.line);
  if (!fix.detail.empty()) out += " " + fix.detail;
  return out;
}

CorrectedCode correct_syntax(std::string_view code) {
  std::vector<std::string> lines;
  {
    std::size_t pos = 0;
    while (pos < code.size()) {
      std::size_t end = code.find('\n', pos);
      if (end == std::string_view::npos) end = code.size();
      lines.emplace_back(code.substr(pos, end - pos));
      pos = end + 1;
    }
  }
  const bool trailing_newline = !code.empty() && code.back() == '\n';

  CorrectedCode out;
  std::vector<Unmatched> unmatched;
  const auto scans = scan(lines, unmatched);

  // 1. Balance report; the code is left alone.
  for (const auto& u : unmatched) {
    out.fixes.push_back({SyntaxFix::Kind::Unbalanced, u.line, std::string("\"") + u.bracket + "\"", false});
  }

  // 2. Missing colon after a block keyword.
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const LineScan& ls = scans[li];
    if (ls.starts_inside || ls.ends_in_string || ls.depth_at_end != 0 || ls.top_level_colon) continue;
    const std::string word = first_word(lines[li]);
    if (std::find(kBlockKeywords.begin(), kBlockKeywords.end(), word) == kBlockKeywords.end()) continue;
    std::string& line = lines[li];
    const auto last = line.find_last_not_of(" \t", ls.code_end == 0 ? 0 : ls.code_end - 1);
    if (last == std::string::npos || last >= ls.code_end) continue;
    line.insert(last + 1, ":");
    out.fixes.push_back({SyntaxFix::Kind::Colon, static_cast<int>(li) + 1, "", true});
  }

  // 3. Indentation re-normalized to one unit per nesting level.
  std::vector<std::size_t> widths{0};
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (scans[li].starts_inside || is_blank_or_comment(lines[li])) continue;
    std::string& line = lines[li];
    const std::string expanded = expand_leading_tabs(line);
    const std::size_t width = expanded.find_first_not_of(' ');
    while (widths.size() > 1 && widths.back() > width) widths.pop_back();
    if (width > widths.back()) widths.push_back(width);
    const std::size_t level = widths.size() - 1;
    const std::string fixed = std::string(level * kIndentUnit, ' ') + expanded.substr(width);
    if (fixed != line) {
      out.fixes.push_back({SyntaxFix::Kind::Indent, static_cast<int>(li) + 1,
                           std::to_string(width) + "->" + std::to_string(level * kIndentUnit), true});
      line = fixed;
    }
  }

  // 4. Trailing whitespace, except where it belongs to an open string.
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (scans[li].ends_in_string) continue;
    std::string& line = lines[li];
    const auto last = line.find_last_not_of(" \t\r\f\v");
    const std::size_t keep = last == std::string::npos ? 0 : last + 1;
    if (keep != line.size()) {
      line.resize(keep);
      out.fixes.push_back({SyntaxFix::Kind::TrailingSpace, static_cast<int>(li) + 1, "", true});
    }
  }

  for (std::size_t li = 0; li < lines.size(); ++li) {
    out.code += lines[li];
    if (li + 1 < lines.size() || trailing_newline) out.code += '\n';
  }
  return out;
}

}  // namespace s2p
