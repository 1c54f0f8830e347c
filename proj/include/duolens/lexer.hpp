#pragma once

// A small lexer shared by the code perturbations. It separates identifiers
// from keywords, literals, comments and operators for seven languages; it does
// not parse. Preprocessor lines (C, C++, C#) are kept whole, like comments.

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "duolens/errors.hpp"

namespace duolens::lex {

enum class Language { Python, Java, JavaScript, C, Cpp, CSharp, Go };

inline Language parse_language(std::string_view raw) {
  std::string s(raw);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "python" || s == "py") return Language::Python;
  if (s == "java") return Language::Java;
  if (s == "javascript" || s == "js") return Language::JavaScript;
  if (s == "c") return Language::C;
  if (s == "cpp" || s == "c++") return Language::Cpp;
  if (s == "csharp" || s == "c#" || s == "cs") return Language::CSharp;
  if (s == "go" || s == "golang") return Language::Go;
  throw DataError("unsupported language for code perturbation: '" + std::string(raw) + "'");
}

inline const std::unordered_set<std::string_view>& keywords(Language lang) {
  static const std::unordered_set<std::string_view> python{
      "False", "None",   "True",    "and",      "as",     "assert", "async", "await",  "break",
      "class", "continue", "def",   "del",      "elif",   "else",   "except", "finally", "for",
      "from",  "global", "if",      "import",   "in",     "is",     "lambda", "nonlocal", "not",
      "or",    "pass",   "raise",   "return",   "try",    "while",  "with",  "yield",  "match", "case"};
  static const std::unordered_set<std::string_view> java{
      "abstract", "assert",     "boolean",  "break",     "byte",      "case",    "catch",   "char",
      "class",    "const",      "continue", "default",   "do",        "double",  "else",    "enum",
      "extends",  "final",      "finally",  "float",     "for",       "goto",    "if",      "implements",
      "import",   "instanceof", "int",      "interface", "long",      "native",  "new",     "package",
      "private",  "protected",  "public",   "return",    "short",     "static",  "strictfp", "super",
      "switch",   "synchronized", "this",   "throw",     "throws",    "transient", "try",   "void",
      "volatile", "while",      "true",     "false",     "null",      "var",     "record",  "yield"};
  static const std::unordered_set<std::string_view> javascript{
      "break",  "case",   "catch",  "class",     "const",  "continue", "debugger", "default", "delete",
      "do",     "else",   "export", "extends",   "finally", "for",     "function", "if",      "import",
      "in",     "instanceof", "new", "return",   "super",  "switch",   "this",     "throw",   "try",
      "typeof", "var",    "void",   "while",     "with",   "yield",    "let",      "static",  "async",
      "await",  "of",     "true",   "false",     "null",   "undefined"};
  static const std::unordered_set<std::string_view> c{
      "auto",     "break",    "case",    "char",   "const",    "continue", "default",  "do",
      "double",   "else",     "enum",    "extern", "float",    "for",      "goto",     "if",
      "inline",   "int",      "long",    "register", "restrict", "return", "short",    "signed",
      "sizeof",   "static",   "struct",  "switch", "typedef",  "union",    "unsigned", "void",
      "volatile", "while",    "_Bool",   "_Complex", "_Imaginary", "_Alignas", "_Alignof", "_Atomic",
      "_Generic", "_Noreturn", "_Static_assert", "_Thread_local", "NULL"};
  static const std::unordered_set<std::string_view> cpp = [] {
    std::unordered_set<std::string_view> k(c.begin(), c.end());
    for (std::string_view w : {"alignas", "alignof", "and", "and_eq", "asm", "bitand", "bitor", "bool", "catch",
                               "char8_t", "char16_t", "char32_t", "class", "compl", "concept", "consteval",
                               "constexpr", "constinit", "const_cast", "co_await", "co_return", "co_yield",
                               "decltype", "delete", "dynamic_cast", "explicit", "export", "false", "friend",
                               "mutable", "namespace", "new", "noexcept", "not", "not_eq", "nullptr", "operator",
                               "or", "or_eq", "private", "protected", "public", "reinterpret_cast", "requires",
                               "static_assert", "static_cast", "template", "this", "thread_local", "throw", "true",
                               "try", "typeid", "typename", "using", "virtual", "wchar_t", "xor", "xor_eq",
                               "override", "final"}) {
      k.insert(w);
    }
    return k;
  }();
  static const std::unordered_set<std::string_view> csharp{
      "abstract", "as",       "base",     "bool",     "break",    "byte",      "case",     "catch",
      "char",     "checked",  "class",    "const",    "continue", "decimal",   "default",  "delegate",
      "do",       "double",   "else",     "enum",     "event",    "explicit",  "extern",   "false",
      "finally",  "fixed",    "float",    "for",      "foreach",  "goto",      "if",       "implicit",
      "in",       "int",      "interface", "internal", "is",      "lock",      "long",     "namespace",
      "new",      "null",     "object",   "operator", "out",      "override",  "params",   "private",
      "protected", "public",  "readonly", "ref",      "return",   "sbyte",     "sealed",   "short",
      "sizeof",   "stackalloc", "static", "string",   "struct",   "switch",    "this",     "throw",
      "true",     "try",      "typeof",   "uint",     "ulong",    "unchecked", "unsafe",   "ushort",
      "using",    "virtual",  "void",     "volatile", "while",    "var",       "async",    "await",
      "get",      "set",      "yield",    "dynamic",  "record",   "init",      "nameof"};
  static const std::unordered_set<std::string_view> go{
      "break",  "case",    "chan",     "const",  "continue", "default", "defer",  "else",   "fallthrough",
      "for",    "func",    "go",       "goto",   "if",       "import",  "interface", "map", "package",
      "range",  "return",  "select",   "struct", "switch",   "type",    "var",    "true",   "false",
      "nil",    "iota"};
  switch (lang) {
    case Language::Python: return python;
    case Language::Java: return java;
    case Language::JavaScript: return javascript;
    case Language::C: return c;
    case Language::Cpp: return cpp;
    case Language::CSharp: return csharp;
    case Language::Go: return go;
  }
  return c;
}

enum class TokenKind { Whitespace, Comment, Preprocessor, String, Number, Identifier, Keyword, Punct };

struct Token {
  TokenKind kind;
  std::string text;
};

namespace detail {

inline bool ident_start(unsigned char c, bool dollar) noexcept {
  return std::isalpha(c) || c == '_' || c >= 0x80 || (dollar && c == '$');
}
inline bool ident_char(unsigned char c, bool dollar) noexcept { return ident_start(c, dollar) || std::isdigit(c); }

// Length of a quoted literal starting at `i` (the opening quote), honoring
// backslash escapes unless `raw`. Unterminated literals run to the end.
inline std::size_t quoted(std::string_view s, std::size_t i, std::string_view quote, bool raw, bool stop_at_newline) {
  std::size_t j = i + quote.size();
  while (j < s.size()) {
    if (!raw && s[j] == '\\') {
      j += 2;
      continue;
    }
    if (s.compare(j, quote.size(), quote) == 0) return j + quote.size() - i;
    if (stop_at_newline && s[j] == '\n') return j - i;
    ++j;
  }
  return s.size() - i;
}

}  // namespace detail

inline std::vector<Token> tokenize(std::string_view s, Language lang) {
  using detail::quoted;
  const bool dollar = lang == Language::Java || lang == Language::JavaScript;
  const bool hash_comment = lang == Language::Python;
  const bool preproc = lang == Language::C || lang == Language::Cpp || lang == Language::CSharp;
  const auto& kw = keywords(lang);
  std::vector<Token> out;
  std::size_t i = 0;
  bool line_start = true;  // only whitespace seen since the last newline
  auto push = [&](TokenKind k, std::size_t len) {
    out.push_back({k, std::string(s.substr(i, len))});
    i += len;
  };
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    const char next = i + 1 < s.size() ? s[i + 1] : '\0';
    if (std::isspace(c)) {
      std::size_t j = i;
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) {
        if (s[j] == '\n') line_start = true;
        ++j;
      }
      push(TokenKind::Whitespace, j - i);
      continue;
    }
    const bool at_line_start = line_start;
    line_start = false;
    if (preproc && c == '#' && at_line_start) {
      std::size_t j = i;
      while (j < s.size() && s[j] != '\n') j += (s[j] == '\\' && j + 1 < s.size()) ? 2 : 1;
      push(TokenKind::Preprocessor, j - i);
      continue;
    }
    if (hash_comment && c == '#') {
      std::size_t j = s.find('\n', i);
      push(TokenKind::Comment, (j == std::string_view::npos ? s.size() : j) - i);
      continue;
    }
    if (!hash_comment && c == '/' && next == '/') {
      std::size_t j = s.find('\n', i);
      push(TokenKind::Comment, (j == std::string_view::npos ? s.size() : j) - i);
      continue;
    }
    if (!hash_comment && c == '/' && next == '*') {
      std::size_t j = s.find("*/", i + 2);
      push(TokenKind::Comment, (j == std::string_view::npos ? s.size() : j + 2) - i);
      continue;
    }
    // String literals, including prefixed forms.
    {
      std::size_t p = 0;  // prefix length
      bool raw = false;
      if (lang == Language::Python) {
        while (p < 2 && i + p < s.size() && std::string_view("rRbBuUfF").find(s[i + p]) != std::string_view::npos) ++p;
        if (i + p < s.size() && (s[i + p] == '"' || s[i + p] == '\'')) {
          raw = s.substr(i, p).find_first_of("rR") != std::string_view::npos;
        } else {
          p = 0;
        }
      } else if (lang == Language::CSharp && (c == '@' || c == '$')) {
        std::size_t q = 1;
        if (i + 1 < s.size() && (s[i + 1] == '@' || s[i + 1] == '$') && s[i + 1] != s[i]) q = 2;
        if (i + q < s.size() && s[i + q] == '"') {
          p = q;
          raw = s.substr(i, q).find('@') != std::string_view::npos;
        }
      } else if (lang == Language::C || lang == Language::Cpp) {
        for (std::string_view pre : {"u8R", "uR", "UR", "LR", "R", "u8", "u", "U", "L"}) {
          if (s.compare(i, pre.size(), pre) == 0 && i + pre.size() < s.size() &&
              (s[i + pre.size()] == '"' || (s[i + pre.size()] == '\'' && pre.back() != 'R'))) {
            p = pre.size();
            raw = pre.back() == 'R' && lang == Language::Cpp;
            break;
          }
        }
      }
      const std::size_t q = i + p;
      if (q < s.size() && (s[q] == '"' || s[q] == '\'' || (s[q] == '`' && (lang == Language::JavaScript ||
                                                                             lang == Language::Go)))) {
        const char qc = s[q];
        std::size_t len;
        if (raw && qc == '"' && (lang == Language::Cpp)) {
          // R"delim( ... )delim"
          const std::size_t open = s.find('(', q);
          const std::string delim = open == std::string_view::npos ? "" : std::string(s.substr(q + 1, open - q - 1));
          const std::size_t close = open == std::string_view::npos ? std::string_view::npos
                                                                   : s.find(")" + delim + "\"", open);
          len = (close == std::string_view::npos ? s.size() : close + delim.size() + 2) - i;
        } else if ((lang == Language::Python || lang == Language::Java) && s.compare(q, 3, std::string(3, qc)) == 0) {
          len = p + quoted(s, q, std::string(3, qc), raw, false);
        } else if (qc == '`') {
          len = p + quoted(s, q, "`", lang == Language::Go, false);
        } else if (lang == Language::CSharp && raw) {
          // Verbatim: "" is an escaped quote.
          std::size_t j = q + 1;
          while (j < s.size()) {
            if (s[j] == '"') {
              if (j + 1 < s.size() && s[j + 1] == '"') {
                j += 2;
                continue;
              }
              ++j;
              break;
            }
            ++j;
          }
          len = j - i;
        } else {
          len = p + quoted(s, q, std::string(1, qc), raw && lang == Language::Python, true);
        }
        push(TokenKind::String, len);
        continue;
      }
    }
    if (std::isdigit(c) || (c == '.' && std::isdigit(static_cast<unsigned char>(next)))) {
      std::size_t j = i + 1;
      while (j < s.size()) {
        const auto d = static_cast<unsigned char>(s[j]);
        if (std::isalnum(d) || d == '_' || d == '.') {
          ++j;
        } else if ((d == '+' || d == '-') && std::string_view("eEpP").find(s[j - 1]) != std::string_view::npos &&
                   !(s[i] == '0' && j > i + 1 && (s[i + 1] == 'x' || s[i + 1] == 'X') && (s[j - 1] == 'e' || s[j - 1] == 'E'))) {
          ++j;
        } else {
          break;
        }
      }
      push(TokenKind::Number, j - i);
      continue;
    }
    if (detail::ident_start(c, dollar)) {
      std::size_t j = i + 1;
      while (j < s.size() && detail::ident_char(static_cast<unsigned char>(s[j]), dollar)) ++j;
      const bool is_kw = kw.count(s.substr(i, j - i)) != 0;
      push(is_kw ? TokenKind::Keyword : TokenKind::Identifier, j - i);
      continue;
    }
    push(TokenKind::Punct, 1);
  }
  return out;
}

// Tokens that carry content (everything except whitespace).
inline std::size_t count_significant(const std::vector<Token>& toks) {
  return static_cast<std::size_t>(
      std::count_if(toks.begin(), toks.end(), [](const Token& t) { return t.kind != TokenKind::Whitespace; }));
}

}  // namespace duolens::lex
