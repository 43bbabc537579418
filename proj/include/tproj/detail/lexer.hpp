#pragma once

// Line-oriented tokenizer shared by the text formats (theory, basic facts,
// acquisition state, observations, scenarios). Columns are 1-based.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tproj/error.hpp"

namespace tproj::detail {

inline bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }

inline bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

/// Source split into (line number, text) pairs with `#` comments and blank lines removed.
struct SourceLine {
  std::size_t number;
  std::string_view text;
};

inline std::vector<SourceLine> significant_lines(std::string_view source) {
  std::vector<SourceLine> out;
  std::size_t number = 0;
  while (!source.empty()) {
    ++number;
    const auto nl = source.find('\n');
    std::string_view line = source.substr(0, nl);
    source = nl == std::string_view::npos ? std::string_view{} : source.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    out.push_back({number, line});
  }
  return out;
}

class Cursor {
 public:
  Cursor(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return pos_ + 1; }

  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool starts_with(std::string_view s) {
    skip_space();
    return text_.substr(pos_).starts_with(s);
  }

  bool accept(std::string_view s) {
    if (!starts_with(s)) return false;
    pos_ += s.size();
    return true;
  }

  void expect(std::string_view s) {
    if (!accept(s)) fail("expected '" + std::string(s) + "'");
  }

  /// Next whitespace-delimited word without consuming it.
  std::string_view peek_word() {
    skip_space();
    std::size_t end = pos_;
    while (end < text_.size() && text_[end] != ' ' && text_[end] != '\t') ++end;
    return text_.substr(pos_, end - pos_);
  }

  std::string_view word() {
    const auto w = peek_word();
    if (w.empty()) fail("unexpected end of line");
    pos_ += w.size();
    return w;
  }

  void keyword(std::string_view kw) {
    const std::size_t col = (skip_space(), column());
    if (peek_word() != kw) fail_at(col, "expected keyword '" + std::string(kw) + "'");
    pos_ += kw.size();
  }

  std::string identifier() {
    skip_space();
    if (pos_ >= text_.size() || !is_ident_char(text_[pos_])) fail("expected identifier");
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  /// Decimal number; `inf` is accepted only when allow_infinity is set.
  double number(bool allow_infinity = false) {
    skip_space();
    const std::size_t col = column();
    std::size_t end = pos_;
    while (end < text_.size() && text_[end] != ' ' && text_[end] != '\t' && text_[end] != ',') ++end;
    const std::string_view tok = text_.substr(pos_, end - pos_);
    if (tok.empty()) fail("expected number");
    if (tok == "inf" || tok == "+inf") {
      if (!allow_infinity) fail_at(col, "infinite value not allowed here");
      pos_ = end;
      return std::numeric_limits<double>::infinity();
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(value)) {
      fail_at(col, "malformed number '" + std::string(tok) + "'");
    }
    pos_ = end;
    return value;
  }

  std::size_t count() {
    skip_space();
    const std::size_t col = column();
    const auto tok = peek_word();
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size()) {
      fail_at(col, "expected non-negative integer");
    }
    pos_ += tok.size();
    return value;
  }

  void expect_end() {
    if (!at_end()) fail("unexpected trailing input");
  }

  [[noreturn]] void fail(const std::string& what) {
    skip_space();
    fail_at(column(), what);
  }

  [[noreturn]] void fail_at(std::size_t col, const std::string& what) const { throw ParseError(line_, col, what); }

 private:
  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace tproj::detail
