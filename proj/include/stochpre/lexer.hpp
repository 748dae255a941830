#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "rational.hpp"

namespace stochpre {

struct Token {
  enum Kind { Ident, Number, Sym, End } kind = End;
  std::string text;
  std::size_t pos = 0;
};

// Shared tokenizer for the formula and CDF grammars. Numbers may carry a sign,
// a fraction bar or a decimal point; identifiers are [A-Za-z_][A-Za-z0-9_'.]*.
inline std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto is_num_start = [&](std::size_t k) {
    if (k >= s.size()) return false;
    char c = s[k];
    if (std::isdigit(static_cast<unsigned char>(c))) return true;
    if ((c == '-' || c == '+' || c == '.') && k + 1 < s.size())
      return std::isdigit(static_cast<unsigned char>(s[k + 1])) ||
             (s[k + 1] == '.' && k + 2 < s.size() &&
              std::isdigit(static_cast<unsigned char>(s[k + 2])));
    return false;
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) ||
                              s[j] == '_' || s[j] == '\''))
        ++j;
      out.push_back({Token::Ident, std::string(s.substr(i, j - i)), i});
      i = j;
      continue;
    }
    if (is_num_start(i)) {
      std::size_t j = i + 1;
      while (j < s.size()) {
        char d = s[j];
        if (std::isdigit(static_cast<unsigned char>(d)) || d == '.' || d == '/') {
          ++j;
        } else if ((d == 'e' || d == 'E') && j + 1 < s.size() &&
                   (std::isdigit(static_cast<unsigned char>(s[j + 1])) ||
                    ((s[j + 1] == '-' || s[j + 1] == '+') && j + 2 < s.size() &&
                     std::isdigit(static_cast<unsigned char>(s[j + 2]))))) {
          j += 2;
        } else {
          break;
        }
      }
      out.push_back({Token::Number, std::string(s.substr(i, j - i)), i});
      i = j;
      continue;
    }
    out.push_back({Token::Sym, std::string(1, c), i});
    ++i;
  }
  out.push_back({Token::End, "", s.size()});
  return out;
}

class TokenCursor {
 public:
  explicit TokenCursor(std::string_view src) : toks_(tokenize(src)) {}

  const Token& peek(std::size_t k = 0) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }
  Token next() {
    Token t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == Token::End; }
  bool accept_sym(char c) {
    if (peek().kind == Token::Sym && peek().text[0] == c) {
      next();
      return true;
    }
    return false;
  }
  void expect_sym(char c) {
    if (!accept_sym(c))
      throw SyntaxError(std::string("expected '") + c + "' but found '" +
                            describe(peek()) + "'",
                        peek().pos);
  }
  std::string expect_ident() {
    if (peek().kind != Token::Ident)
      throw SyntaxError("expected identifier but found '" + describe(peek()) + "'",
                        peek().pos);
    return next().text;
  }
  Rational expect_rational(bool nonneg = true) {
    const Token& t = peek();
    if (t.kind != Token::Number)
      throw SyntaxError("expected number but found '" + describe(t) + "'", t.pos);
    Rational r;
    try {
      r = parse_rational(t.text);
    } catch (const SyntaxError& e) {
      throw SyntaxError(e.what(), t.pos);
    }
    if (nonneg && r < 0)
      throw SyntaxError("constant must be nonnegative", t.pos);
    next();
    return r;
  }
  void expect_end() {
    if (!at_end())
      throw SyntaxError("unexpected '" + describe(peek()) + "'", peek().pos);
  }

  static std::string describe(const Token& t) {
    return t.kind == Token::End ? std::string("end of input") : t.text;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace stochpre
