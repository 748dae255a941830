#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stochpre {

// Base of every error raised by the library. `kind()` is a stable tag used in
// CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t offset, std::size_t line = 0)
      : Error("SyntaxError", what + " at offset " + std::to_string(offset)),
        offset_(offset),
        line_(line) {}
  std::size_t offset() const { return offset_; }
  std::size_t line() const { return line_; }

 private:
  std::size_t offset_;
  std::size_t line_;
};

#define STOCHPRE_SIMPLE_ERROR(Name)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name, what) {}   \
  };

STOCHPRE_SIMPLE_ERROR(InvalidCdf)
STOCHPRE_SIMPLE_ERROR(UnsupportedShape)
STOCHPRE_SIMPLE_ERROR(RateCompositionOnNonExponential)
STOCHPRE_SIMPLE_ERROR(UnknownState)
STOCHPRE_SIMPLE_ERROR(UnknownInput)
STOCHPRE_SIMPLE_ERROR(MassMismatch)
STOCHPRE_SIMPLE_ERROR(KindMismatch)
STOCHPRE_SIMPLE_ERROR(HorizonTooShort)
STOCHPRE_SIMPLE_ERROR(ExplosionGuard)
STOCHPRE_SIMPLE_ERROR(NotUnambiguous)
STOCHPRE_SIMPLE_ERROR(UnsupportedClass)
STOCHPRE_SIMPLE_ERROR(ModelError)

#undef STOCHPRE_SIMPLE_ERROR

}  // namespace stochpre
