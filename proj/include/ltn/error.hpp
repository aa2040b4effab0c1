#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ltn {

// Base of every error raised by the library. `kind()` is a stable tag used by
// diagnostics and the CLI exit-code mapping.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t pos, const std::string& expected, const std::string& found)
      : Error("SyntaxError", "at position " + std::to_string(pos) + ": expected " + expected +
                                 ", found " + found),
        pos_(pos),
        expected_(expected) {}
  std::size_t position() const noexcept { return pos_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t pos_;
  std::string expected_;
};

#define LTN_DEFINE_ERROR(Name)                                           \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& msg) : Error(#Name, msg) {}         \
  };

// ast
LTN_DEFINE_ERROR(UnknownSymbol)
LTN_DEFINE_ERROR(ArityMismatch)
LTN_DEFINE_ERROR(NotClosed)
LTN_DEFINE_ERROR(SymbolCollision)
// autodiff
LTN_DEFINE_ERROR(ShapeMismatch)
LTN_DEFINE_ERROR(MissingInput)
LTN_DEFINE_ERROR(NonScalarOutput)
// semantics
LTN_DEFINE_ERROR(OutOfRange)
LTN_DEFINE_ERROR(EmptyDomain)
LTN_DEFINE_ERROR(UngroundedSymbol)
LTN_DEFINE_ERROR(ExistsNotEliminated)
// sii
LTN_DEFINE_ERROR(EmptyOntology)
LTN_DEFINE_ERROR(MissingLabels)
LTN_DEFINE_ERROR(InvalidSpec)
LTN_DEFINE_ERROR(NoPositives)
// io / cli
LTN_DEFINE_ERROR(FormatError)
LTN_DEFINE_ERROR(SignatureMismatch)

#undef LTN_DEFINE_ERROR

class NonFiniteValue : public Error {
 public:
  NonFiniteValue(std::size_t node, const std::string& msg)
      : Error("NonFiniteValue", "node " + std::to_string(node) + ": " + msg), node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

}  // namespace ltn
