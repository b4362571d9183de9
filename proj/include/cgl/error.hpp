// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cgl {

/// Base of every error raised by the library. `kind()` is a stable short tag
/// used in diagnostics and by the CLI when mapping errors to exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define CGL_DEFINE_ERROR(Name, tag)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(tag, what) {}     \
  };

CGL_DEFINE_ERROR(DimensionError, "dimension error")
CGL_DEFINE_ERROR(IndexError, "index error")
CGL_DEFINE_ERROR(NumericDomainError, "numeric-domain error")
CGL_DEFINE_ERROR(DegenerateInputError, "degenerate-input error")
CGL_DEFINE_ERROR(ContractError, "contract error")
CGL_DEFINE_ERROR(StructuralError, "structural error")
CGL_DEFINE_ERROR(DataError, "data error")
CGL_DEFINE_ERROR(ParseError, "parse error")
CGL_DEFINE_ERROR(StateError, "state error")
CGL_DEFINE_ERROR(IoError, "I/O error")
// Non-finite loss during training.
CGL_DEFINE_ERROR(DivergenceError, "divergence")

#undef CGL_DEFINE_ERROR

}  // namespace cgl
