#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace theoryc {

enum class ErrorCode {
  SyntaxError,
  DuplicateName,
  UnknownKind,
  UnknownPrimitive,
  ArityMismatch,
  InvalidSignature,
  InvalidEdge,
  GroupAxiomViolation,
  GroupOrderCapExceeded,
  NonBijectiveGenerator,
  CycleInCausalGraph,
  RankDeficientConservation,
  DimensionMismatch,
  IncompatiblePrimitives,
  UnsupportedPair,
  UnsupportedPrimitive,
  MissingWitness,
  ProvenanceMismatch,
  ShapeMismatch,
  NonFiniteValue,
  InvalidGraph,
  UnsupportedTarget,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

/// A parse failure with its 1-based source location.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, const std::string& detail, int line, int column)
      : Error(code, detail + " at " + std::to_string(line) + ":" + std::to_string(column)),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

/// One well-formedness finding. `residual` is set when the check is numeric.
struct Diagnostic {
  ErrorCode code;
  std::string primitive;
  std::string detail;
  std::optional<double> residual;

  bool operator==(const Diagnostic&) const = default;
};

}  // namespace theoryc
