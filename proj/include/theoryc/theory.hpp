#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace theoryc {

/// Image notation: coordinate j is sent to perm[j].
using Permutation = std::vector<int>;
using RealMatrix = std::vector<std::vector<double>>;
using RealVector = std::vector<double>;

enum class PrimitiveKind { Sym, Cons, Caus, Diff };
enum class OutputAction { Same, Invariant };
enum class ConservationMode { Preserve, Fix };
enum class RelationKind { Compatible };

std::string_view to_string(PrimitiveKind kind);
std::string_view to_string(OutputAction action);

struct Signature {
  int input_dim = 1;
  int output_dim = 1;
  std::optional<std::vector<std::string>> variable_names;

  bool operator==(const Signature&) const = default;
};

struct SymmetryGroup {
  int degree = 0;
  std::vector<Permutation> generators;
  OutputAction output_action = OutputAction::Same;

  bool operator==(const SymmetryGroup&) const = default;
};

/// A linear conservation law A f(x) = t(x).
/// Preserve: t = A_in x, with A_in defaulting to A when input_dim == output_dim.
/// Fix: t = target.
struct ConservationLaw {
  RealMatrix matrix;
  ConservationMode mode = ConservationMode::Preserve;
  std::optional<RealMatrix> input_matrix;
  RealVector target;

  bool operator==(const ConservationLaw&) const = default;
};

struct CausalGraph {
  int num_vars = 0;
  std::vector<std::pair<int, int>> edges;  // (parent, child)

  bool operator==(const CausalGraph&) const = default;
};

enum class DiffVariant { DivergenceFree2D };

struct DiffConstraint {
  DiffVariant variant = DiffVariant::DivergenceFree2D;

  bool operator==(const DiffConstraint&) const = default;
};

using PrimitivePayload = std::variant<SymmetryGroup, ConservationLaw, CausalGraph, DiffConstraint>;

struct Primitive {
  std::string name;
  PrimitiveKind kind = PrimitiveKind::Sym;
  PrimitivePayload payload;

  bool operator==(const Primitive&) const = default;
};

struct Relation {
  RelationKind kind = RelationKind::Compatible;
  std::vector<std::string> args;

  bool operator==(const Relation&) const = default;
};

struct TheorySpec {
  std::string name;
  Signature signature;
  std::vector<Primitive> primitives;
  std::vector<Relation> relations;

  bool operator==(const TheorySpec&) const = default;

  const Primitive* find(std::string_view primitive_name) const;
};

/// The kind implied by the payload alternative.
PrimitiveKind payload_kind(const PrimitivePayload& payload);

/// Parses `.thy` source. Throws ParseError (SyntaxError, DuplicateName, UnknownKind).
TheorySpec parse_theory(std::string_view text);

/// Canonical `.thy` text; parse_theory(serialize_theory(s)) == s.
std::string serialize_theory(const TheorySpec& spec);

}  // namespace theoryc
