#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "theoryc/constraints.hpp"
#include "theoryc/error.hpp"
#include "theoryc/group.hpp"
#include "theoryc/theory.hpp"

namespace theoryc {

inline constexpr int kMaxDimension = 1024;

/// (Sym, Cons): Lambda_g with A P_g = Lambda_g A, one per group element in
/// group-table order. Identity matrices for an invariant output action.
struct SymConsEvidence {
  std::vector<RealMatrix> lambdas;
};

/// (Sym, Caus): every group element maps the ancestor relation onto itself.
struct SymCausEvidence {
  std::size_t elements_checked = 0;
};

/// (Cons, Caus): absorbing nodes and the oblique correction they induce.
struct ConsCausEvidence {
  std::vector<int> absorbing;
  RealMatrix correction;
};

/// (Sym, Sym): order of the jointly generated group.
struct SymSymEvidence {
  std::size_t joint_order = 0;
};

/// (Cons, Cons): rank of the stacked rows.
struct ConsConsEvidence {
  int stacked_rank = 0;
};

/// (Caus, Caus) and (Diff, Diff): nothing beyond the individual checks.
struct TrivialEvidence {};

using WitnessEvidence =
    std::variant<SymConsEvidence, SymCausEvidence, ConsCausEvidence, SymSymEvidence, ConsConsEvidence, TrivialEvidence>;

struct CompatibilityWitness {
  std::pair<std::string, std::string> pair;
  WitnessEvidence evidence;
  double max_residual = 0;
};

struct CheckOptions {
  std::size_t group_cap = kDefaultGroupCap;
};

struct TypedTheory {
  TheorySpec spec;
  std::map<std::string, std::vector<Permutation>> group_tables;
  std::map<std::string, std::vector<int>> topo_orders;
  std::map<std::string, Mask> closures;
  std::vector<CompatibilityWitness> compat_witnesses;
  std::size_t group_cap = kDefaultGroupCap;

  const CompatibilityWitness* witness_for(const std::string& a, const std::string& b) const;
};

struct CheckResult {
  std::optional<TypedTheory> typed;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return typed.has_value(); }
};

/// Runs every per-primitive and relation check, collecting all diagnostics.
CheckResult check_wellformed(const TheorySpec& spec, const CheckOptions& options = {});

/// Throws Error(IncompatiblePrimitives | UnsupportedPair) when no witness exists.
CompatibilityWitness check_compatibility(const Primitive& a, const Primitive& b, const TypedTheory& typed);

/// Recomputes the defining identity of a witness; returns the max residual.
double replay_witness(const CompatibilityWitness& witness, const TypedTheory& typed);

/// Serializes diagnostics as {"errors": [...]}.
std::string diagnostics_json(const std::vector<Diagnostic>& diagnostics);

}  // namespace theoryc
