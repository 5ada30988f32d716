#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "theoryc/archir.hpp"
#include "theoryc/typecheck.hpp"

namespace theoryc {

/// Free structure the theory leaves open. depth counts parameterised layers
/// in the core, so depth 2 is Dense -> Pointwise -> Dense.
struct SynthConfig {
  int hidden_width = 32;
  int depth = 2;
  std::string nonlinearity = "tanh";
  std::uint64_t seed = 0;
};

namespace rules {
inline constexpr const char* kSymEquivariant = "sym.equivariant_linear";
inline constexpr const char* kSymReadout = "sym.invariant_readout";
inline constexpr const char* kConsProjection = "cons.projection";
inline constexpr const char* kCausMasked = "caus.masked_linear";
inline constexpr const char* kDiffCurl = "diff.curl_head";
inline constexpr const char* kFreeDense = "free.dense";
inline constexpr const char* kFreePointwise = "free.pointwise";
}  // namespace rules

/// Throws Error(InvalidSignature) on a bad configuration.
void validate_config(const SynthConfig& cfg);

/// Compiles a well-formed theory. Throws UnsupportedPair when two primitives
/// can neither be licensed by a witness nor pass the joint probe (a Diff next
/// to any other constraint kind always lands here).
ArchGraph compile(const TypedTheory& t, const SynthConfig& cfg = {});

/// Equivariant (Same) or invariant-readout layer. Widths are multiples of the
/// degree (coordinate-major channel blocks); an Invariant group takes any
/// width_out. Throws DimensionMismatch.
LayerNode rule_sym(const SymmetryGroup& g, int width_in, int width_out);

/// Terminal projection onto {y : A y = t(x)} with the least-norm correction.
LayerNode rule_cons(const ConservationLaw& c, const Signature& sig);

/// Input -> masked core -> Output on num_vars coordinates.
ArchGraph rule_caus(const CausalGraph& dag, const SynthConfig& cfg);

/// Input -> CurlHead -> Output.
ArchGraph rule_diff(const DiffConstraint& d, const SynthConfig& cfg);

/// Parallel composition of two compiled graphs over the same signature.
/// Structured cores are merged layer by layer (tie join, mask intersection),
/// projections are stacked and applied last. Every cross-kind pair of source
/// primitives that interacts (Sym with Cons, Sym with Caus, Cons with Caus)
/// needs a witness in `witnesses`. Throws MissingWitness, UnsupportedPair,
/// DimensionMismatch or InvalidGraph.
ArchGraph compose(const ArchGraph& ga, const ArchGraph& gb, const std::vector<CompatibilityWitness>& witnesses);

/// Input -> Output on `dim` coordinates.
ArchGraph identity_graph(int dim);

/// Number of parameter slots (weight plus bias entries) a node owns.
std::size_t slot_count(const LayerNode& n);

}  // namespace theoryc
