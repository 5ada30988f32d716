#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "theoryc/archir.hpp"
#include "theoryc/synth.hpp"
#include "theoryc/typecheck.hpp"

namespace theoryc {

inline constexpr const char* kToolVersion = "theoryc 0.1.0";
inline constexpr int kCertificateVersion = 1;
inline constexpr double kFunctorialityTolerance = 1e-12;

enum class ClaimKind { SymbolicRule, NumericResidual, CompletenessDim, Functoriality };

std::string_view to_string(ClaimKind kind);

struct Claim {
  std::string primitive;
  ClaimKind kind = ClaimKind::SymbolicRule;
  std::string rule;      // synth rule replayed (SymbolicRule)
  std::string identity;  // the identity checked, in words
  std::size_t samples = 0;
  double max_residual = 0;
  double tolerance = 0;
  int orbit_count = 0;    // CompletenessDim
  int commutant_dim = 0;  // CompletenessDim
  bool passed = false;
};

struct CertifyOptions {
  int n_params = 256;
  int n_inputs = 64;
  double tol_exact = 1e-9;
  double tol_fd = 1e-5;
  double fd_step = 1e-4;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct Certificate {
  std::string theory;
  std::string archir_sha256;
  std::vector<Claim> claims;
  std::vector<std::string> notes;
  bool pass = true;
  CertifyOptions options;
};

/// Symbolic replay plus sampled residuals for every primitive of `t`, and a
/// completeness claim for each Sym primitive. Throws ProvenanceMismatch when g
/// was not compiled from a theory with the same primitives and signature.
Certificate certify_soundness(const ArchGraph& g, const TypedTheory& t, const CertifyOptions& options = {});

/// Deterministic JSON text of a certificate.
std::string certificate_json(const Certificate& c);

/// orbit_count of the pair action against n^2 - rank of the stacked system
/// {P_g W - W P_g = 0 : g a generator}. Throws GroupOrderCapExceeded.
Claim certify_completeness_linear(const SymmetryGroup& group, std::size_t cap = kDefaultGroupCap);

/// Both theories in one spec: t1's primitives and relations, then t2's.
TheorySpec conjoin(const TheorySpec& t1, const TheorySpec& t2);

/// Compiles the conjunction and the composition of the separate compilations,
/// transports parameters between them by node provenance and compares outputs
/// on n_samples random (parameter, input) draws. Throws MissingWitness when a
/// cross pair has no witness, ProvenanceMismatch when the two graphs cannot
/// be matched node for node.
Claim check_functoriality(const TypedTheory& t1, const TypedTheory& t2, const SynthConfig& cfg, int n_samples,
                          std::uint64_t seed);

enum class Mutation { UnshareSlot, ZeroProjectionRow, FlipMaskBit, CurlToDense };

std::string_view to_string(Mutation m);
inline constexpr Mutation kAllMutations[] = {Mutation::UnshareSlot, Mutation::ZeroProjectionRow, Mutation::FlipMaskBit,
                                             Mutation::CurlToDense};

/// The mutated graph, or nullopt when the graph has nothing the mutation can
/// touch (no tied slot, no projection, no structural zero, no curl head).
std::optional<ArchGraph> mutate(const ArchGraph& g, Mutation m);

}  // namespace theoryc
