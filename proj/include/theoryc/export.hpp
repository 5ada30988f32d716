#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "theoryc/archir.hpp"
#include "theoryc/interp.hpp"

namespace theoryc {

inline constexpr int kReferenceCases = 32;

struct ExportBundle {
  std::string source;  // standalone model source
  std::string refs;    // {"inputs", "outputs", "seed", "archir_sha256"}
};

/// Standalone model source for `target` (only "python") with parameters from
/// init_params(g, seed) embedded in a metadata JSON block, plus reference
/// vectors from the interpreter. Throws UnsupportedTarget.
ExportBundle export_model(const ArchGraph& g, std::string_view target, std::uint64_t seed,
                          int reference_cases = kReferenceCases);

/// The metadata block embedded in exported python source.
std::string export_metadata(const ArchGraph& g, const ParamSet& params, std::uint64_t seed);

/// `count` standard-normal inputs (counter stream keyed by seed) and their
/// interpreter outputs.
std::string reference_vectors(const ArchGraph& g, const ParamSet& params, std::uint64_t seed, int count);

}  // namespace theoryc
