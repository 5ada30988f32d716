#pragma once

#include <random>
#include <string>
#include <vector>

#include "theoryc/theory.hpp"

namespace gen {

using Rng = std::mt19937_64;

int uniform(Rng& rng, int lo, int hi);  // inclusive
theoryc::Permutation random_permutation(Rng& rng, int degree);

// Syntactically valid spec; not necessarily well-formed.
theoryc::TheorySpec random_spec(Rng& rng);

// Well-formed spec the synthesizer accepts. Covers single primitives of each
// kind and the licensed pairs.
theoryc::TheorySpec random_compilable(Rng& rng);

// Generators of a group of order <= max_order on at most 6 points.
struct RandomGroup {
  int degree = 0;
  std::vector<theoryc::Permutation> generators;
};
RandomGroup random_group(Rng& rng, std::size_t max_order);

// `count` inputs each of which is guaranteed to be rejected by the parser or
// the well-formedness checker.
std::vector<std::string> fuzz_corpus(Rng& rng, int count, const std::vector<std::string>& seeds);

}  // namespace gen
