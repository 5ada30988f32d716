#pragma once

#include <cstddef>
#include <vector>

#include "theoryc/theory.hpp"

namespace theoryc {

inline constexpr std::size_t kDefaultGroupCap = 10'080;

Permutation identity_permutation(int degree);
bool is_bijection(const Permutation& perm, int degree);

/// (g ∘ h)(i) = g(h(i)).
Permutation compose(const Permutation& g, const Permutation& h);
Permutation inverse(const Permutation& g);

/// Closure of `generators` under composition, identity included, sorted
/// lexicographically by image tuple. Throws NonBijectiveGenerator or
/// GroupOrderCapExceeded.
std::vector<Permutation> enumerate_group(const std::vector<Permutation>& generators, int degree,
                                         std::size_t cap = kDefaultGroupCap);

/// Orbit id of every point 0..degree-1 under the generated group, numbered by
/// first occurrence.
std::vector<int> point_orbits(const std::vector<Permutation>& generators, int degree);

/// Orbit id of every index pair (i, j), flattened row-major, under the diagonal
/// action (i, j) -> (g(i), g(j)); numbered by first occurrence.
std::vector<int> pair_orbits(const std::vector<Permutation>& generators, int degree);

int count_distinct(const std::vector<int>& ids);

}  // namespace theoryc
