#pragma once

// Independent reference computations. Nothing here calls into theoryc beyond
// plain data types.

#include <array>
#include <vector>

#include "theoryc/constraints.hpp"
#include "theoryc/theory.hpp"

namespace oracle {

using theoryc::Mask;
using theoryc::Permutation;
using theoryc::RealMatrix;

// Breadth-first closure of the generators under composition, identity included.
std::vector<Permutation> bfs_closure(const std::vector<Permutation>& gens, int degree);

// n^2 - rank of {W : W[g(a)][g(b)] = W[a][b] for every generator g}, by exact
// rational elimination.
int commutant_dim_exact(const std::vector<Permutation>& gens, int degree);

// Burnside: number of orbits on index pairs = mean of fix(g)^2.
int burnside_pair_orbits(const std::vector<Permutation>& elements, int degree);

// Closest point to yhat on {y : A y = t}, from the KKT system.
std::vector<double> kkt_projection(const RealMatrix& a, const std::vector<double>& yhat, const std::vector<double>& t);

// Reflexive-transitive closure by Floyd-Warshall; out[j][i] = 1 iff i reaches j.
Mask floyd_warshall(int n, const std::vector<std::pair<int, int>>& edges);

// Rank over the rationals of an integer-valued matrix.
int exact_rank(const RealMatrix& m);

// Curl head u = (d psi/dy, -d psi/dx), psi = sum a tanh(w x + v y + c): the
// analytic 2x2 Jacobian.
std::array<std::array<double, 2>, 2> curl_jacobian(const std::vector<double>& a, const std::vector<double>& w,
                                                   const std::vector<double>& v, const std::vector<double>& c,
                                                   double x, double y);

// Jacobian of x -> W2 tanh(W1 x + b1) + b2 by the chain rule.
RealMatrix mlp_jacobian(const RealMatrix& w1, const std::vector<double>& b1, const RealMatrix& w2,
                        const std::vector<double>& x);

}  // namespace oracle
