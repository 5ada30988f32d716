#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "theoryc/theory.hpp"

namespace theoryc {

inline constexpr double kRankTolerance = 1e-10;
inline constexpr double kWitnessTolerance = 1e-10;

/// 0/1 matrix, row-major, mask[row][col].
using Mask = std::vector<std::vector<std::uint8_t>>;

/// Numerical rank with singular values below tol * sigma_max treated as zero.
int numerical_rank(const RealMatrix& m, double relative_tol = kRankTolerance);

RealMatrix multiply(const RealMatrix& a, const RealMatrix& b);
RealMatrix transpose(const RealMatrix& a);
double max_abs_difference(const RealMatrix& a, const RealMatrix& b);
RealMatrix identity_matrix(std::size_t n);
RealMatrix zero_matrix(std::size_t rows, std::size_t cols);

/// A with column i replaced by column perm[i], i.e. A * P_perm where
/// P_perm[perm[i]][i] = 1.
RealMatrix permute_columns(const RealMatrix& a, const Permutation& perm);
/// P_perm * D: row perm[i] of the result is row i of D.
RealMatrix permute_rows(const RealMatrix& d, const Permutation& perm);

/// Right inverse A^T (A A^T)^-1 of a full-row-rank A.
RealMatrix right_pseudoinverse(const RealMatrix& a);

/// Lambda = A P_g A^+ together with the max residual of A P_g - Lambda A.
struct RowAction {
  RealMatrix lambda;
  double residual = 0;
};
RowAction row_action(const RealMatrix& a, const RealMatrix& a_pinv, const Permutation& g);

/// Reflexive-transitive closure of a DAG: closure[j][i] = 1 iff i == j or i is
/// an ancestor of j. Requires an acyclic graph with in-range edges.
Mask ancestor_closure(const CausalGraph& dag);

/// Kahn's algorithm, ties broken by smallest vertex index. nullopt on a cycle.
std::optional<std::vector<int>> topological_order(const CausalGraph& dag);

/// Rows of every conservation law, stacked in declaration order. Preserve rows
/// carry A_in, Fix rows a zero A_in row and the target in `offset`, so the
/// enforced identity is A f(x) = A_in x + offset.
struct ConservationRows {
  RealMatrix matrix;
  RealMatrix input_matrix;
  RealVector offset;
  std::vector<std::string> sources;

  std::size_t rows() const { return matrix.size(); }
  bool uses_input() const;
};

/// A_in of a Preserve law, resolving the default; nullopt when the default is
/// unavailable (input_dim != output_dim).
std::optional<RealMatrix> effective_input_matrix(const ConservationLaw& law, const Signature& sig);

void append_rows(ConservationRows& rows, const std::string& source, const ConservationLaw& law,
                 const Signature& sig);

/// Correction D (n x k) with A D = I used by the projection
/// y = yhat + D (t - A yhat).
struct Correction {
  RealMatrix matrix;
  std::vector<int> absorbing;  // empty for the orthogonal correction
};

/// Orthogonal least-norm correction D = A^+.
Correction orthogonal_correction(const RealMatrix& a);

/// Oblique correction that keeps every output inside its closed ancestor set:
/// each row r is absorbed by one node s_r whose closed ancestor set covers the
/// supports of A_r and A_in,r. On failure returns nullopt and sets
/// `failed_row` (or -1 when the absorbing submatrix is singular).
std::optional<Correction> causal_correction(const ConservationRows& rows, const Mask& closure,
                                            const std::vector<int>& topo_order, int* failed_row = nullptr);

/// Largest structural dependency violation of the projection against a
/// closure mask: counts (j, i) pairs where output j of the projection can see
/// a core output k or input i outside closure[j].
int causal_projection_violations(const ConservationRows& rows, const RealMatrix& correction,
                                 const Mask& closure);

}  // namespace theoryc
