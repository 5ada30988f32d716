#include "theoryc/constraints.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <queue>

namespace theoryc {

namespace {

Eigen::MatrixXd to_eigen(const RealMatrix& m) {
  const auto rows = static_cast<Eigen::Index>(m.size());
  const auto cols = rows ? static_cast<Eigen::Index>(m[0].size()) : 0;
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = m[r][c];
  }
  return out;
}

RealMatrix from_eigen(const Eigen::MatrixXd& m) {
  RealMatrix out(m.rows(), RealVector(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  }
  return out;
}

}  // namespace

int numerical_rank(const RealMatrix& m, double relative_tol) {
  if (m.empty() || m[0].empty()) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > relative_tol * s(0)) ++rank;
  }
  return rank;
}

RealMatrix multiply(const RealMatrix& a, const RealMatrix& b) {
  const std::size_t inner = b.size();
  const std::size_t cols = inner ? b[0].size() : 0;
  RealMatrix out(a.size(), RealVector(cols, 0.0));
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t k = 0; k < inner; ++k) {
      for (std::size_t c = 0; c < cols; ++c) out[r][c] += a[r][k] * b[k][c];
    }
  }
  return out;
}

RealMatrix transpose(const RealMatrix& a) {
  const std::size_t cols = a.empty() ? 0 : a[0].size();
  RealMatrix out(cols, RealVector(a.size()));
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c][r] = a[r][c];
  }
  return out;
}

double max_abs_difference(const RealMatrix& a, const RealMatrix& b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r].size() != b[r].size()) return INFINITY;
    for (std::size_t c = 0; c < a[r].size(); ++c) worst = std::max(worst, std::abs(a[r][c] - b[r][c]));
  }
  return worst;
}

RealMatrix identity_matrix(std::size_t n) {
  RealMatrix out = zero_matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) out[i][i] = 1.0;
  return out;
}

RealMatrix zero_matrix(std::size_t rows, std::size_t cols) { return RealMatrix(rows, RealVector(cols, 0.0)); }

RealMatrix permute_columns(const RealMatrix& a, const Permutation& perm) {
  RealMatrix out = a;
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t i = 0; i < perm.size(); ++i) out[r][i] = a[r][perm[i]];
  }
  return out;
}

RealMatrix permute_rows(const RealMatrix& d, const Permutation& perm) {
  RealMatrix out = d;
  for (std::size_t i = 0; i < perm.size(); ++i) out[perm[i]] = d[i];
  return out;
}

RealMatrix right_pseudoinverse(const RealMatrix& a) {
  const Eigen::MatrixXd m = to_eigen(a);
  const Eigen::MatrixXd gram = m * m.transpose();
  return from_eigen(m.transpose() * gram.ldlt().solve(Eigen::MatrixXd::Identity(gram.rows(), gram.cols())));
}

RowAction row_action(const RealMatrix& a, const RealMatrix& a_pinv, const Permutation& g) {
  RowAction out;
  const RealMatrix ap = permute_columns(a, g);
  out.lambda = multiply(ap, a_pinv);
  out.residual = max_abs_difference(ap, multiply(out.lambda, a));
  return out;
}

std::optional<std::vector<int>> topological_order(const CausalGraph& dag) {
  const auto n = static_cast<std::size_t>(dag.num_vars);
  std::vector<std::vector<int>> children(n);
  std::vector<int> indegree(n, 0);
  for (auto [parent, child] : dag.edges) {
    children[parent].push_back(child);
    ++indegree[child];
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t v = 0; v < n; ++v) {
    if (indegree[v] == 0) ready.push(static_cast<int>(v));
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int c : children[v]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

Mask ancestor_closure(const CausalGraph& dag) {
  const auto n = static_cast<std::size_t>(dag.num_vars);
  Mask closure(n, std::vector<std::uint8_t>(n, 0));
  std::vector<std::vector<int>> parents(n);
  for (auto [parent, child] : dag.edges) parents[child].push_back(parent);
  const auto order = topological_order(dag);
  if (!order) return closure;
  for (int j : *order) {
    closure[j][j] = 1;
    for (int p : parents[j]) {
      for (std::size_t i = 0; i < n; ++i) closure[j][i] |= closure[p][i];
    }
  }
  return closure;
}

bool ConservationRows::uses_input() const {
  for (const auto& row : input_matrix) {
    for (double v : row) {
      if (v != 0.0) return true;
    }
  }
  return false;
}

std::optional<RealMatrix> effective_input_matrix(const ConservationLaw& law, const Signature& sig) {
  if (law.input_matrix) return law.input_matrix;
  if (sig.input_dim == sig.output_dim) return law.matrix;
  return std::nullopt;
}

void append_rows(ConservationRows& rows, const std::string& source, const ConservationLaw& law,
                 const Signature& sig) {
  const auto n_in = static_cast<std::size_t>(sig.input_dim);
  const RealMatrix a_in = law.mode == ConservationMode::Preserve
                              ? effective_input_matrix(law, sig).value_or(zero_matrix(law.matrix.size(), n_in))
                              : zero_matrix(law.matrix.size(), n_in);
  for (std::size_t r = 0; r < law.matrix.size(); ++r) {
    rows.matrix.push_back(law.matrix[r]);
    rows.input_matrix.push_back(a_in[r]);
    rows.offset.push_back(law.mode == ConservationMode::Fix ? law.target[r] : 0.0);
    rows.sources.push_back(source);
  }
}

Correction orthogonal_correction(const RealMatrix& a) { return {right_pseudoinverse(a), {}}; }

std::optional<Correction> causal_correction(const ConservationRows& rows, const Mask& closure,
                                            const std::vector<int>& topo_order, int* failed_row) {
  const std::size_t k = rows.rows();
  const std::size_t n = closure.size();
  std::vector<int> position(n, 0);
  for (std::size_t p = 0; p < topo_order.size(); ++p) position[topo_order[p]] = static_cast<int>(p);

  std::vector<int> absorbing;
  for (std::size_t r = 0; r < k; ++r) {
    int best = -1;
    for (std::size_t s = 0; s < n; ++s) {
      if (rows.matrix[r][s] == 0.0) continue;
      if (std::find(absorbing.begin(), absorbing.end(), static_cast<int>(s)) != absorbing.end()) continue;
      bool covers = true;
      for (std::size_t i = 0; i < n && covers; ++i) {
        if (rows.matrix[r][i] != 0.0 && !closure[s][i]) covers = false;
      }
      for (std::size_t i = 0; i < rows.input_matrix[r].size() && covers; ++i) {
        if (rows.input_matrix[r][i] != 0.0 && (i >= n || !closure[s][i])) covers = false;
      }
      if (covers && (best < 0 || position[s] > position[best])) best = static_cast<int>(s);
    }
    if (best < 0) {
      if (failed_row) *failed_row = static_cast<int>(r);
      return std::nullopt;
    }
    absorbing.push_back(best);
  }

  RealMatrix sub(k, RealVector(k));
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) sub[r][c] = rows.matrix[r][absorbing[c]];
  }
  if (numerical_rank(sub) < static_cast<int>(k)) {
    if (failed_row) *failed_row = -1;
    return std::nullopt;
  }
  const Eigen::MatrixXd inv = to_eigen(sub).fullPivLu().inverse();
  Correction out;
  out.matrix = zero_matrix(n, k);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t r = 0; r < k; ++r) out.matrix[absorbing[c]][r] = inv(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r));
  }
  out.absorbing = std::move(absorbing);
  if (causal_projection_violations(rows, out.matrix, closure) != 0) {
    if (failed_row) *failed_row = -1;
    return std::nullopt;
  }
  return out;
}

int causal_projection_violations(const ConservationRows& rows, const RealMatrix& correction,
                                 const Mask& closure) {
  int violations = 0;
  const std::size_t n = closure.size();
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::uint8_t> seen(n, 0);
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      if (correction[j][r] == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) {
        if (rows.matrix[r][k] != 0.0) seen[k] = 1;
      }
      for (std::size_t i = 0; i < rows.input_matrix[r].size() && i < n; ++i) {
        if (rows.input_matrix[r][i] != 0.0) seen[i] = 1;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (seen[i] && !closure[j][i]) ++violations;
    }
  }
  return violations;
}

}  // namespace theoryc
