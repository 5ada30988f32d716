#include "oracles.hpp"

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <deque>
#include <set>

namespace oracle {

using boost::multiprecision::cpp_rational;

std::vector<Permutation> bfs_closure(const std::vector<Permutation>& gens, int degree) {
  Permutation id(degree);
  for (int i = 0; i < degree; ++i) id[i] = i;
  std::set<Permutation> seen{id};
  std::deque<Permutation> queue{id};
  while (!queue.empty()) {
    Permutation h = queue.front();
    queue.pop_front();
    for (const auto& g : gens) {
      Permutation gh(degree);
      for (int i = 0; i < degree; ++i) gh[i] = g[h[i]];
      if (seen.insert(gh).second) queue.push_back(gh);
    }
  }
  return {seen.begin(), seen.end()};
}

namespace {

int rank_rational(std::vector<std::vector<cpp_rational>> m) {
  if (m.empty()) return 0;
  const std::size_t cols = m[0].size();
  int rank = 0;
  for (std::size_t c = 0; c < cols && rank < static_cast<int>(m.size()); ++c) {
    std::size_t pivot = rank;
    while (pivot < m.size() && m[pivot][c] == 0) ++pivot;
    if (pivot == m.size()) continue;
    std::swap(m[pivot], m[rank]);
    for (std::size_t r = 0; r < m.size(); ++r) {
      if (r == static_cast<std::size_t>(rank) || m[r][c] == 0) continue;
      const cpp_rational f = m[r][c] / m[rank][c];
      for (std::size_t k = c; k < cols; ++k) m[r][k] -= f * m[rank][k];
    }
    ++rank;
  }
  return rank;
}

}  // namespace

int commutant_dim_exact(const std::vector<Permutation>& gens, int degree) {
  const int n2 = degree * degree;
  std::vector<std::vector<cpp_rational>> rows;
  for (const auto& g : gens) {
    for (int a = 0; a < degree; ++a) {
      for (int b = 0; b < degree; ++b) {
        std::vector<cpp_rational> row(n2, 0);
        row[g[a] * degree + g[b]] += 1;
        row[a * degree + b] -= 1;
        rows.push_back(std::move(row));
      }
    }
  }
  return n2 - rank_rational(std::move(rows));
}

int burnside_pair_orbits(const std::vector<Permutation>& elements, int degree) {
  long total = 0;
  for (const auto& g : elements) {
    long fixed = 0;
    for (int i = 0; i < degree; ++i) fixed += g[i] == i;
    total += fixed * fixed;
  }
  return static_cast<int>(total / static_cast<long>(elements.size()));
}

std::vector<double> kkt_projection(const RealMatrix& a, const std::vector<double>& yhat, const std::vector<double>& t) {
  const int k = static_cast<int>(a.size());
  const int n = static_cast<int>(yhat.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
  Eigen::VectorXd rhs(n + k);
  kkt.topLeftCorner(n, n).setIdentity();
  for (int r = 0; r < k; ++r) {
    for (int j = 0; j < n; ++j) {
      kkt(n + r, j) = a[r][j];
      kkt(j, n + r) = a[r][j];
    }
    rhs(n + r) = t[r];
  }
  for (int j = 0; j < n; ++j) rhs(j) = yhat[j];
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  return {sol.data(), sol.data() + n};
}

Mask floyd_warshall(int n, const std::vector<std::pair<int, int>>& edges) {
  Mask reach(n, std::vector<std::uint8_t>(n, 0));
  for (int i = 0; i < n; ++i) reach[i][i] = 1;
  for (auto [p, c] : edges) reach[c][p] = 1;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (reach[j][k] && reach[k][i]) reach[j][i] = 1;
  return reach;
}

int exact_rank(const RealMatrix& m) {
  std::vector<std::vector<cpp_rational>> q;
  for (const auto& row : m) {
    std::vector<cpp_rational> r;
    for (double v : row) r.emplace_back(static_cast<long long>(std::llround(v)));
    q.push_back(std::move(r));
  }
  return rank_rational(std::move(q));
}

std::array<std::array<double, 2>, 2> curl_jacobian(const std::vector<double>& a, const std::vector<double>& w,
                                                   const std::vector<double>& v, const std::vector<double>& c,
                                                   double x, double y) {
  // u = sum a v s(z), s = sech^2, s' = -2 tanh s
  std::array<std::array<double, 2>, 2> j{};
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double th = std::tanh(w[k] * x + v[k] * y + c[k]);
    const double ds = -2.0 * th * (1.0 - th * th);
    j[0][0] += a[k] * v[k] * ds * w[k];
    j[0][1] += a[k] * v[k] * ds * v[k];
    j[1][0] -= a[k] * w[k] * ds * w[k];
    j[1][1] -= a[k] * w[k] * ds * v[k];
  }
  return j;
}

RealMatrix mlp_jacobian(const RealMatrix& w1, const std::vector<double>& b1, const RealMatrix& w2,
                        const std::vector<double>& x) {
  const std::size_t h = w1.size(), n = x.size(), m = w2.size();
  std::vector<double> slope(h);
  for (std::size_t k = 0; k < h; ++k) {
    double z = b1[k];
    for (std::size_t i = 0; i < n; ++i) z += w1[k][i] * x[i];
    const double t = std::tanh(z);
    slope[k] = 1.0 - t * t;
  }
  RealMatrix j(m, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t k = 0; k < h; ++k)
      for (std::size_t i = 0; i < n; ++i) j[r][i] += w2[r][k] * slope[k] * w1[k][i];
  return j;
}

}  // namespace oracle
