#include "theoryc/group.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "theoryc/error.hpp"

namespace theoryc {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

  // Dense ids numbered by first occurrence.
  std::vector<int> labels() {
    std::vector<int> label(parent_.size(), -1);
    std::vector<int> out(parent_.size());
    int next = 0;
    for (std::size_t i = 0; i < parent_.size(); ++i) {
      const std::size_t root = find(i);
      if (label[root] < 0) label[root] = next++;
      out[i] = label[root];
    }
    return out;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

Permutation identity_permutation(int degree) {
  Permutation p(static_cast<std::size_t>(degree));
  std::iota(p.begin(), p.end(), 0);
  return p;
}

bool is_bijection(const Permutation& perm, int degree) {
  if (static_cast<int>(perm.size()) != degree) return false;
  std::vector<bool> hit(perm.size(), false);
  for (int v : perm) {
    if (v < 0 || v >= degree || hit[v]) return false;
    hit[v] = true;
  }
  return true;
}

Permutation compose(const Permutation& g, const Permutation& h) {
  Permutation out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = g[h[i]];
  return out;
}

Permutation inverse(const Permutation& g) {
  Permutation out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[g[i]] = static_cast<int>(i);
  return out;
}

std::vector<Permutation> enumerate_group(const std::vector<Permutation>& generators, int degree,
                                         std::size_t cap) {
  for (std::size_t k = 0; k < generators.size(); ++k) {
    if (!is_bijection(generators[k], degree)) {
      throw Error(ErrorCode::NonBijectiveGenerator,
                  "generator " + std::to_string(k) + " is not a bijection on " + std::to_string(degree) + " points");
    }
  }
  std::set<Permutation> seen{identity_permutation(degree)};
  std::vector<Permutation> frontier{identity_permutation(degree)};
  while (!frontier.empty()) {
    std::vector<Permutation> next;
    for (const auto& element : frontier) {
      for (const auto& gen : generators) {
        Permutation product = compose(gen, element);
        if (seen.insert(product).second) {
          if (seen.size() > cap) {
            throw Error(ErrorCode::GroupOrderCapExceeded,
                        "group order exceeds cap " + std::to_string(cap));
          }
          next.push_back(std::move(product));
        }
      }
    }
    frontier = std::move(next);
  }
  return {seen.begin(), seen.end()};
}

std::vector<int> point_orbits(const std::vector<Permutation>& generators, int degree) {
  DisjointSets sets(static_cast<std::size_t>(degree));
  for (const auto& g : generators) {
    for (int i = 0; i < degree; ++i) sets.unite(i, g[i]);
  }
  return sets.labels();
}

std::vector<int> pair_orbits(const std::vector<Permutation>& generators, int degree) {
  const auto n = static_cast<std::size_t>(degree);
  DisjointSets sets(n * n);
  for (const auto& g : generators) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) sets.unite(i * n + j, g[i] * n + g[j]);
    }
  }
  return sets.labels();
}

int count_distinct(const std::vector<int>& ids) {
  return static_cast<int>(std::set<int>(ids.begin(), ids.end()).size());
}

}  // namespace theoryc
