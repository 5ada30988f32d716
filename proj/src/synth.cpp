#include "theoryc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

#include "theoryc/error.hpp"
#include "theoryc/group.hpp"
#include "theoryc/interp.hpp"

namespace theoryc {

namespace {

using Pattern = std::vector<std::vector<int>>;

struct LayerPlan {
  NodeKind kind = NodeKind::Dense;
  int rows = 0;
  int cols = 0;
  Pattern pattern;  // class id per entry, -1 for a structural zero
  std::vector<int> bias;
  std::vector<ProvenanceEntry> prov;
};

struct CorePlan {
  std::vector<LayerPlan> layers;
  std::string nonlinearity = "tanh";
  int curl_features = 0;  // > 0 for a CurlHead core
  std::vector<ProvenanceEntry> curl_prov;

  bool empty() const { return layers.empty() && curl_features == 0; }
};

struct ProjectionPlan {
  ProjectionNode node;
  std::vector<ProvenanceEntry> prov;
};

Pattern dense_pattern(int rows, int cols) {
  Pattern p(rows, std::vector<int>(cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) p[r][c] = r * cols + c;
  }
  return p;
}

std::vector<int> iota_vector(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

// Coordinate-major lift: row j*cout+co, column i*cin+ci.
Pattern equivariant_pattern(const std::vector<int>& pair_orbit, int n, int cin, int cout) {
  Pattern p(n * cout, std::vector<int>(n * cin));
  for (int j = 0; j < n; ++j) {
    for (int co = 0; co < cout; ++co) {
      for (int i = 0; i < n; ++i) {
        for (int ci = 0; ci < cin; ++ci) p[j * cout + co][i * cin + ci] = (pair_orbit[j * n + i] * cout + co) * cin + ci;
      }
    }
  }
  return p;
}

std::vector<int> equivariant_bias(const std::vector<int>& point_orbit, int n, int cout) {
  std::vector<int> b(n * cout);
  for (int j = 0; j < n; ++j) {
    for (int co = 0; co < cout; ++co) b[j * cout + co] = point_orbit[j] * cout + co;
  }
  return b;
}

Pattern readout_pattern(const std::vector<int>& point_orbit, int n, int cin, int m) {
  const int orbits = count_distinct(point_orbit);
  Pattern p(m, std::vector<int>(n * cin));
  for (int r = 0; r < m; ++r) {
    for (int i = 0; i < n; ++i) {
      for (int ci = 0; ci < cin; ++ci) p[r][i * cin + ci] = (r * orbits + point_orbit[i]) * cin + ci;
    }
  }
  return p;
}

void apply_block_mask(Pattern& p, const Mask& m, int cin, int cout) {
  for (std::size_t r = 0; r < p.size(); ++r) {
    for (std::size_t c = 0; c < p[r].size(); ++c) {
      if (!m[r / cout][c / cin]) p[r][c] = -1;
    }
  }
}

// Class ids renumbered by first row-major occurrence; -1 kept.
void renumber(Pattern& p) {
  std::map<int, int> ids;
  for (auto& row : p) {
    for (int& v : row) {
      if (v < 0) continue;
      auto [it, fresh] = ids.try_emplace(v, static_cast<int>(ids.size()));
      v = it->second;
    }
  }
}

void renumber(std::vector<int>& b) {
  std::map<int, int> ids;
  for (int& v : b) {
    auto [it, fresh] = ids.try_emplace(v, static_cast<int>(ids.size()));
    v = it->second;
  }
}

int max_row_support(const Pattern& p) {
  int best = 1;
  for (const auto& row : p) best = std::max(best, static_cast<int>(std::count_if(row.begin(), row.end(), [](int v) { return v >= 0; })));
  return best;
}

LayerNode materialize(const LayerPlan& plan, int id, int& next_slot) {
  LayerNode n;
  n.id = id;
  n.width_in = plan.cols;
  n.width_out = plan.rows;
  const int fan_in = max_row_support(plan.pattern);
  switch (plan.kind) {
    case NodeKind::Dense:
    case NodeKind::MaskedDense: {
      n.params.push_back({next_slot++, "weight", {plan.rows, plan.cols}, fan_in});
      n.params.push_back({next_slot++, "bias", {plan.rows}, fan_in});
      if (plan.kind == NodeKind::Dense) {
        n.data = DenseNode{};
      } else {
        MaskedDenseNode m;
        for (const auto& row : plan.pattern) {
          std::vector<std::uint8_t> bits;
          for (int v : row) bits.push_back(v >= 0 ? 1 : 0);
          m.mask.push_back(std::move(bits));
        }
        n.data = std::move(m);
      }
      break;
    }
    default: {
      SharedLinearNode s{plan.pattern, plan.bias};
      renumber(s.pattern);
      renumber(s.bias_pattern);
      int wmax = -1;
      for (const auto& row : s.pattern) wmax = std::max(wmax, *std::max_element(row.begin(), row.end()));
      const int bmax = *std::max_element(s.bias_pattern.begin(), s.bias_pattern.end());
      n.params.push_back({next_slot++, "weight", {wmax + 1}, fan_in});
      n.params.push_back({next_slot++, "bias", {bmax + 1}, fan_in});
      n.data = std::move(s);
      break;
    }
  }
  return n;
}

LossSpec default_loss() { return {LossKind::MSE, "mean squared error on outputs; constraints are architectural"}; }

ArchGraph build_graph(int input_dim, int output_dim, const CorePlan& core, const std::optional<ProjectionPlan>& proj) {
  ArchGraph g;
  g.input_dim = input_dim;
  g.output_dim = output_dim;
  g.loss = default_loss();
  int next_id = 0;
  int next_slot = 0;
  g.nodes.push_back({next_id++, input_dim, input_dim, {}, InputNode{}});
  const int input_id = 0;
  int tail = input_id;
  int tail_width = input_dim;
  auto link = [&](LayerNode n, std::vector<ProvenanceEntry> prov) {
    g.edges.push_back({tail, n.id, 0});
    tail = n.id;
    tail_width = n.width_out;
    if (!prov.empty()) g.provenance[n.id] = std::move(prov);
    g.nodes.push_back(std::move(n));
  };

  if (core.curl_features > 0) {
    const int m = core.curl_features;
    LayerNode n{next_id++, 2, 2, {}, CurlHeadNode{m}};
    n.params = {{next_slot, "a", {m}, m}, {next_slot + 1, "w", {m}, 2}, {next_slot + 2, "v", {m}, 2}, {next_slot + 3, "c", {m}, 2}};
    next_slot += 4;
    link(std::move(n), core.curl_prov);
  }
  for (std::size_t l = 0; l < core.layers.size(); ++l) {
    if (l > 0) {
      link(LayerNode{next_id++, tail_width, tail_width, {}, PointwiseNode{core.nonlinearity}},
           {{"", rules::kFreePointwise}});
    }
    const int id = next_id++;
    link(materialize(core.layers[l], id, next_slot), core.layers[l].prov);
  }
  if (proj) {
    const int id = next_id++;
    const bool skip = !proj->node.input_matrix.empty();
    link(LayerNode{id, output_dim, output_dim, {}, proj->node}, proj->prov);
    if (skip) g.edges.push_back({input_id, id, 1});
  }
  const int out_id = next_id++;
  link(LayerNode{out_id, output_dim, output_dim, {}, OutputNode{}}, {});
  return g;
}

std::vector<ProvenanceEntry> merge_prov(std::vector<ProvenanceEntry> a, const std::vector<ProvenanceEntry>& b) {
  for (const auto& e : b) {
    if (std::find(a.begin(), a.end(), e) == a.end()) a.push_back(e);
  }
  return a;
}

// Kahn order of the partial order carried by a closure mask, smallest index first.
std::vector<int> topo_from_mask(const Mask& m) {
  const int n = static_cast<int>(m.size());
  std::vector<int> indegree(n, 0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i != j && m[j][i]) ++indegree[j];
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int j = 0; j < n; ++j) {
    if (indegree[j] == 0) ready.push(j);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int i = ready.top();
    ready.pop();
    order.push_back(i);
    for (int j = 0; j < n; ++j) {
      if (j != i && m[j][i] && --indegree[j] == 0) ready.push(j);
    }
  }
  return order;
}

ProjectionNode projection_from_rows(const ConservationRows& rows, const std::optional<Mask>& mask) {
  ProjectionNode p;
  p.matrix = rows.matrix;
  if (rows.uses_input()) p.input_matrix = rows.input_matrix;
  p.offset = rows.offset;
  p.row_sources = rows.sources;
  if (numerical_rank(rows.matrix) != static_cast<int>(rows.rows())) {
    throw Error(ErrorCode::UnsupportedPair, "stacked conservation rows are rank deficient");
  }
  if (mask) {
    int failed = -1;
    auto corr = causal_correction(rows, *mask, topo_from_mask(*mask), &failed);
    if (!corr) {
      throw Error(ErrorCode::UnsupportedPair,
                  failed >= 0 ? "conservation row " + std::to_string(failed) + " has no absorbing node under the joint causal mask"
                              : "no mask-preserving correction exists for the stacked conservation rows");
    }
    p.correction = std::move(corr->matrix);
  } else {
    p.correction = orthogonal_correction(rows.matrix).matrix;
  }
  return p;
}

std::string pair_name(const std::string& a, const std::string& b) { return "(" + a + ", " + b + ")"; }

// Joint identities the terminal projection needs under the generated group.
void probe_sym_projection(const std::vector<Permutation>& gens, OutputAction action, const ProjectionNode& p,
                          bool oblique) {
  const std::size_t k = p.matrix.size();
  const RealMatrix pinv = right_pseudoinverse(p.matrix);
  for (const auto& g : gens) {
    const RealMatrix lambda = action == OutputAction::Same ? row_action(p.matrix, pinv, g).lambda : identity_matrix(k);
    double worst = 0;
    if (action == OutputAction::Same) {
      worst = max_abs_difference(permute_columns(p.matrix, g), multiply(lambda, p.matrix));
      if (oblique) worst = std::max(worst, max_abs_difference(permute_rows(p.correction, g), multiply(p.correction, lambda)));
    }
    if (!p.input_matrix.empty()) {
      worst = std::max(worst, max_abs_difference(permute_columns(p.input_matrix, g), multiply(lambda, p.input_matrix)));
    }
    for (std::size_t r = 0; r < k; ++r) {
      double lb = 0;
      for (std::size_t c = 0; c < k; ++c) lb += lambda[r][c] * p.offset[c];
      worst = std::max(worst, std::abs(lb - p.offset[r]));
    }
    if (!(worst <= kWitnessTolerance)) {
      throw Error(ErrorCode::UnsupportedPair,
                  "the joint symmetry group does not commute with the conservation projection (residual " +
                      std::to_string(worst) + ")");
    }
  }
}

CorePlan structured_core(int n, int m, const SynthConfig& cfg, const std::vector<const Primitive*>& syms,
                         const std::vector<const Primitive*>& ordered, const std::optional<Mask>& mask) {
  CorePlan core;
  core.nonlinearity = cfg.nonlinearity;
  std::vector<Permutation> gens;
  OutputAction action = OutputAction::Same;
  for (const auto* p : syms) {
    const auto& g = std::get<SymmetryGroup>(p->payload);
    gens.insert(gens.end(), g.generators.begin(), g.generators.end());
    action = g.output_action;
  }
  const std::vector<int> pair_orb = syms.empty() ? std::vector<int>{} : pair_orbits(gens, n);
  const std::vector<int> point_orb = syms.empty() ? std::vector<int>{} : point_orbits(gens, n);
  const int depth = cfg.depth;
  for (int l = 0; l < depth; ++l) {
    const int cin = l == 0 ? 1 : cfg.hidden_width;
    const bool last = l == depth - 1;
    const int cout = last ? 1 : cfg.hidden_width;
    const bool readout = !syms.empty() && action == OutputAction::Invariant && last;
    LayerPlan plan;
    if (readout) {
      plan.pattern = readout_pattern(point_orb, n, cin, m);
      plan.bias = iota_vector(m);
    } else if (!syms.empty()) {
      plan.pattern = equivariant_pattern(pair_orb, n, cin, cout);
      plan.bias = equivariant_bias(point_orb, n, cout);
    } else {
      plan.pattern = dense_pattern(n * cout, n * cin);
      plan.bias = iota_vector(n * cout);
    }
    plan.rows = static_cast<int>(plan.pattern.size());
    plan.cols = n * cin;
    if (mask) apply_block_mask(plan.pattern, *mask, cin, cout);
    plan.kind = !syms.empty() ? NodeKind::SharedLinear : NodeKind::MaskedDense;
    for (const auto* p : ordered) {
      if (p->kind == PrimitiveKind::Sym) plan.prov.push_back({p->name, readout ? rules::kSymReadout : rules::kSymEquivariant});
      if (p->kind == PrimitiveKind::Caus) plan.prov.push_back({p->name, rules::kCausMasked});
    }
    core.layers.push_back(std::move(plan));
  }
  return core;
}

CorePlan free_core(int n, int m, const SynthConfig& cfg) {
  CorePlan core;
  core.nonlinearity = cfg.nonlinearity;
  for (int l = 0; l < cfg.depth; ++l) {
    const int cols = l == 0 ? n : cfg.hidden_width;
    const int rows = l == cfg.depth - 1 ? m : cfg.hidden_width;
    core.layers.push_back({NodeKind::Dense, rows, cols, dense_pattern(rows, cols), iota_vector(rows), {{"", rules::kFreeDense}}});
  }
  return core;
}

// ----- decomposition of compiled graphs -----

struct Decomposed {
  CorePlan core;
  std::optional<ProjectionPlan> proj;
};

LayerPlan plan_of(const LayerNode& n, std::vector<ProvenanceEntry> prov) {
  LayerPlan plan;
  plan.kind = n.kind();
  plan.rows = n.width_out;
  plan.cols = n.width_in;
  plan.prov = std::move(prov);
  if (plan.kind == NodeKind::SharedLinear) {
    const auto& s = std::get<SharedLinearNode>(n.data);
    plan.pattern = s.pattern;
    plan.bias = s.bias_pattern;
  } else {
    plan.pattern = dense_pattern(plan.rows, plan.cols);
    plan.bias = iota_vector(plan.rows);
    if (plan.kind == NodeKind::MaskedDense) {
      const auto& mask = std::get<MaskedDenseNode>(n.data).mask;
      for (int r = 0; r < plan.rows; ++r) {
        for (int c = 0; c < plan.cols; ++c) {
          if (!mask[r][c]) plan.pattern[r][c] = -1;
        }
      }
    }
  }
  return plan;
}

Decomposed decompose(const ArchGraph& g) {
  if (!validate_graph(g).empty()) throw Error(ErrorCode::InvalidGraph, "graph fails validation");
  auto bad = [](const std::string& why) { return Error(ErrorCode::InvalidGraph, "not a canonical compiled graph: " + why); };
  auto prov_of = [&](int id) {
    auto it = g.provenance.find(id);
    return it == g.provenance.end() ? std::vector<ProvenanceEntry>{} : it->second;
  };
  int input_id = -1;
  int output_id = -1;
  for (const auto& n : g.nodes) {
    if (n.kind() == NodeKind::Input) input_id = n.id;
    if (n.kind() == NodeKind::Output) output_id = n.id;
  }
  Decomposed d;
  int cur = g.producers(output_id).at(0);
  if (g.find(cur)->kind() == NodeKind::Projection) {
    const auto prods = g.producers(cur);
    if (prods.size() == 2 && prods[1] != input_id) throw bad("projection skip edge must come from the input");
    d.proj = ProjectionPlan{std::get<ProjectionNode>(g.find(cur)->data), prov_of(cur)};
    cur = prods[0];
  }
  std::vector<const LayerNode*> chain;
  while (cur != input_id) {
    const LayerNode* n = g.find(cur);
    const auto prods = g.producers(cur);
    if (prods.size() != 1) throw bad("core node with several inputs");
    chain.push_back(n);
    cur = prods[0];
  }
  std::reverse(chain.begin(), chain.end());
  bool want_linear = true;
  for (const LayerNode* n : chain) {
    switch (n->kind()) {
      case NodeKind::Dense:
      case NodeKind::MaskedDense:
      case NodeKind::SharedLinear:
        if (!want_linear || d.core.curl_features > 0) throw bad("two adjacent linear layers");
        d.core.layers.push_back(plan_of(*n, prov_of(n->id)));
        want_linear = false;
        break;
      case NodeKind::Pointwise:
        if (want_linear) throw bad("misplaced pointwise node");
        d.core.nonlinearity = std::get<PointwiseNode>(n->data).nonlinearity;
        want_linear = true;
        break;
      case NodeKind::CurlHead:
        if (chain.size() != 1) throw bad("curl head must be the whole core");
        d.core.curl_features = std::get<CurlHeadNode>(n->data).features;
        d.core.curl_prov = prov_of(n->id);
        break;
      default: throw bad("unexpected " + std::string(to_string(n->kind())) + " node in the core");
    }
  }
  if (!d.core.layers.empty() && want_linear) throw bad("core ends with a pointwise node");
  return d;
}

enum class Role { Free, Sym, SymInvariant, Cons, Caus, Diff };

std::map<std::string, Role> constrained_primitives(const Decomposed& d) {
  std::map<std::string, Role> out;
  auto note = [&](const ProvenanceEntry& e) {
    if (e.primitive.empty()) return;
    const std::string& r = e.rule;
    Role role = Role::Free;
    if (r == rules::kSymEquivariant) role = Role::Sym;
    else if (r == rules::kSymReadout) role = Role::SymInvariant;
    else if (r == rules::kConsProjection) role = Role::Cons;
    else if (r == rules::kCausMasked) role = Role::Caus;
    else if (r == rules::kDiffCurl) role = Role::Diff;
    auto [it, fresh] = out.try_emplace(e.primitive, role);
    if (!fresh && role == Role::SymInvariant) it->second = role;
  };
  for (const auto& l : d.core.layers) {
    for (const auto& e : l.prov) note(e);
  }
  for (const auto& e : d.core.curl_prov) note(e);
  if (d.proj) {
    for (const auto& e : d.proj->prov) note(e);
  }
  return out;
}

bool is_structured(const CorePlan& core) {
  if (core.curl_features > 0) return true;
  for (const auto& l : core.layers) {
    for (const auto& e : l.prov) {
      if (!e.primitive.empty()) return true;
    }
  }
  return false;
}

bool has_rule(const CorePlan& core, std::string_view rule) {
  for (const auto& l : core.layers) {
    for (const auto& e : l.prov) {
      if (e.rule == rule) return true;
    }
  }
  return false;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Join of two tie partitions over the same entries; a zero anywhere in a
// class zeroes the class.
std::vector<int> join_partitions(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  UnionFind uf(n);
  for (const auto* part : {&a, &b}) {
    std::map<int, int> first;
    for (std::size_t e = 0; e < n; ++e) {
      const int k = (*part)[e];
      if (k < 0) continue;
      auto [it, fresh] = first.try_emplace(k, static_cast<int>(e));
      if (!fresh) uf.unite(static_cast<int>(e), it->second);
    }
  }
  std::set<int> zero_roots;
  for (std::size_t e = 0; e < n; ++e) {
    if (a[e] < 0 || b[e] < 0) zero_roots.insert(uf.find(static_cast<int>(e)));
  }
  std::vector<int> out(n);
  for (std::size_t e = 0; e < n; ++e) {
    const int root = uf.find(static_cast<int>(e));
    out[e] = zero_roots.contains(root) ? -1 : root;
  }
  return out;
}

std::vector<int> flatten(const Pattern& p) {
  std::vector<int> out;
  for (const auto& row : p) out.insert(out.end(), row.begin(), row.end());
  return out;
}

LayerPlan merge_layers(const LayerPlan& a, const LayerPlan& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw Error(ErrorCode::UnsupportedPair, "structured cores differ in shape; compile both with the same configuration");
  }
  LayerPlan out;
  out.rows = a.rows;
  out.cols = a.cols;
  if (a.kind == NodeKind::SharedLinear || b.kind == NodeKind::SharedLinear) out.kind = NodeKind::SharedLinear;
  else if (a.kind == NodeKind::MaskedDense || b.kind == NodeKind::MaskedDense) out.kind = NodeKind::MaskedDense;
  else out.kind = NodeKind::Dense;
  const auto joined = join_partitions(flatten(a.pattern), flatten(b.pattern));
  out.pattern.assign(out.rows, std::vector<int>(out.cols));
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) out.pattern[r][c] = joined[r * out.cols + c];
  }
  out.bias = join_partitions(a.bias, b.bias);
  out.prov = merge_prov(a.prov, b.prov);
  return out;
}

Mask mask_from_core(const CorePlan& core, int n) {
  const LayerPlan& first = core.layers.front();
  const int cout = first.rows / n;
  Mask m(n, std::vector<std::uint8_t>(n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) m[j][i] = first.pattern[j * cout][i] >= 0 ? 1 : 0;
  }
  return m;
}

bool needs_witness(Role a, Role b) {
  auto is = [&](Role x, Role y) { return (a == x && b == y) || (a == y && b == x); };
  const bool sym_a = a == Role::Sym || a == Role::SymInvariant;
  const bool sym_b = b == Role::Sym || b == Role::SymInvariant;
  return ((sym_a && b == Role::Cons) || (sym_b && a == Role::Cons)) || ((sym_a && b == Role::Caus) || (sym_b && a == Role::Caus)) ||
         is(Role::Cons, Role::Caus);
}

}  // namespace

void validate_config(const SynthConfig& cfg) {
  if (cfg.hidden_width < 1 || cfg.hidden_width > kMaxDimension) {
    throw Error(ErrorCode::InvalidSignature, "hidden width must lie in [1, " + std::to_string(kMaxDimension) + "]");
  }
  if (cfg.depth < 1 || cfg.depth > 64) throw Error(ErrorCode::InvalidSignature, "depth must lie in [1, 64]");
  if (!is_known_nonlinearity(cfg.nonlinearity)) {
    throw Error(ErrorCode::InvalidSignature, "unknown nonlinearity '" + cfg.nonlinearity + "'");
  }
}

ArchGraph compile(const TypedTheory& t, const SynthConfig& cfg) {
  validate_config(cfg);
  const auto& spec = t.spec;
  const int n = spec.signature.input_dim;
  const int m = spec.signature.output_dim;

  std::vector<const Primitive*> syms, cons, caus, diffs, ordered;
  for (const auto& p : spec.primitives) {
    ordered.push_back(&p);
    switch (p.kind) {
      case PrimitiveKind::Sym: syms.push_back(&p); break;
      case PrimitiveKind::Cons: cons.push_back(&p); break;
      case PrimitiveKind::Caus: caus.push_back(&p); break;
      case PrimitiveKind::Diff: diffs.push_back(&p); break;
    }
  }

  // Pairs not named in R still have to pass the same checks.
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    for (std::size_t j = i + 1; j < ordered.size(); ++j) {
      if (t.witness_for(ordered[i]->name, ordered[j]->name)) continue;
      try {
        (void)check_compatibility(*ordered[i], *ordered[j], t);
      } catch (const Error& e) {
        throw Error(ErrorCode::UnsupportedPair,
                    "unrelated pair " + pair_name(ordered[i]->name, ordered[j]->name) + " fails the joint probe: " + e.what());
      }
    }
  }

  if (!diffs.empty()) {
    CorePlan core;
    core.curl_features = cfg.hidden_width;
    for (const auto* p : diffs) core.curl_prov.push_back({p->name, rules::kDiffCurl});
    return build_graph(n, m, core, std::nullopt);
  }

  std::optional<Mask> mask;
  for (const auto* p : caus) {
    const Mask& c = t.closures.at(p->name);
    if (!mask) {
      mask = c;
      continue;
    }
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) (*mask)[j][i] = (*mask)[j][i] && c[j][i];
    }
  }

  std::vector<Permutation> gens;
  OutputAction action = OutputAction::Same;
  for (const auto* p : syms) {
    const auto& g = std::get<SymmetryGroup>(p->payload);
    if (!gens.empty() && g.output_action != action) {
      throw Error(ErrorCode::UnsupportedPair, "symmetry primitives mix same and invariant output actions");
    }
    gens.insert(gens.end(), g.generators.begin(), g.generators.end());
    action = g.output_action;
  }
  if (syms.size() > 1) {
    try {
      (void)enumerate_group(gens, n, t.group_cap);
    } catch (const Error& e) {
      throw Error(ErrorCode::UnsupportedPair, std::string("joint symmetry group: ") + e.what());
    }
  }
  if (mask && !syms.empty()) {
    if (action == OutputAction::Invariant) {
      throw Error(ErrorCode::UnsupportedPair, "an invariant output action cannot be merged with a causal mask");
    }
    for (const auto& g : gens) {
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          if ((*mask)[g[j]][g[i]] != (*mask)[j][i]) {
            throw Error(ErrorCode::UnsupportedPair, "the joint symmetry group does not preserve the joint ancestor relation");
          }
        }
      }
    }
  }

  std::optional<ProjectionPlan> proj;
  if (!cons.empty()) {
    ConservationRows rows;
    for (const auto* p : cons) append_rows(rows, p->name, std::get<ConservationLaw>(p->payload), spec.signature);
    ProjectionPlan plan{projection_from_rows(rows, mask), {}};
    for (const auto* p : cons) plan.prov.push_back({p->name, rules::kConsProjection});
    if (!syms.empty()) probe_sym_projection(gens, action, plan.node, mask.has_value());
    proj = std::move(plan);
  }

  const CorePlan core = (syms.empty() && !mask) ? free_core(n, m, cfg) : structured_core(n, m, cfg, syms, ordered, mask);
  ArchGraph g = build_graph(n, m, core, proj);
  if (const auto issues = validate_graph(g); !issues.empty()) {
    throw Error(ErrorCode::InvalidGraph, "synthesised graph is invalid: " + issues.front().detail);
  }
  return g;
}

LayerNode rule_sym(const SymmetryGroup& g, int width_in, int width_out) {
  const int n = g.degree;
  if (n < 1 || width_in < n || width_in % n != 0) {
    throw Error(ErrorCode::DimensionMismatch, "width_in must be a positive multiple of the group degree");
  }
  for (const auto& p : g.generators) {
    if (!is_bijection(p, n)) throw Error(ErrorCode::NonBijectiveGenerator, "generator is not a permutation");
  }
  LayerPlan plan;
  plan.kind = NodeKind::SharedLinear;
  const int cin = width_in / n;
  if (g.output_action == OutputAction::Invariant) {
    if (width_out < 1) throw Error(ErrorCode::DimensionMismatch, "width_out must be positive");
    plan.pattern = readout_pattern(point_orbits(g.generators, n), n, cin, width_out);
    plan.bias = iota_vector(width_out);
  } else {
    if (width_out < n || width_out % n != 0) {
      throw Error(ErrorCode::DimensionMismatch, "width_out must be a positive multiple of the group degree");
    }
    plan.pattern = equivariant_pattern(pair_orbits(g.generators, n), n, cin, width_out / n);
    plan.bias = equivariant_bias(point_orbits(g.generators, n), n, width_out / n);
  }
  plan.rows = width_out;
  plan.cols = width_in;
  int slot = 0;
  return materialize(plan, 0, slot);
}

LayerNode rule_cons(const ConservationLaw& c, const Signature& sig) {
  ConservationRows rows;
  append_rows(rows, "cons", c, sig);
  if (numerical_rank(rows.matrix) != static_cast<int>(rows.rows())) {
    throw Error(ErrorCode::RankDeficientConservation, "conservation matrix is not full row rank");
  }
  return LayerNode{0, sig.output_dim, sig.output_dim, {}, projection_from_rows(rows, std::nullopt)};
}

ArchGraph rule_caus(const CausalGraph& dag, const SynthConfig& cfg) {
  validate_config(cfg);
  if (!topological_order(dag)) throw Error(ErrorCode::CycleInCausalGraph, "causal graph contains a directed cycle");
  Primitive p{"caus", PrimitiveKind::Caus, dag};
  return build_graph(dag.num_vars, dag.num_vars, structured_core(dag.num_vars, dag.num_vars, cfg, {}, {&p}, ancestor_closure(dag)),
                     std::nullopt);
}

ArchGraph rule_diff(const DiffConstraint&, const SynthConfig& cfg) {
  validate_config(cfg);
  CorePlan core;
  core.curl_features = cfg.hidden_width;
  core.curl_prov.push_back({"diff", rules::kDiffCurl});
  return build_graph(2, 2, core, std::nullopt);
}

ArchGraph identity_graph(int dim) {
  ArchGraph g;
  g.input_dim = dim;
  g.output_dim = dim;
  g.loss = default_loss();
  g.nodes.push_back({0, dim, dim, {}, InputNode{}});
  g.nodes.push_back({1, dim, dim, {}, OutputNode{}});
  g.edges.push_back({0, 1, 0});
  return g;
}

ArchGraph compose(const ArchGraph& ga, const ArchGraph& gb, const std::vector<CompatibilityWitness>& witnesses) {
  if (ga.input_dim != gb.input_dim || ga.output_dim != gb.output_dim) {
    throw Error(ErrorCode::DimensionMismatch, "composed graphs must share input and output dimensions");
  }
  const Decomposed a = decompose(ga);
  const Decomposed b = decompose(gb);
  const auto ra = constrained_primitives(a);
  const auto rb = constrained_primitives(b);

  for (const auto& [na, role_a] : ra) {
    for (const auto& [nb, role_b] : rb) {
      if (na == nb) continue;
      if ((role_a == Role::Diff) != (role_b == Role::Diff)) {
        throw Error(ErrorCode::UnsupportedPair, pair_name(na, nb) + ": a divergence-free head composes only with other divergence-free primitives");
      }
      if (!needs_witness(role_a, role_b)) continue;
      const bool found = std::any_of(witnesses.begin(), witnesses.end(), [&](const CompatibilityWitness& w) {
        return (w.pair.first == na && w.pair.second == nb) || (w.pair.first == nb && w.pair.second == na);
      });
      if (!found) throw Error(ErrorCode::MissingWitness, "no compatibility witness for " + pair_name(na, nb));
    }
  }
  auto has_diff = [](const std::map<std::string, Role>& r) {
    return std::any_of(r.begin(), r.end(), [](const auto& kv) { return kv.second == Role::Diff; });
  };
  if ((a.core.curl_features > 0 && b.proj) || (b.core.curl_features > 0 && a.proj) ||
      (has_diff(ra) && (is_structured(b.core) && b.core.curl_features == 0)) ||
      (has_diff(rb) && (is_structured(a.core) && a.core.curl_features == 0))) {
    throw Error(ErrorCode::UnsupportedPair, "a divergence-free head composes only with other divergence-free primitives");
  }

  CorePlan core;
  const bool sa = is_structured(a.core);
  const bool sb = is_structured(b.core);
  if (sa && sb) {
    if (a.core.curl_features > 0 || b.core.curl_features > 0) {
      if (a.core.curl_features != b.core.curl_features) {
        throw Error(ErrorCode::UnsupportedPair, "curl heads differ in feature count");
      }
      core = a.core;
      core.curl_prov = merge_prov(a.core.curl_prov, b.core.curl_prov);
    } else {
      if (a.core.layers.size() != b.core.layers.size()) {
        throw Error(ErrorCode::UnsupportedPair, "structured cores differ in depth; compile both with the same configuration");
      }
      if (a.core.nonlinearity != b.core.nonlinearity) {
        throw Error(ErrorCode::UnsupportedPair, "structured cores use different nonlinearities");
      }
      core.nonlinearity = a.core.nonlinearity;
      for (std::size_t l = 0; l < a.core.layers.size(); ++l) core.layers.push_back(merge_layers(a.core.layers[l], b.core.layers[l]));
    }
  } else if (sb || (!sa && a.core.empty())) {
    core = b.core;
  } else {
    core = a.core;
  }

  std::optional<ProjectionPlan> proj;
  if (a.proj || b.proj) {
    ConservationRows rows;
    std::vector<ProvenanceEntry> prov;
    for (const auto* p : {&a.proj, &b.proj}) {
      if (!*p) continue;
      const auto& node = (*p)->node;
      for (std::size_t r = 0; r < node.matrix.size(); ++r) {
        rows.matrix.push_back(node.matrix[r]);
        rows.input_matrix.push_back(node.input_matrix.empty() ? RealVector(ga.input_dim, 0.0) : node.input_matrix[r]);
        rows.offset.push_back(node.offset[r]);
        rows.sources.push_back(node.row_sources[r]);
      }
      prov = merge_prov(prov, (*p)->prov);
    }
    std::optional<Mask> mask;
    if (has_rule(core, rules::kCausMasked)) mask = mask_from_core(core, ga.output_dim);
    proj = ProjectionPlan{projection_from_rows(rows, mask), std::move(prov)};
  }
  ArchGraph g = build_graph(ga.input_dim, ga.output_dim, core, proj);
  if (const auto issues = validate_graph(g); !issues.empty()) {
    throw Error(ErrorCode::InvalidGraph, "composed graph is invalid: " + issues.front().detail);
  }
  return g;
}

std::size_t slot_count(const LayerNode& n) {
  std::size_t total = 0;
  for (const auto& s : n.params) {
    std::size_t k = 1;
    for (int d : s.shape) k *= static_cast<std::size_t>(d);
    total += k;
  }
  return total;
}

}  // namespace theoryc
