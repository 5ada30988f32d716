#include "theoryc/certify.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <json.hpp>
#include <limits>
#include <set>
#include <thread>

#include "theoryc/error.hpp"
#include "theoryc/group.hpp"
#include "theoryc/interp.hpp"
#include "theoryc/rng.hpp"

namespace theoryc {

std::string_view to_string(ClaimKind kind) {
  switch (kind) {
    case ClaimKind::SymbolicRule: return "SymbolicRule";
    case ClaimKind::NumericResidual: return "NumericResidual";
    case ClaimKind::CompletenessDim: return "CompletenessDim";
    case ClaimKind::Functoriality: return "Functoriality";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Claim make_claim(std::string primitive, ClaimKind kind) {
  Claim c;
  c.primitive = std::move(primitive);
  c.kind = kind;
  return c;
}

std::string_view rule_prefix(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Sym: return "sym.";
    case PrimitiveKind::Cons: return "cons.";
    case PrimitiveKind::Caus: return "caus.";
    case PrimitiveKind::Diff: return "diff.";
  }
  return "";
}

void check_provenance(const ArchGraph& g, const TypedTheory& t) {
  const auto& sig = t.spec.signature;
  if (g.input_dim != sig.input_dim || g.output_dim != sig.output_dim) {
    throw Error(ErrorCode::ProvenanceMismatch, "graph dimensions " + std::to_string(g.input_dim) + "->" +
                                                   std::to_string(g.output_dim) + " differ from the theory signature");
  }
  std::set<std::string> seen;
  for (const auto& [id, entries] : g.provenance) {
    for (const auto& e : entries) {
      if (e.primitive.empty()) continue;
      const Primitive* p = t.spec.find(e.primitive);
      if (!p) throw Error(ErrorCode::ProvenanceMismatch, "graph node " + std::to_string(id) + " cites unknown primitive '" + e.primitive + "'");
      if (!e.rule.starts_with(rule_prefix(p->kind))) {
        throw Error(ErrorCode::ProvenanceMismatch, "rule '" + e.rule + "' does not belong to primitive '" + e.primitive + "'");
      }
      seen.insert(e.primitive);
    }
  }
  for (const auto& p : t.spec.primitives) {
    if (!seen.contains(p.name)) throw Error(ErrorCode::ProvenanceMismatch, "primitive '" + p.name + "' has no node in the graph");
  }
}

int output_producer(const ArchGraph& g) {
  for (const auto& n : g.nodes) {
    if (n.kind() == NodeKind::Output) {
      const auto prods = g.producers(n.id);
      return prods.size() == 1 ? prods[0] : -1;
    }
  }
  return -1;
}

int input_node(const ArchGraph& g) {
  for (const auto& n : g.nodes) {
    if (n.kind() == NodeKind::Input) return n.id;
  }
  return -1;
}

// Structural class id of every weight entry: -1 for a structural zero.
std::vector<std::vector<int>> entry_classes(const LayerNode& n) {
  std::vector<std::vector<int>> p(n.width_out, std::vector<int>(n.width_in));
  for (int r = 0; r < n.width_out; ++r) {
    for (int c = 0; c < n.width_in; ++c) p[r][c] = r * n.width_in + c;
  }
  if (const auto* s = std::get_if<SharedLinearNode>(&n.data)) return s->pattern;
  if (const auto* m = std::get_if<MaskedDenseNode>(&n.data)) {
    for (int r = 0; r < n.width_out; ++r) {
      for (int c = 0; c < n.width_in; ++c) {
        if (!m->mask[r][c]) p[r][c] = -1;
      }
    }
  }
  return p;
}

std::vector<int> bias_classes(const LayerNode& n) {
  if (const auto* s = std::get_if<SharedLinearNode>(&n.data)) return s->bias_pattern;
  std::vector<int> b(n.width_out);
  for (int r = 0; r < n.width_out; ++r) b[r] = r;
  return b;
}

// ----- Sym: representation propagation -----

struct Rep {
  enum Type { Perm, Trivial, Broken } type = Broken;
  int channels = 0;
};

Rep linear_rep(const LayerNode& n, Rep in, const std::vector<Permutation>& gens, int degree) {
  if (in.type == Rep::Broken) return {};
  if (in.type == Rep::Trivial) return {Rep::Trivial, 0};
  if (n.kind() != NodeKind::SharedLinear) {
    const bool trivial_group = std::all_of(gens.begin(), gens.end(),
                                           [&](const Permutation& g) { return g == identity_permutation(degree); });
    if (trivial_group && n.width_out % degree == 0) return {Rep::Perm, n.width_out / degree};
    return {};
  }
  const auto p = entry_classes(n);
  const auto b = bias_classes(n);
  const int cin = in.channels;
  if (n.width_in != degree * cin) return {};
  if (n.width_out % degree == 0) {
    const int cout = n.width_out / degree;
    bool ok = true;
    for (const auto& g : gens) {
      for (int j = 0; j < degree && ok; ++j) {
        for (int co = 0; co < cout && ok; ++co) {
          if (b[g[j] * cout + co] != b[j * cout + co]) ok = false;
          for (int i = 0; i < degree && ok; ++i) {
            for (int ci = 0; ci < cin && ok; ++ci) {
              if (p[g[j] * cout + co][g[i] * cin + ci] != p[j * cout + co][i * cin + ci]) ok = false;
            }
          }
        }
      }
    }
    if (ok) return {Rep::Perm, cout};
  }
  for (const auto& g : gens) {
    for (int r = 0; r < n.width_out; ++r) {
      for (int i = 0; i < degree; ++i) {
        for (int ci = 0; ci < cin; ++ci) {
          if (p[r][g[i] * cin + ci] != p[r][i * cin + ci]) return {};
        }
      }
    }
  }
  return {Rep::Trivial, 0};
}

// Worst residual of the projection identities, or inf when the ports carry
// representations the projection cannot intertwine.
Rep projection_rep(const ProjectionNode& pn, Rep yhat, bool has_skip, Rep skip, const std::vector<Permutation>& gens,
                   double& residual) {
  if (yhat.type == Rep::Broken || (has_skip && skip.type == Rep::Broken)) return {};
  const std::size_t k = pn.matrix.size();
  const bool same = yhat.type == Rep::Perm;
  if (same && yhat.channels != 1) return {};
  if (has_skip && !(skip.type == Rep::Perm && skip.channels == 1)) return {};
  if (numerical_rank(pn.matrix) != static_cast<int>(k)) return {};
  const RealMatrix pinv = right_pseudoinverse(pn.matrix);
  for (const auto& g : gens) {
    const RealMatrix lambda = same ? row_action(pn.matrix, pinv, g).lambda : identity_matrix(k);
    double worst = 0;
    if (same) {
      worst = max_abs_difference(permute_columns(pn.matrix, g), multiply(lambda, pn.matrix));
      worst = std::max(worst, max_abs_difference(permute_rows(pn.correction, g), multiply(pn.correction, lambda)));
    }
    if (has_skip) {
      worst = std::max(worst, max_abs_difference(permute_columns(pn.input_matrix, g), multiply(lambda, pn.input_matrix)));
    }
    for (std::size_t r = 0; r < k; ++r) {
      double lb = 0;
      for (std::size_t c = 0; c < k; ++c) lb += lambda[r][c] * pn.offset[c];
      worst = std::max(worst, std::abs(lb - pn.offset[r]));
    }
    residual = std::max(residual, worst);
  }
  return same ? Rep{Rep::Perm, 1} : Rep{Rep::Trivial, 0};
}

Claim sym_symbolic(const ArchGraph& g, const Primitive& prim, double tol) {
  const auto& grp = std::get<SymmetryGroup>(prim.payload);
  const auto order = g.topological_order();
  Claim c = make_claim(prim.name, ClaimKind::SymbolicRule);
  c.rule = grp.output_action == OutputAction::Same ? "sym.equivariant_linear" : "sym.equivariant_linear+sym.invariant_readout";
  c.identity = grp.output_action == OutputAction::Same
                   ? "every layer intertwines the permutation representation (P_g W = W P_g per generator); projection satisfies A P_g = L_g A, A_in P_g = L_g A_in, L_g b = b, P_g D = D L_g"
                   : "equivariant layers then a readout with W P_g = W per generator; projection satisfies A_in P_g = A_in";
  c.tolerance = tol;
  if (!order) {
    c.max_residual = kInf;
    return c;
  }
  std::map<int, Rep> rep;
  double residual = 0;
  Rep final{};
  for (int id : *order) {
    const LayerNode& n = *g.find(id);
    const auto prods = g.producers(id);
    auto in = [&](std::size_t port) { return port < prods.size() ? rep[prods[port]] : Rep{}; };
    Rep r{};
    switch (n.kind()) {
      case NodeKind::Input: r = n.width_out == grp.degree ? Rep{Rep::Perm, 1} : Rep{}; break;
      case NodeKind::Dense:
      case NodeKind::MaskedDense:
      case NodeKind::SharedLinear: r = linear_rep(n, in(0), grp.generators, grp.degree); break;
      case NodeKind::Pointwise: r = in(0); break;
      case NodeKind::Projection:
        r = projection_rep(std::get<ProjectionNode>(n.data), in(0), prods.size() > 1, in(1), grp.generators, residual);
        break;
      case NodeKind::CurlHead: r = in(0).type == Rep::Trivial ? Rep{Rep::Trivial, 0} : Rep{}; break;
      case NodeKind::Concat: {
        bool trivial = true;
        for (std::size_t p = 0; p < prods.size(); ++p) trivial = trivial && in(p).type == Rep::Trivial;
        r = trivial ? Rep{Rep::Trivial, 0} : Rep{};
        break;
      }
      case NodeKind::Output:
        r = in(0);
        final = r;
        break;
    }
    rep[id] = r;
  }
  const bool shape_ok = grp.output_action == OutputAction::Same ? (final.type == Rep::Perm && final.channels == 1)
                                                                 : final.type == Rep::Trivial;
  c.max_residual = shape_ok ? residual : kInf;
  c.passed = shape_ok && residual <= tol;
  return c;
}

// ----- Caus: structural dependency sets -----

using Bits = std::vector<std::uint64_t>;

void bits_or(Bits& a, const Bits& b) {
  for (std::size_t w = 0; w < a.size(); ++w) a[w] |= b[w];
}

Claim caus_symbolic(const ArchGraph& g, const Primitive& prim, const Mask& closure) {
  Claim c = make_claim(prim.name, ClaimKind::SymbolicRule);
  c.rule = "caus.masked_linear";
  c.identity = "structural dependency of output j on input i only where i is j or an ancestor of j";
  c.tolerance = 0;
  const std::size_t n = closure.size();
  const std::size_t words = (n + 63) / 64;
  const auto order = g.topological_order();
  if (!order || g.input_dim != static_cast<int>(n)) {
    c.max_residual = kInf;
    return c;
  }
  std::map<int, std::vector<Bits>> dep;
  std::vector<Bits> out_dep;
  for (int id : *order) {
    const LayerNode& node = *g.find(id);
    const auto prods = g.producers(id);
    std::vector<Bits> d(node.width_out, Bits(words, 0));
    switch (node.kind()) {
      case NodeKind::Input:
        for (std::size_t i = 0; i < n; ++i) d[i][i / 64] |= 1ULL << (i % 64);
        break;
      case NodeKind::Dense:
      case NodeKind::MaskedDense:
      case NodeKind::SharedLinear: {
        const auto& src = dep[prods.at(0)];
        const auto p = entry_classes(node);
        for (int r = 0; r < node.width_out; ++r) {
          for (int col = 0; col < node.width_in; ++col) {
            if (p[r][col] >= 0) bits_or(d[r], src[col]);
          }
        }
        break;
      }
      case NodeKind::Pointwise:
      case NodeKind::Output: d = dep[prods.at(0)]; break;
      case NodeKind::Projection: {
        const auto& pn = std::get<ProjectionNode>(node.data);
        const auto& yhat = dep[prods.at(0)];
        d = yhat;
        for (std::size_t r = 0; r < pn.matrix.size(); ++r) {
          Bits row(words, 0);
          for (std::size_t k = 0; k < pn.matrix[r].size(); ++k) {
            if (pn.matrix[r][k] != 0.0) bits_or(row, yhat[k]);
          }
          if (!pn.input_matrix.empty()) {
            const auto& xs = dep[prods.at(1)];
            for (std::size_t i = 0; i < pn.input_matrix[r].size(); ++i) {
              if (pn.input_matrix[r][i] != 0.0) bits_or(row, xs[i]);
            }
          }
          for (int j = 0; j < node.width_out; ++j) {
            if (pn.correction[j][r] != 0.0) bits_or(d[j], row);
          }
        }
        break;
      }
      case NodeKind::CurlHead: {
        Bits all(words, 0);
        for (const auto& b : dep[prods.at(0)]) bits_or(all, b);
        std::fill(d.begin(), d.end(), all);
        break;
      }
      case NodeKind::Concat: {
        d.clear();
        for (int p : prods) d.insert(d.end(), dep[p].begin(), dep[p].end());
        break;
      }
    }
    if (node.kind() == NodeKind::Output) out_dep = d;
    dep[id] = std::move(d);
  }
  int violations = 0;
  for (std::size_t j = 0; j < out_dep.size() && j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (((out_dep[j][i / 64] >> (i % 64)) & 1ULL) && !closure[j][i]) ++violations;
    }
  }
  c.max_residual = violations;
  c.passed = violations == 0 && out_dep.size() == n;
  return c;
}

Claim cons_symbolic(const ArchGraph& g, const Primitive& prim, const Signature& sig, double tol) {
  Claim c = make_claim(prim.name, ClaimKind::SymbolicRule);
  c.rule = "cons.projection";
  c.identity = "terminal projection carries the law's rows (A, A_in, b) and its correction satisfies A D = I";
  c.tolerance = tol;
  c.max_residual = kInf;
  const int pid = output_producer(g);
  const LayerNode* node = pid >= 0 ? g.find(pid) : nullptr;
  if (!node || node->kind() != NodeKind::Projection) return c;
  const auto& pn = std::get<ProjectionNode>(node->data);
  const auto prods = g.producers(pid);
  if (!pn.input_matrix.empty() && (prods.size() != 2 || prods[1] != input_node(g))) return c;

  ConservationRows law;
  append_rows(law, prim.name, std::get<ConservationLaw>(prim.payload), sig);
  std::size_t next = 0;
  for (std::size_t r = 0; r < pn.matrix.size(); ++r) {
    if (pn.row_sources[r] != prim.name) continue;
    if (next >= law.rows()) return c;
    if (pn.matrix[r] != law.matrix[next] || pn.offset[r] != law.offset[next]) return c;
    const RealVector zero(static_cast<std::size_t>(sig.input_dim), 0.0);
    const RealVector& in_row = pn.input_matrix.empty() ? zero : pn.input_matrix[r];
    if (in_row != law.input_matrix[next]) return c;
    ++next;
  }
  if (next != law.rows()) return c;
  c.max_residual = max_abs_difference(multiply(pn.matrix, pn.correction), identity_matrix(pn.matrix.size()));
  c.passed = c.max_residual <= tol;
  return c;
}

Claim diff_symbolic(const ArchGraph& g, const Primitive& prim) {
  Claim c = make_claim(prim.name, ClaimKind::SymbolicRule);
  c.rule = "diff.curl_head";
  c.identity = "output is (d psi/dy, -d psi/dx) of a closed-form stream function, so its divergence vanishes identically";
  c.tolerance = 0;
  const int pid = output_producer(g);
  const LayerNode* node = pid >= 0 ? g.find(pid) : nullptr;
  const bool ok = node && node->kind() == NodeKind::CurlHead && g.producers(pid) == std::vector<int>{input_node(g)};
  c.max_residual = ok ? 0.0 : kInf;
  c.passed = ok;
  return c;
}

// ----- sampled residuals -----

struct NumericPlan {
  const Primitive* prim = nullptr;
  std::vector<Permutation> gens;
  const std::vector<Permutation>* table = nullptr;
  OutputAction action = OutputAction::Same;
  ConservationRows rows;
  const Mask* closure = nullptr;
};

struct SampleMaxima {
  std::vector<double> worst;
  std::exception_ptr error;
};

void run_samples(const ArchGraph& g, const std::vector<NumericPlan>& plans, const CertifyOptions& o, int p_begin,
                 int p_end, SampleMaxima& out) {
  const int n = g.input_dim;
  const double h = o.fd_step;
  std::vector<int> fd_columns;
  for (int i = 0; i < n; ++i) {
    for (const auto& pl : plans) {
      if (!pl.closure) continue;
      bool forbidden = false;
      for (int j = 0; j < n; ++j) forbidden = forbidden || !(*pl.closure)[j][i];
      if (forbidden) {
        fd_columns.push_back(i);
        break;
      }
    }
  }
  try {
    for (int p = p_begin; p < p_end; ++p) {
      const auto pidx = static_cast<std::uint64_t>(p);
      const Evaluator ev(g, init_params(g, derive_seed(o.seed, 2 * pidx)));
      const CounterRng rng(derive_seed(o.seed, 2 * pidx + 1));
      for (int q = 0; q < o.n_inputs; ++q) {
        const auto qidx = static_cast<std::uint64_t>(q);
        std::vector<double> x(n);
        for (int i = 0; i < n; ++i) x[i] = rng.normal(qidx, static_cast<std::uint64_t>(i));
        const auto fx = ev(x);
        std::map<int, std::vector<double>> jac_cols;
        for (int i : fd_columns) {
          auto xp = x;
          xp[i] += h;
          const auto fp = ev(xp);
          xp[i] = x[i] - h;
          const auto fm = ev(xp);
          std::vector<double> col(fx.size());
          for (std::size_t j = 0; j < fx.size(); ++j) col[j] = (fp[j] - fm[j]) / (2 * h);
          jac_cols[i] = std::move(col);
        }
        for (std::size_t k = 0; k < plans.size(); ++k) {
          const auto& pl = plans[k];
          double r = 0;
          switch (pl.prim->kind) {
            case PrimitiveKind::Sym: {
              const std::uint64_t flat = pidx * static_cast<std::uint64_t>(o.n_inputs) + qidx;
              const Permutation& gp = flat < pl.gens.size()
                                          ? pl.gens[flat]
                                          : (*pl.table)[rng.bits(qidx, (1ULL << 32) + k) % pl.table->size()];
              std::vector<double> gx(n);
              for (int i = 0; i < n; ++i) gx[gp[i]] = x[i];
              const auto fgx = ev(gx);
              for (std::size_t j = 0; j < fx.size(); ++j) {
                const double lhs = pl.action == OutputAction::Same ? fgx[gp[j]] : fgx[j];
                r = std::max(r, std::abs(lhs - fx[j]));
              }
              break;
            }
            case PrimitiveKind::Cons:
              for (std::size_t row = 0; row < pl.rows.rows(); ++row) {
                double t = pl.rows.offset[row];
                for (int i = 0; i < n; ++i) t += pl.rows.input_matrix[row][i] * x[i];
                double af = 0;
                for (std::size_t j = 0; j < fx.size(); ++j) af += pl.rows.matrix[row][j] * fx[j];
                r = std::max(r, std::abs(af - t));
              }
              break;
            case PrimitiveKind::Caus:
              for (const auto& [i, col] : jac_cols) {
                for (std::size_t j = 0; j < col.size(); ++j) {
                  if (!(*pl.closure)[j][i]) r = std::max(r, std::abs(col[j]));
                }
              }
              break;
            case PrimitiveKind::Diff: {
              double div = 0;
              for (int i = 0; i < 2; ++i) {
                auto xp = x;
                xp[i] += h;
                const double fp = ev(xp)[i];
                xp[i] = x[i] - h;
                const double fm = ev(xp)[i];
                div += (fp - fm) / (2 * h);
              }
              r = std::abs(div);
              break;
            }
          }
          out.worst[k] = std::max(out.worst[k], std::isnan(r) ? kInf : r);
        }
      }
    }
  } catch (...) {
    out.error = std::current_exception();
  }
}

std::string numeric_identity(const Primitive& p) {
  switch (p.kind) {
    case PrimitiveKind::Sym:
      return std::get<SymmetryGroup>(p.payload).output_action == OutputAction::Same ? "max |f(g.x) - g.f(x)|"
                                                                                     : "max |f(g.x) - f(x)|";
    case PrimitiveKind::Cons: return "max |A f(x) - (A_in x + b)|";
    case PrimitiveKind::Caus: return "max |J_fd[j][i]| over pairs with i not an ancestor of j";
    case PrimitiveKind::Diff: return "max |du/dx + dv/dy| by central differences";
  }
  return "";
}

nlohmann::ordered_json number_or_inf(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

// Rank of the stacked system W[g^-1(a)][b] - W[a][g(b)] = 0 over generators.
int commutant_rank(const std::vector<Permutation>& gens, int n) {
  const int nn = n * n;
  RealMatrix sys;
  for (const auto& g : gens) {
    const Permutation ginv = inverse(g);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        RealVector row(nn, 0.0);
        row[ginv[a] * n + b] += 1.0;
        row[a * n + g[b]] -= 1.0;
        sys.push_back(std::move(row));
      }
    }
  }
  if (sys.empty()) return 0;
  return numerical_rank(sys, kRankTolerance);
}

}  // namespace

Certificate certify_soundness(const ArchGraph& g, const TypedTheory& t, const CertifyOptions& o) {
  if (o.n_params < 0 || o.n_inputs < 0 || !(o.tol_exact >= 0) || !(o.tol_fd >= 0) || !(o.fd_step > 0)) {
    throw Error(ErrorCode::InvalidSignature, "sample counts must be non-negative and tolerances valid");
  }
  check_provenance(g, t);
  Certificate cert;
  cert.theory = t.spec.name;
  cert.archir_sha256 = sha256_hex(serialize_archir(g));
  cert.options = o;

  std::vector<NumericPlan> plans;
  for (const auto& p : t.spec.primitives) {
    NumericPlan pl;
    pl.prim = &p;
    switch (p.kind) {
      case PrimitiveKind::Sym: {
        const auto& grp = std::get<SymmetryGroup>(p.payload);
        cert.claims.push_back(sym_symbolic(g, p, o.tol_exact));
        pl.gens = grp.generators;
        pl.table = &t.group_tables.at(p.name);
        pl.action = grp.output_action;
        break;
      }
      case PrimitiveKind::Cons:
        cert.claims.push_back(cons_symbolic(g, p, t.spec.signature, o.tol_exact));
        append_rows(pl.rows, p.name, std::get<ConservationLaw>(p.payload), t.spec.signature);
        break;
      case PrimitiveKind::Caus:
        pl.closure = &t.closures.at(p.name);
        cert.claims.push_back(caus_symbolic(g, p, *pl.closure));
        break;
      case PrimitiveKind::Diff: cert.claims.push_back(diff_symbolic(g, p)); break;
    }
    plans.push_back(std::move(pl));
  }

  if (!plans.empty() && o.n_params > 0 && o.n_inputs > 0) {
    unsigned workers = o.threads ? o.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(o.n_params));
    std::vector<SampleMaxima> parts(workers, SampleMaxima{std::vector<double>(plans.size(), 0.0), nullptr});
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      const int begin = static_cast<int>(static_cast<long long>(o.n_params) * w / workers);
      const int end = static_cast<int>(static_cast<long long>(o.n_params) * (w + 1) / workers);
      if (workers == 1) {
        run_samples(g, plans, o, begin, end, parts[w]);
      } else {
        pool.emplace_back(run_samples, std::cref(g), std::cref(plans), std::cref(o), begin, end, std::ref(parts[w]));
      }
    }
    for (auto& th : pool) th.join();
    for (const auto& part : parts) {
      if (part.error) std::rethrow_exception(part.error);
    }
    const std::size_t samples = static_cast<std::size_t>(o.n_params) * static_cast<std::size_t>(o.n_inputs);
    std::vector<Claim> numeric;
    for (std::size_t k = 0; k < plans.size(); ++k) {
      Claim c = make_claim(plans[k].prim->name, ClaimKind::NumericResidual);
      c.identity = numeric_identity(*plans[k].prim);
      c.samples = samples;
      const bool fd = plans[k].prim->kind == PrimitiveKind::Caus || plans[k].prim->kind == PrimitiveKind::Diff;
      c.tolerance = fd ? o.tol_fd : o.tol_exact;
      for (const auto& part : parts) c.max_residual = std::max(c.max_residual, part.worst[k]);
      c.passed = c.max_residual <= c.tolerance;
      numeric.push_back(std::move(c));
    }
    // Interleave so each primitive's symbolic claim is followed by its numeric one.
    std::vector<Claim> merged;
    for (std::size_t k = 0; k < numeric.size(); ++k) {
      merged.push_back(cert.claims[k]);
      merged.push_back(numeric[k]);
    }
    cert.claims = std::move(merged);
  }

  for (const auto& p : t.spec.primitives) {
    if (p.kind == PrimitiveKind::Sym) {
      Claim c = certify_completeness_linear(std::get<SymmetryGroup>(p.payload), t.group_cap);
      c.primitive = p.name;
      cert.claims.push_back(std::move(c));
    } else {
      cert.notes.push_back("completeness unverified for " + p.name + " (" + std::string(to_string(p.kind)) +
                           "): only linear equivariant layers carry a completeness certificate");
    }
  }
  cert.pass = std::all_of(cert.claims.begin(), cert.claims.end(), [](const Claim& c) { return c.passed; });
  return cert;
}

std::string certificate_json(const Certificate& c) {
  using ojson = nlohmann::ordered_json;
  ojson doc;
  doc["certificate_version"] = kCertificateVersion;
  doc["theory"] = c.theory;
  doc["archir_sha256"] = c.archir_sha256;
  ojson claims = ojson::array();
  for (const auto& cl : c.claims) {
    ojson j;
    j["primitive"] = cl.primitive;
    j["kind"] = std::string(to_string(cl.kind));
    if (!cl.rule.empty()) j["rule"] = cl.rule;
    j["identity"] = cl.identity;
    j["samples"] = cl.samples;
    j["max_residual"] = number_or_inf(cl.max_residual);
    j["tolerance"] = cl.tolerance;
    if (cl.kind == ClaimKind::CompletenessDim) {
      j["orbit_count"] = cl.orbit_count;
      j["commutant_dim"] = cl.commutant_dim;
    }
    j["passed"] = cl.passed;
    claims.push_back(std::move(j));
  }
  doc["claims"] = std::move(claims);
  doc["notes"] = c.notes;
  doc["verdict"] = c.pass ? "pass" : "fail";
  doc["seed"] = c.options.seed;
  doc["tool_version"] = kToolVersion;
  doc["sample_counts"] = {{"parameter_draws", c.options.n_params}, {"inputs_per_draw", c.options.n_inputs}};
  doc["tolerances"] = {{"exact", c.options.tol_exact}, {"finite_difference", c.options.tol_fd}, {"fd_step", c.options.fd_step}};
  doc["statement"] =
      "NumericResidual claims are sampled over parameter draws and standard-normal inputs; the universal statement "
      "rests on the SymbolicRule claims";
  return doc.dump(2) + "\n";
}

Claim certify_completeness_linear(const SymmetryGroup& group, std::size_t cap) {
  const int n = group.degree;
  if (n < 1 || n > 32) throw Error(ErrorCode::DimensionMismatch, "completeness check supports degree 1..32");
  (void)enumerate_group(group.generators, n, cap);
  Claim c = make_claim("", ClaimKind::CompletenessDim);
  c.identity = "parameter slots of the equivariant layer = dim {W : P_g W = W P_g for all g}";
  c.orbit_count = count_distinct(pair_orbits(group.generators, n));
  c.commutant_dim = n * n - commutant_rank(group.generators, n);
  c.max_residual = std::abs(c.orbit_count - c.commutant_dim);
  c.tolerance = 0;
  c.passed = c.orbit_count == c.commutant_dim;
  return c;
}

TheorySpec conjoin(const TheorySpec& t1, const TheorySpec& t2) {
  if (t1.signature.input_dim != t2.signature.input_dim || t1.signature.output_dim != t2.signature.output_dim) {
    throw Error(ErrorCode::DimensionMismatch, "theories " + t1.name + " and " + t2.name + " have different signatures");
  }
  TheorySpec out;
  out.name = t1.name + "_and_" + t2.name;
  out.signature = t1.signature;
  out.primitives = t1.primitives;
  out.relations = t1.relations;
  for (const auto& p : t2.primitives) {
    if (t1.find(p.name)) throw Error(ErrorCode::DuplicateName, "primitive '" + p.name + "' appears in both theories");
    out.primitives.push_back(p);
  }
  out.relations.insert(out.relations.end(), t2.relations.begin(), t2.relations.end());
  return out;
}

namespace {

TypedTheory must_check(const TheorySpec& spec, std::size_t cap) {
  auto r = check_wellformed(spec, CheckOptions{cap});
  if (!r.ok()) {
    const auto& d = r.diagnostics.front();
    throw Error(d.code, (d.primitive.empty() ? "" : d.primitive + ": ") + d.detail);
  }
  return std::move(*r.typed);
}

bool same_provenance(const ArchGraph& a, int ida, const ArchGraph& b, int idb) {
  auto names = [](const ArchGraph& g, int id) {
    std::set<std::pair<std::string, std::string>> s;
    if (auto it = g.provenance.find(id); it != g.provenance.end()) {
      for (const auto& e : it->second) s.insert({e.primitive, e.rule});
    }
    return s;
  };
  return names(a, ida) == names(b, idb);
}

// Class map from `to`'s partition onto `from`'s; nullopt unless the two
// partitions coincide.
std::optional<std::vector<int>> class_map(const std::vector<int>& from, const std::vector<int>& to, int to_classes) {
  if (from.size() != to.size()) return std::nullopt;
  std::vector<int> fwd(to_classes, -1);
  std::map<int, int> back;
  for (std::size_t e = 0; e < from.size(); ++e) {
    if ((from[e] < 0) != (to[e] < 0)) return std::nullopt;
    if (to[e] < 0) continue;
    if (fwd[to[e]] < 0) fwd[to[e]] = from[e];
    if (fwd[to[e]] != from[e]) return std::nullopt;
    auto [it, fresh] = back.try_emplace(from[e], to[e]);
    if (it->second != to[e]) return std::nullopt;
  }
  return fwd;
}

std::vector<int> flat(const std::vector<std::vector<int>>& p) {
  std::vector<int> out;
  for (const auto& row : p) out.insert(out.end(), row.begin(), row.end());
  return out;
}

std::optional<ParamSet> transport(const ArchGraph& from, const ParamSet& theta, const ArchGraph& to) {
  ParamSet out;
  for (std::size_t k = 0; k < to.nodes.size(); ++k) {
    const LayerNode& a = from.nodes[k];
    const LayerNode& b = to.nodes[k];
    if (b.params.empty()) continue;
    if (a.kind() == NodeKind::SharedLinear) {
      const auto ma = class_map(flat(entry_classes(a)), flat(entry_classes(b)), b.params[0].shape[0]);
      const auto mb = class_map(bias_classes(a), bias_classes(b), b.params[1].shape[0]);
      if (!ma || !mb) return std::nullopt;
      for (int s = 0; s < 2; ++s) {
        const auto& map = s == 0 ? *ma : *mb;
        const Tensor& src = theta.at(a.params[s].id);
        Tensor t{b.params[s].shape, std::vector<double>(map.size())};
        for (std::size_t c = 0; c < map.size(); ++c) t.data[c] = src.data[map[c]];
        out[b.params[s].id] = std::move(t);
      }
      continue;
    }
    if (a.kind() == NodeKind::MaskedDense &&
        std::get<MaskedDenseNode>(a.data).mask != std::get<MaskedDenseNode>(b.data).mask) {
      return std::nullopt;
    }
    for (std::size_t s = 0; s < b.params.size(); ++s) {
      if (a.params[s].shape != b.params[s].shape) return std::nullopt;
      out[b.params[s].id] = theta.at(a.params[s].id);
    }
  }
  return out;
}

}  // namespace

Claim check_functoriality(const TypedTheory& t1, const TypedTheory& t2, const SynthConfig& cfg, int n_samples,
                          std::uint64_t seed) {
  TheorySpec base = conjoin(t1.spec, t2.spec);
  const TypedTheory base_typed = must_check(base, t1.group_cap);
  std::vector<CompatibilityWitness> witnesses;
  for (const auto& a : t1.spec.primitives) {
    for (const auto& b : t2.spec.primitives) {
      try {
        witnesses.push_back(check_compatibility(a, b, base_typed));
      } catch (const Error& e) {
        if (a.kind != b.kind) throw Error(ErrorCode::MissingWitness, "no witness for (" + a.name + ", " + b.name + "): " + e.what());
        throw;
      }
      base.relations.push_back({RelationKind::Compatible, {a.name, b.name}});
    }
  }
  const TypedTheory conj = must_check(base, t1.group_cap);
  const ArchGraph gc = compile(conj, cfg);
  const ArchGraph gk = compose(compile(t1, cfg), compile(t2, cfg), witnesses);

  if (gc.nodes.size() != gk.nodes.size()) {
    throw Error(ErrorCode::ProvenanceMismatch, "conjunction and composition have different node counts");
  }
  for (std::size_t k = 0; k < gc.nodes.size(); ++k) {
    const auto& a = gc.nodes[k];
    const auto& b = gk.nodes[k];
    if (a.kind() != b.kind() || a.width_in != b.width_in || a.width_out != b.width_out || a.params.size() != b.params.size() ||
        !same_provenance(gc, a.id, gk, b.id)) {
      throw Error(ErrorCode::ProvenanceMismatch, "node " + std::to_string(k) + " differs between conjunction and composition");
    }
  }

  Claim c = make_claim(t1.spec.name + " x " + t2.spec.name, ClaimKind::Functoriality);
  c.identity = "compile(T1 and T2)(x) = (compile(T1) (x) compile(T2))(x) after parameter transport";
  c.samples = static_cast<std::size_t>(std::max(0, n_samples));
  c.tolerance = kFunctorialityTolerance;
  const CounterRng xr(derive_seed(seed, ~0ULL));
  for (int s = 0; s < n_samples; ++s) {
    const ParamSet theta = init_params(gc, derive_seed(seed, static_cast<std::uint64_t>(s)));
    const auto moved = transport(gc, theta, gk);
    if (!moved) {
      c.max_residual = kInf;
      break;
    }
    std::vector<double> x(gc.input_dim);
    for (int i = 0; i < gc.input_dim; ++i) x[i] = xr.normal(static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(i));
    const auto ya = Evaluator(gc, theta)(x);
    const auto yb = Evaluator(gk, *moved)(x);
    for (std::size_t j = 0; j < ya.size(); ++j) c.max_residual = std::max(c.max_residual, std::abs(ya[j] - yb[j]));
  }
  c.passed = c.max_residual <= c.tolerance;
  return c;
}

}  // namespace theoryc
