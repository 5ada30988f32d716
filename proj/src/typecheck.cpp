#include "theoryc/typecheck.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

namespace theoryc {

namespace {

using Outcome = std::variant<CompatibilityWitness, Diagnostic>;

std::string pair_label(const Primitive& a, const Primitive& b) { return a.name + "," + b.name; }

Diagnostic make_diag(ErrorCode code, std::string primitive, std::string detail,
                     std::optional<double> residual = std::nullopt) {
  return Diagnostic{code, std::move(primitive), std::move(detail), residual};
}

int kind_rank(PrimitiveKind k) { return static_cast<int>(k); }

const std::vector<Permutation>& group_table(const Primitive& p, const TypedTheory& typed,
                                            std::vector<Permutation>& scratch) {
  if (auto it = typed.group_tables.find(p.name); it != typed.group_tables.end()) return it->second;
  const auto& g = std::get<SymmetryGroup>(p.payload);
  scratch = enumerate_group(g.generators, g.degree, typed.group_cap);
  return scratch;
}

Mask closure_of(const Primitive& p, const TypedTheory& typed) {
  if (auto it = typed.closures.find(p.name); it != typed.closures.end()) return it->second;
  return ancestor_closure(std::get<CausalGraph>(p.payload));
}

std::vector<int> topo_of(const Primitive& p, const TypedTheory& typed) {
  if (auto it = typed.topo_orders.find(p.name); it != typed.topo_orders.end()) return it->second;
  return topological_order(std::get<CausalGraph>(p.payload)).value_or(std::vector<int>{});
}

// Residual of the (Sym, Cons) identities for one element with a given Lambda.
double sym_cons_residual(const ConservationRows& rows, const RealMatrix& lambda, const Permutation& g,
                         OutputAction action) {
  double worst = 0;
  if (action == OutputAction::Same) {
    worst = max_abs_difference(permute_columns(rows.matrix, g), multiply(lambda, rows.matrix));
  }
  worst = std::max(worst, max_abs_difference(permute_columns(rows.input_matrix, g), multiply(lambda, rows.input_matrix)));
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    double lb = 0;
    for (std::size_t c = 0; c < rows.rows(); ++c) lb += lambda[r][c] * rows.offset[c];
    worst = std::max(worst, std::abs(lb - rows.offset[r]));
  }
  return worst;
}

Outcome sym_cons(const Primitive& sym, const Primitive& cons, const TypedTheory& typed) {
  const auto& group = std::get<SymmetryGroup>(sym.payload);
  ConservationRows rows;
  append_rows(rows, cons.name, std::get<ConservationLaw>(cons.payload), typed.spec.signature);
  std::vector<Permutation> scratch;
  const auto& table = group_table(sym, typed, scratch);

  SymConsEvidence ev;
  double worst = 0;
  const RealMatrix pinv = right_pseudoinverse(rows.matrix);
  const RealMatrix ident = identity_matrix(rows.rows());
  for (std::size_t e = 0; e < table.size(); ++e) {
    RealMatrix lambda = group.output_action == OutputAction::Same ? row_action(rows.matrix, pinv, table[e]).lambda : ident;
    const double residual = sym_cons_residual(rows, lambda, table[e], group.output_action);
    worst = std::max(worst, residual);
    if (!(residual <= kWitnessTolerance)) {
      return make_diag(ErrorCode::IncompatiblePrimitives, pair_label(sym, cons),
                       "group element " + std::to_string(e) +
                           " admits no row action Lambda_g with A P_g = Lambda_g A (and matching target)",
                       residual);
    }
    ev.lambdas.push_back(std::move(lambda));
  }
  return CompatibilityWitness{{}, std::move(ev), worst};
}

Outcome sym_caus(const Primitive& sym, const Primitive& caus, const TypedTheory& typed) {
  const auto& group = std::get<SymmetryGroup>(sym.payload);
  if (group.output_action != OutputAction::Same) {
    return make_diag(ErrorCode::UnsupportedPair, pair_label(sym, caus),
                     "an invariant output action cannot be merged with a causal mask");
  }
  std::vector<Permutation> scratch;
  const auto& table = group_table(sym, typed, scratch);
  const Mask m = closure_of(caus, typed);
  const std::size_t n = m.size();
  for (std::size_t e = 0; e < table.size(); ++e) {
    int mismatches = 0;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        if (m[table[e][j]][table[e][i]] != m[j][i]) ++mismatches;
      }
    }
    if (mismatches) {
      return make_diag(ErrorCode::IncompatiblePrimitives, pair_label(sym, caus),
                       "group element " + std::to_string(e) + " does not preserve the ancestor relation",
                       static_cast<double>(mismatches));
    }
  }
  return CompatibilityWitness{{}, SymCausEvidence{table.size()}, 0.0};
}

Outcome cons_caus(const Primitive& cons, const Primitive& caus, const TypedTheory& typed) {
  ConservationRows rows;
  append_rows(rows, cons.name, std::get<ConservationLaw>(cons.payload), typed.spec.signature);
  int failed_row = -1;
  auto corr = causal_correction(rows, closure_of(caus, typed), topo_of(caus, typed), &failed_row);
  if (!corr) {
    return make_diag(ErrorCode::IncompatiblePrimitives, pair_label(cons, caus),
                     failed_row >= 0 ? "conservation row " + std::to_string(failed_row) +
                                           " is not supported on the closed ancestor set of any node"
                                     : "absorbing nodes do not yield a mask-preserving correction");
  }
  const double residual = max_abs_difference(multiply(rows.matrix, corr->matrix), identity_matrix(rows.rows()));
  if (!(residual <= kWitnessTolerance)) {
    return make_diag(ErrorCode::IncompatiblePrimitives, pair_label(cons, caus), "correction does not satisfy A D = I",
                     residual);
  }
  return CompatibilityWitness{{}, ConsCausEvidence{corr->absorbing, corr->matrix}, residual};
}

Outcome sym_sym(const Primitive& a, const Primitive& b, const TypedTheory& typed) {
  const auto& ga = std::get<SymmetryGroup>(a.payload);
  const auto& gb = std::get<SymmetryGroup>(b.payload);
  if (ga.output_action != gb.output_action) {
    return make_diag(ErrorCode::UnsupportedPair, pair_label(a, b), "mixed output actions (same and invariant)");
  }
  auto gens = ga.generators;
  gens.insert(gens.end(), gb.generators.begin(), gb.generators.end());
  try {
    const auto joint = enumerate_group(gens, ga.degree, typed.group_cap);
    return CompatibilityWitness{{}, SymSymEvidence{joint.size()}, 0.0};
  } catch (const Error& e) {
    return make_diag(ErrorCode::IncompatiblePrimitives, pair_label(a, b), "joint group: " + e.detail());
  }
}

Outcome cons_cons(const Primitive& a, const Primitive& b, const TypedTheory& typed) {
  ConservationRows rows;
  append_rows(rows, a.name, std::get<ConservationLaw>(a.payload), typed.spec.signature);
  append_rows(rows, b.name, std::get<ConservationLaw>(b.payload), typed.spec.signature);
  const int rank = numerical_rank(rows.matrix);
  if (rank != static_cast<int>(rows.rows())) {
    return make_diag(ErrorCode::IncompatiblePrimitives, pair_label(a, b),
                     "stacked conservation rows are rank deficient (rank " + std::to_string(rank) + " of " +
                         std::to_string(rows.rows()) + ")");
  }
  return CompatibilityWitness{{}, ConsConsEvidence{rank}, 0.0};
}

Outcome compatibility(const Primitive& a, const Primitive& b, const TypedTheory& typed) {
  const bool swap = kind_rank(a.kind) > kind_rank(b.kind);
  const Primitive& lo = swap ? b : a;
  const Primitive& hi = swap ? a : b;
  Outcome out = [&]() -> Outcome {
    using K = PrimitiveKind;
    if (lo.kind == K::Sym && hi.kind == K::Sym) return sym_sym(lo, hi, typed);
    if (lo.kind == K::Sym && hi.kind == K::Cons) return sym_cons(lo, hi, typed);
    if (lo.kind == K::Sym && hi.kind == K::Caus) return sym_caus(lo, hi, typed);
    if (lo.kind == K::Cons && hi.kind == K::Cons) return cons_cons(lo, hi, typed);
    if (lo.kind == K::Cons && hi.kind == K::Caus) return cons_caus(lo, hi, typed);
    if (lo.kind == hi.kind) return CompatibilityWitness{{}, TrivialEvidence{}, 0.0};
    return make_diag(ErrorCode::UnsupportedPair, pair_label(a, b),
                     "no compatibility rule for (" + std::string(to_string(a.kind)) + ", " +
                         std::string(to_string(b.kind)) + ")");
  }();
  if (auto* w = std::get_if<CompatibilityWitness>(&out)) w->pair = {a.name, b.name};
  if (auto* d = std::get_if<Diagnostic>(&out)) d->primitive = pair_label(a, b);
  return out;
}

void check_signature(const Signature& sig, std::vector<Diagnostic>& diags) {
  auto in_range = [](int v) { return v >= 1 && v <= kMaxDimension; };
  if (!in_range(sig.input_dim) || !in_range(sig.output_dim)) {
    diags.push_back(make_diag(ErrorCode::InvalidSignature, "",
                              "input and output dimensions must lie in [1, " + std::to_string(kMaxDimension) + "]"));
  }
  if (sig.variable_names && static_cast<int>(sig.variable_names->size()) != sig.input_dim) {
    diags.push_back(make_diag(ErrorCode::InvalidSignature, "", "names list length differs from input dimension"));
  }
}

bool check_sym(const Primitive& p, const SymmetryGroup& g, const TypedTheory& t, std::vector<Diagnostic>& diags,
               std::vector<Permutation>& table) {
  const auto& sig = t.spec.signature;
  bool ok = true;
  if (g.degree < 1 || g.degree > kMaxDimension) {
    diags.push_back(make_diag(ErrorCode::DimensionMismatch, p.name, "group degree out of range"));
    return false;
  }
  if (g.degree != sig.input_dim) {
    diags.push_back(make_diag(ErrorCode::DimensionMismatch, p.name, "group degree differs from input dimension"));
    ok = false;
  }
  if (g.output_action == OutputAction::Same && sig.output_dim != g.degree) {
    diags.push_back(make_diag(ErrorCode::DimensionMismatch, p.name,
                              "output_action same requires output dimension equal to the group degree"));
    ok = false;
  }
  bool bijective = true;
  for (std::size_t k = 0; k < g.generators.size(); ++k) {
    if (!is_bijection(g.generators[k], g.degree)) {
      diags.push_back(make_diag(ErrorCode::GroupAxiomViolation, p.name,
                                "generator " + std::to_string(k) + " is not a bijection on {0.." +
                                    std::to_string(g.degree - 1) + "}"));
      bijective = false;
    }
  }
  if (!bijective) return false;
  try {
    table = enumerate_group(g.generators, g.degree, t.group_cap);
  } catch (const Error& e) {
    diags.push_back(make_diag(e.code(), p.name, e.detail()));
    return false;
  }
  return ok;
}

bool check_cons(const Primitive& p, const ConservationLaw& c, const TypedTheory& t, std::vector<Diagnostic>& diags) {
  const auto& sig = t.spec.signature;
  if (c.matrix.empty()) {
    diags.push_back(make_diag(ErrorCode::DimensionMismatch, p.name, "conservation matrix has no rows"));
    return false;
  }
  bool ok = true;
  for (std::size_t r = 0; r < c.matrix.size(); ++r) {
    if (static_cast<int>(c.matrix[r].size()) != sig.output_dim) {
      diags.push_back(make_diag(ErrorCode::DimensionMismatch, p.name,
                                "row " + std::to_string(r) + " length differs from output dimension"));
      ok = false;
    }
    for (double v : c.matrix[r]) {
      if (!std::isfinite(v)) {
        diags.push_back(make_diag(ErrorCode::DimensionMismatch, p.name, "non-finite matrix entry"));
        ok = false;
        break;
      }
    }
  }
  if (c.mode == ConservationMode::Preserve) {
    const auto a_in = effective_input_matrix(c, sig);
    if (!a_in) {
      diags.push_back(make_diag(ErrorCode::DimensionMismatch, p.name,
                                "preserve mode needs an explicit input matrix when input and output dimensions differ"));
      ok = false;
    } else {
      bool shape = a_in->size() == c.matrix.size();
      for (const auto& row : *a_in) shape = shape && static_cast<int>(row.size()) == sig.input_dim;
      if (!shape) {
        diags.push_back(make_diag(ErrorCode::DimensionMismatch, p.name, "input matrix must be k x input_dim"));
        ok = false;
      }
    }
  } else if (c.target.size() != c.matrix.size()) {
    diags.push_back(make_diag(ErrorCode::DimensionMismatch, p.name, "fix target length differs from row count"));
    ok = false;
  }
  if (!ok) return false;
  const int rank = numerical_rank(c.matrix);
  if (rank != static_cast<int>(c.matrix.size())) {
    diags.push_back(make_diag(ErrorCode::RankDeficientConservation, p.name,
                              "rank " + std::to_string(rank) + " < " + std::to_string(c.matrix.size()) + " rows"));
    return false;
  }
  return true;
}

bool check_caus(const Primitive& p, const CausalGraph& d, TypedTheory& t, std::vector<Diagnostic>& diags) {
  const auto& sig = t.spec.signature;
  if (d.num_vars < 1 || d.num_vars > kMaxDimension) {
    diags.push_back(make_diag(ErrorCode::DimensionMismatch, p.name, "variable count out of range"));
    return false;
  }
  bool ok = true;
  if (d.num_vars != sig.input_dim || d.num_vars != sig.output_dim) {
    diags.push_back(make_diag(ErrorCode::DimensionMismatch, p.name,
                              "causal graph needs vars == input dimension == output dimension"));
    ok = false;
  }
  bool edges_ok = true;
  for (auto [parent, child] : d.edges) {
    if (parent < 0 || child < 0 || parent >= d.num_vars || child >= d.num_vars) {
      diags.push_back(make_diag(ErrorCode::InvalidEdge, p.name,
                                "edge (" + std::to_string(parent) + "," + std::to_string(child) + ") out of range"));
      edges_ok = false;
    } else if (parent == child) {
      diags.push_back(make_diag(ErrorCode::InvalidEdge, p.name, "self-loop on " + std::to_string(parent)));
      edges_ok = false;
    }
  }
  if (!edges_ok) return false;
  const auto order = topological_order(d);
  if (!order) {
    diags.push_back(make_diag(ErrorCode::CycleInCausalGraph, p.name, "causal graph contains a directed cycle"));
    return false;
  }
  if (ok) {
    t.topo_orders[p.name] = *order;
    t.closures[p.name] = ancestor_closure(d);
  }
  return ok;
}

}  // namespace

const CompatibilityWitness* TypedTheory::witness_for(const std::string& a, const std::string& b) const {
  for (const auto& w : compat_witnesses) {
    if ((w.pair.first == a && w.pair.second == b) || (w.pair.first == b && w.pair.second == a)) return &w;
  }
  return nullptr;
}

CheckResult check_wellformed(const TheorySpec& spec, const CheckOptions& options) {
  CheckResult result;
  TypedTheory typed;
  typed.spec = spec;
  typed.group_cap = options.group_cap;
  auto& diags = result.diagnostics;

  check_signature(spec.signature, diags);
  const bool signature_ok = diags.empty();

  std::map<std::string, bool> primitive_ok;
  for (const auto& p : spec.primitives) {
    bool ok = false;
    if (payload_kind(p.payload) != p.kind) {
      diags.push_back(make_diag(ErrorCode::UnknownKind, p.name, "payload does not match declared kind"));
    } else if (const auto* g = std::get_if<SymmetryGroup>(&p.payload)) {
      std::vector<Permutation> table;
      ok = check_sym(p, *g, typed, diags, table);
      if (ok) typed.group_tables[p.name] = std::move(table);
    } else if (const auto* c = std::get_if<ConservationLaw>(&p.payload)) {
      ok = signature_ok && check_cons(p, *c, typed, diags);
    } else if (const auto* d = std::get_if<CausalGraph>(&p.payload)) {
      ok = check_caus(p, *d, typed, diags);
    } else {
      ok = spec.signature.input_dim == 2 && spec.signature.output_dim == 2;
      if (!ok) {
        diags.push_back(make_diag(ErrorCode::DimensionMismatch, p.name, "divfree2d needs input 2 and output 2"));
      }
    }
    primitive_ok[p.name] = ok && signature_ok;
  }

  for (const auto& r : spec.relations) {
    if (r.args.size() != 2) {
      diags.push_back(make_diag(ErrorCode::ArityMismatch, "",
                                "compatible takes 2 arguments, got " + std::to_string(r.args.size())));
      continue;
    }
    const Primitive* a = spec.find(r.args[0]);
    const Primitive* b = spec.find(r.args[1]);
    bool known = true;
    for (const auto& name : r.args) {
      if (!spec.find(name)) {
        diags.push_back(make_diag(ErrorCode::UnknownPrimitive, name, "relation refers to an undeclared primitive"));
        known = false;
      }
    }
    if (!known || !primitive_ok[a->name] || !primitive_ok[b->name]) continue;
    Outcome out = compatibility(*a, *b, typed);
    if (auto* w = std::get_if<CompatibilityWitness>(&out)) {
      typed.compat_witnesses.push_back(std::move(*w));
    } else {
      diags.push_back(std::get<Diagnostic>(std::move(out)));
    }
  }

  if (diags.empty()) result.typed = std::move(typed);
  return result;
}

CompatibilityWitness check_compatibility(const Primitive& a, const Primitive& b, const TypedTheory& typed) {
  Outcome out = compatibility(a, b, typed);
  if (auto* d = std::get_if<Diagnostic>(&out)) {
    std::string detail = d->detail;
    if (d->residual) detail += " (residual " + std::to_string(*d->residual) + ")";
    throw Error(d->code, d->primitive + ": " + detail);
  }
  return std::get<CompatibilityWitness>(std::move(out));
}

double replay_witness(const CompatibilityWitness& witness, const TypedTheory& typed) {
  const Primitive* a = typed.spec.find(witness.pair.first);
  const Primitive* b = typed.spec.find(witness.pair.second);
  if (!a || !b) return INFINITY;
  if (kind_rank(a->kind) > kind_rank(b->kind)) std::swap(a, b);

  if (const auto* ev = std::get_if<SymConsEvidence>(&witness.evidence)) {
    ConservationRows rows;
    append_rows(rows, b->name, std::get<ConservationLaw>(b->payload), typed.spec.signature);
    std::vector<Permutation> scratch;
    const auto& table = group_table(*a, typed, scratch);
    if (table.size() != ev->lambdas.size()) return INFINITY;
    const auto action = std::get<SymmetryGroup>(a->payload).output_action;
    double worst = 0;
    for (std::size_t e = 0; e < table.size(); ++e) {
      worst = std::max(worst, sym_cons_residual(rows, ev->lambdas[e], table[e], action));
    }
    return worst;
  }
  if (std::holds_alternative<SymCausEvidence>(witness.evidence)) {
    auto out = sym_caus(*a, *b, typed);
    return std::holds_alternative<CompatibilityWitness>(out) ? 0.0 : INFINITY;
  }
  if (const auto* ev = std::get_if<ConsCausEvidence>(&witness.evidence)) {
    ConservationRows rows;
    append_rows(rows, a->name, std::get<ConservationLaw>(a->payload), typed.spec.signature);
    const Mask m = closure_of(*b, typed);
    if (causal_projection_violations(rows, ev->correction, m) != 0) return INFINITY;
    return max_abs_difference(multiply(rows.matrix, ev->correction), identity_matrix(rows.rows()));
  }
  if (const auto* ev = std::get_if<SymSymEvidence>(&witness.evidence)) {
    auto out = sym_sym(*a, *b, typed);
    const auto* w = std::get_if<CompatibilityWitness>(&out);
    return w && std::get<SymSymEvidence>(w->evidence).joint_order == ev->joint_order ? 0.0 : INFINITY;
  }
  if (std::holds_alternative<ConsConsEvidence>(witness.evidence)) {
    return std::holds_alternative<CompatibilityWitness>(cons_cons(*a, *b, typed)) ? 0.0 : INFINITY;
  }
  return 0.0;
}

std::string diagnostics_json(const std::vector<Diagnostic>& diagnostics) {
  nlohmann::ordered_json errors = nlohmann::ordered_json::array();
  for (const auto& d : diagnostics) {
    nlohmann::ordered_json e;
    e["code"] = std::string(to_string(d.code));
    e["primitive"] = d.primitive;
    e["detail"] = d.detail;
    e["residual"] = d.residual ? nlohmann::ordered_json(*d.residual) : nlohmann::ordered_json(nullptr);
    errors.push_back(std::move(e));
  }
  nlohmann::ordered_json doc;
  doc["errors"] = std::move(errors);
  return doc.dump(2);
}

}  // namespace theoryc
