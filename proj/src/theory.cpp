#include "theoryc/theory.hpp"

#include <array>
#include <charconv>
#include <sstream>

#include "theoryc/error.hpp"

namespace theoryc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::UnknownPrimitive: return "UnknownPrimitive";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::InvalidSignature: return "InvalidSignature";
    case ErrorCode::InvalidEdge: return "InvalidEdge";
    case ErrorCode::GroupAxiomViolation: return "GroupAxiomViolation";
    case ErrorCode::GroupOrderCapExceeded: return "GroupOrderCapExceeded";
    case ErrorCode::NonBijectiveGenerator: return "NonBijectiveGenerator";
    case ErrorCode::CycleInCausalGraph: return "CycleInCausalGraph";
    case ErrorCode::RankDeficientConservation: return "RankDeficientConservation";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IncompatiblePrimitives: return "IncompatiblePrimitives";
    case ErrorCode::UnsupportedPair: return "UnsupportedPair";
    case ErrorCode::UnsupportedPrimitive: return "UnsupportedPrimitive";
    case ErrorCode::MissingWitness: return "MissingWitness";
    case ErrorCode::ProvenanceMismatch: return "ProvenanceMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::UnsupportedTarget: return "UnsupportedTarget";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::Sym: return "Sym";
    case PrimitiveKind::Cons: return "Cons";
    case PrimitiveKind::Caus: return "Caus";
    case PrimitiveKind::Diff: return "Diff";
  }
  return "?";
}

std::string_view to_string(OutputAction action) {
  return action == OutputAction::Same ? "same" : "invariant";
}

PrimitiveKind payload_kind(const PrimitivePayload& payload) {
  static constexpr std::array kKinds = {PrimitiveKind::Sym, PrimitiveKind::Cons, PrimitiveKind::Caus,
                                        PrimitiveKind::Diff};
  return kKinds[payload.index()];
}

const Primitive* TheorySpec::find(std::string_view primitive_name) const {
  for (const auto& p : primitives) {
    if (p.name == primitive_name) return &p;
  }
  return nullptr;
}

namespace {

void put_real(std::ostream& os, double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  os.write(buf.data(), ptr - buf.data());
}

void put_vector(std::ostream& os, const RealVector& v) {
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    put_real(os, v[i]);
  }
  os << ']';
}

void put_matrix(std::ostream& os, const RealMatrix& m) {
  os << '[';
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i) os << ", ";
    put_vector(os, m[i]);
  }
  os << ']';
}

void put_string(std::ostream& os, const std::string& s) {
  os << '"';
  for (char c : s) {
    if (c == '"' || c == '\\') os << '\\';
    os << c;
  }
  os << '"';
}

}  // namespace

std::string serialize_theory(const TheorySpec& spec) {
  std::ostringstream os;
  os << "theory " << spec.name << " {\n";
  os << "  signature { input: " << spec.signature.input_dim << "; output: " << spec.signature.output_dim << ";";
  if (spec.signature.variable_names) {
    os << " names: [";
    const auto& names = *spec.signature.variable_names;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i) os << ", ";
      put_string(os, names[i]);
    }
    os << "];";
  }
  os << " }\n";

  for (const auto& p : spec.primitives) {
    os << "  primitive " << p.name << " : " << to_string(p.kind) << " = ";
    if (const auto* g = std::get_if<SymmetryGroup>(&p.payload)) {
      os << "group { degree: " << g->degree << "; generators: [";
      for (std::size_t i = 0; i < g->generators.size(); ++i) {
        if (i) os << ", ";
        os << "perm(";
        for (std::size_t j = 0; j < g->generators[i].size(); ++j) {
          if (j) os << ' ';
          os << g->generators[i][j];
        }
        os << ')';
      }
      os << "]; output_action: " << to_string(g->output_action) << "; }\n";
    } else if (const auto* c = std::get_if<ConservationLaw>(&p.payload)) {
      os << "conserve { matrix: ";
      put_matrix(os, c->matrix);
      os << "; mode: ";
      if (c->mode == ConservationMode::Preserve) {
        os << "preserve";
        if (c->input_matrix) {
          os << ' ';
          put_matrix(os, *c->input_matrix);
        }
      } else {
        os << "fix ";
        put_vector(os, c->target);
      }
      os << "; }\n";
    } else if (const auto* d = std::get_if<CausalGraph>(&p.payload)) {
      os << "dag { vars: " << d->num_vars << "; edges: [";
      for (std::size_t i = 0; i < d->edges.size(); ++i) {
        if (i) os << ", ";
        os << '(' << d->edges[i].first << ',' << d->edges[i].second << ')';
      }
      os << "]; }\n";
    } else {
      os << "divfree2d { }\n";
    }
  }

  if (!spec.relations.empty()) {
    os << "  relations {";
    for (const auto& r : spec.relations) {
      os << " compatible(";
      for (std::size_t i = 0; i < r.args.size(); ++i) {
        if (i) os << ", ";
        os << r.args[i];
      }
      os << ");";
    }
    os << " }\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace theoryc
