// theoryc: check, compile, certify, export and explain domain theories.

#include <unistd.h>

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "theoryc/archir.hpp"
#include "theoryc/certify.hpp"
#include "theoryc/error.hpp"
#include "theoryc/export.hpp"
#include "theoryc/group.hpp"
#include "theoryc/synth.hpp"
#include "theoryc/theory.hpp"
#include "theoryc/typecheck.hpp"

using namespace theoryc;
using ojson = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kIllFormed = 1, kUsage = 2, kUnsupported = 3, kProvenance = 4 };

bool use_color() { return std::getenv("THEORYC_NO_COLOR") == nullptr && isatty(fileno(stderr)); }

std::string paint(std::string_view text, bool good) {
  if (!use_color()) return std::string(text);
  return std::string(good ? "\033[32m" : "\033[31m") + std::string(text) + "\033[0m";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text) || !out.flush()) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::SyntaxError:
    case ErrorCode::DuplicateName:
    case ErrorCode::UnknownKind:
    case ErrorCode::InvalidGraph:
    case ErrorCode::UnsupportedTarget:
      return kUsage;
    case ErrorCode::UnsupportedPair:
    case ErrorCode::MissingWitness:
      return kUnsupported;
    case ErrorCode::ProvenanceMismatch: return kProvenance;
    default: return kIllFormed;
  }
}

int report(const Error& e) {
  std::cout << diagnostics_json({Diagnostic{e.code(), "", e.detail(), std::nullopt}}) << "\n";
  std::cerr << paint("error", false) << ": " << e.what() << "\n";
  return exit_code(e.code());
}

struct Common {
  std::uint64_t seed = 0;
  std::size_t group_cap = kDefaultGroupCap;
  SynthConfig synth;
  CertifyOptions certify;
  std::string output;
};

// Parses and type-checks; on ill-formed input prints diagnostics and returns nullopt.
std::optional<TypedTheory> load_theory(const std::string& path, const Common& c, int& code) {
  const TheorySpec spec = parse_theory(read_file(path));
  auto result = check_wellformed(spec, CheckOptions{c.group_cap});
  if (!result.ok()) {
    std::cout << diagnostics_json(result.diagnostics) << "\n";
    for (const auto& d : result.diagnostics) {
      std::cerr << paint(std::string(to_string(d.code)), false) << (d.primitive.empty() ? "" : " [" + d.primitive + "]")
                << ": " << d.detail << "\n";
    }
    code = kIllFormed;
    return std::nullopt;
  }
  return std::move(*result.typed);
}

int cmd_check(const std::string& path, const Common& c) {
  int code = kOk;
  auto typed = load_theory(path, c, code);
  if (!typed) return code;
  std::cout << diagnostics_json({}) << "\n";
  std::cerr << paint("ok", true) << ": " << typed->spec.name << " is well-formed (" << typed->spec.primitives.size()
            << " primitives, " << typed->compat_witnesses.size() << " witnesses)\n";
  return kOk;
}

int cmd_compile(const std::string& path, const Common& c) {
  int code = kOk;
  auto typed = load_theory(path, c, code);
  if (!typed) return code;
  SynthConfig cfg = c.synth;
  cfg.seed = c.seed;
  const std::string text = serialize_archir(compile(*typed, cfg));
  const std::string sha = sha256_hex(text);
  if (!c.output.empty()) write_file(c.output, text);
  ojson out;
  out["theory"] = typed->spec.name;
  out["archir"] = c.output.empty() ? ojson(nullptr) : ojson(c.output);
  out["sha256"] = sha;
  std::cout << out.dump(2) << "\n";
  std::cerr << "compiled " << typed->spec.name << " -> " << (c.output.empty() ? "(not written)" : c.output) << " sha256 " << sha << "\n";
  return kOk;
}

int cmd_certify(const std::string& archir_path, const std::string& theory_path, const Common& c) {
  const ArchGraph g = parse_archir(read_file(archir_path));
  int code = kOk;
  auto typed = load_theory(theory_path, c, code);
  if (!typed) return code;
  CertifyOptions o = c.certify;
  o.seed = c.seed;
  const Certificate cert = certify_soundness(g, *typed, o);
  const std::string text = certificate_json(cert);
  if (c.output.empty()) {
    std::cout << text;
  } else {
    write_file(c.output, text);
    std::cout << ojson{{"certificate", c.output}, {"verdict", cert.pass ? "pass" : "fail"}}.dump(2) << "\n";
  }
  for (const auto& cl : cert.claims) {
    std::cerr << (cl.passed ? paint("pass", true) : paint("FAIL", false)) << "  " << cl.primitive << "  "
              << to_string(cl.kind) << "  residual " << cl.max_residual << " (tol " << cl.tolerance << ")\n";
  }
  for (const auto& n : cert.notes) std::cerr << "note  " << n << "\n";
  std::cerr << "verdict: " << (cert.pass ? paint("pass", true) : paint("fail", false)) << "\n";
  return cert.pass ? kOk : kIllFormed;
}

int cmd_export(const std::string& archir_path, const std::string& target, const std::string& refs_path, const Common& c) {
  const std::string text = read_file(archir_path);
  const ArchGraph g = parse_archir(text);
  const ExportBundle b = export_model(g, target, c.seed);
  if (c.output.empty()) throw Error(ErrorCode::IoError, "export needs -o <model path>");
  write_file(c.output, b.source);
  if (!refs_path.empty()) write_file(refs_path, b.refs);
  ojson out;
  out["model"] = c.output;
  out["refs"] = refs_path.empty() ? ojson(nullptr) : ojson(refs_path);
  out["archir_sha256"] = sha256_hex(text);
  out["cases"] = refs_path.empty() ? 0 : kReferenceCases;
  std::cout << out.dump(2) << "\n";
  std::cerr << "exported " << archir_path << " -> " << c.output << "\n";
  return kOk;
}

std::string witness_summary(const CompatibilityWitness& w) {
  return std::visit(
      [](const auto& ev) -> std::string {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, SymConsEvidence>) {
          bool identity = true;
          for (const auto& l : ev.lambdas) identity = identity && max_abs_difference(l, identity_matrix(l.size())) == 0.0;
          return identity ? "Lambda_g = identity for all " + std::to_string(ev.lambdas.size()) + " group elements"
                          : "row action Lambda_g found for all " + std::to_string(ev.lambdas.size()) + " group elements";
        } else if constexpr (std::is_same_v<T, SymCausEvidence>) {
          return "all " + std::to_string(ev.elements_checked) + " group elements preserve the ancestor relation";
        } else if constexpr (std::is_same_v<T, ConsCausEvidence>) {
          std::string s = "rows absorbed at nodes";
          for (int a : ev.absorbing) s += " " + std::to_string(a);
          return s;
        } else if constexpr (std::is_same_v<T, SymSymEvidence>) {
          return "joint group of order " + std::to_string(ev.joint_order);
        } else if constexpr (std::is_same_v<T, ConsConsEvidence>) {
          return "stacked rows have full rank " + std::to_string(ev.stacked_rank);
        } else {
          return "no joint condition";
        }
      },
      w.evidence);
}

int cmd_explain(const std::string& path, const Common& c) {
  int code = kOk;
  auto typed = load_theory(path, c, code);
  if (!typed) return code;
  const auto& spec = typed->spec;
  ojson doc;
  doc["theory"] = spec.name;
  ojson rules = ojson::array();
  ArchGraph g;
  std::string compile_error;
  try {
    g = compile(*typed, c.synth);
  } catch (const Error& e) {
    compile_error = e.what();
  }
  if (spec.primitives.empty()) std::cerr << "no constraints; free MLP\n";
  for (const auto& p : spec.primitives) {
    ojson r;
    r["primitive"] = p.name;
    r["kind"] = std::string(to_string(p.kind));
    std::set<std::string> rule_names;
    std::vector<std::string> modules;
    std::size_t slots = 0;
    for (const auto& n : g.nodes) {
      auto it = g.provenance.find(n.id);
      if (it == g.provenance.end()) continue;
      for (const auto& e : it->second) {
        if (e.primitive != p.name) continue;
        rule_names.insert(e.rule);
        modules.push_back(std::string(to_string(n.kind())));
        slots += slot_count(n);
      }
    }
    r["rules"] = std::vector<std::string>(rule_names.begin(), rule_names.end());
    r["modules"] = modules;
    r["parameter_slots"] = slots;
    std::string line = std::string(to_string(p.kind)) + " " + p.name + " -> ";
    for (std::size_t k = 0; k < modules.size(); ++k) line += (k ? ", " : "") + modules[k];
    if (const auto* grp = std::get_if<SymmetryGroup>(&p.payload)) {
      const int orbits = count_distinct(pair_orbits(grp->generators, grp->degree));
      r["pair_orbits"] = orbits;
      line += "; Sym rule: " + std::to_string(orbits) + " slots per " + std::to_string(grp->degree) + "x" +
              std::to_string(grp->degree) + " layer (" + std::to_string(orbits) + " orbits)";
    }
    line += "; " + std::to_string(slots) + " parameter slots";
    std::cerr << line << "\n";
    rules.push_back(std::move(r));
  }
  ojson witnesses = ojson::array();
  for (const auto& w : typed->compat_witnesses) {
    const std::string summary = witness_summary(w);
    witnesses.push_back({{"pair", {w.pair.first, w.pair.second}}, {"evidence", summary}, {"max_residual", w.max_residual}});
    std::cerr << "compatible(" << w.pair.first << ", " << w.pair.second << "): " << summary << "\n";
  }
  doc["rules"] = std::move(rules);
  doc["witnesses"] = std::move(witnesses);
  doc["free_mlp"] = spec.primitives.empty();
  doc["compile_error"] = compile_error.empty() ? ojson(nullptr) : ojson(compile_error);
  if (!compile_error.empty()) std::cerr << paint("compile refuses", false) << ": " << compile_error << "\n";
  std::cout << doc.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"theoryc: compile domain theories into certified architectures"};
  app.require_subcommand(1);
  Common c;
  std::string theory_path, archir_path, target = "python", refs_path;

  auto add_seed = [&](CLI::App* s) { s->add_option("--seed", c.seed, "Seed for parameters and samples")->capture_default_str(); };
  auto add_cap = [&](CLI::App* s) { s->add_option("--group-cap", c.group_cap, "Largest group order enumerated")->capture_default_str(); };
  auto add_synth = [&](CLI::App* s) {
    s->add_option("--width", c.synth.hidden_width, "Hidden channels per coordinate")->capture_default_str();
    s->add_option("--depth", c.synth.depth, "Parameterised layers in the core")->capture_default_str();
  };

  auto* check = app.add_subcommand("check", "Type-check a theory");
  check->add_option("theory", theory_path)->required();
  add_cap(check);

  auto* comp = app.add_subcommand("compile", "Compile a theory to .archir");
  comp->add_option("theory", theory_path)->required();
  comp->add_option("-o", c.output, "Output .archir path");
  add_seed(comp);
  add_cap(comp);
  add_synth(comp);

  auto* cert = app.add_subcommand("certify", "Certify a compiled graph against a theory");
  cert->add_option("archir", archir_path)->required();
  cert->add_option("theory", theory_path)->required();
  cert->add_option("-o", c.output, "Certificate path (stdout when omitted)");
  cert->add_option("--samples", c.certify.n_params, "Parameter draws")->capture_default_str();
  cert->add_option("--inputs", c.certify.n_inputs, "Inputs per parameter draw")->capture_default_str();
  cert->add_option("--tol-exact", c.certify.tol_exact, "Tolerance for exact-algebra residuals")->capture_default_str();
  cert->add_option("--tol-fd", c.certify.tol_fd, "Tolerance for finite-difference residuals")->capture_default_str();
  cert->add_option("--fd-step", c.certify.fd_step, "Central difference step")->capture_default_str();
  add_seed(cert);
  add_cap(cert);

  auto* exp = app.add_subcommand("export", "Export a compiled graph as standalone source");
  exp->add_option("archir", archir_path)->required();
  exp->add_option("--target", target, "Target language")->capture_default_str();
  exp->add_option("-o", c.output, "Model source path")->required();
  exp->add_option("--refs", refs_path, "Reference vector path");
  add_seed(exp);

  auto* expl = app.add_subcommand("explain", "Print the rule trace of a theory");
  expl->add_option("theory", theory_path)->required();
  add_cap(expl);
  add_synth(expl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*check) return cmd_check(theory_path, c);
    if (*comp) return cmd_compile(theory_path, c);
    if (*cert) return cmd_certify(archir_path, theory_path, c);
    if (*exp) return cmd_export(archir_path, target, refs_path, c);
    if (*expl) return cmd_explain(theory_path, c);
  } catch (const Error& e) {
    return report(e);
  } catch (const std::exception& e) {
    std::cerr << paint("error", false) << ": " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
