// Acceptance run: one PASS/FAIL line per headline criterion.
// usage: acceptance <theories dir>

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "generators.hpp"
#include "oracles.hpp"
#include "theoryc/certify.hpp"
#include "theoryc/error.hpp"
#include "theoryc/synth.hpp"
#include "theoryc/typecheck.hpp"

using namespace theoryc;

namespace {

std::string g_dir;
const char* const kCorpus[] = {"dee", "c4", "s3", "divfree", "empty"};

struct Outcome {
  bool pass = true;
  std::string detail;
};

TheorySpec load(const std::string& name) {
  std::ifstream in(g_dir + "/" + name + ".thy");
  if (!in) throw Error(ErrorCode::IoError, "missing corpus file " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_theory(ss.str());
}

TypedTheory checked(const TheorySpec& s) {
  auto r = check_wellformed(s);
  if (!r.ok()) throw Error(r.diagnostics.front().code, s.name + ": " + r.diagnostics.front().detail);
  return std::move(*r.typed);
}

TypedTheory sub(const TypedTheory& t, std::vector<std::string> names, const std::string& name) {
  TheorySpec s;
  s.name = name;
  s.signature = t.spec.signature;
  for (const auto& n : names) s.primitives.push_back(*t.spec.find(n));
  return checked(s);
}

TypedTheory from_text(const std::string& text) { return checked(parse_theory(text)); }

std::string fmt(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

Outcome soundness() {
  Outcome o;
  const CertifyOptions opts;  // 256 draws x 64 inputs, 1e-9 / 1e-5, h = 1e-4
  std::vector<TheorySpec> specs;
  for (const char* c : kCorpus) specs.push_back(load(c));
  gen::Rng rng(2024);
  for (int i = 0; i < 20; ++i) specs.push_back(gen::random_compilable(rng));
  double worst_exact = 0, worst_fd = 0;
  int passed = 0;
  for (const auto& s : specs) {
    const TypedTheory t = checked(s);
    const Certificate c = certify_soundness(compile(t), t, opts);
    for (const auto& cl : c.claims) {
      if (cl.kind != ClaimKind::NumericResidual) continue;
      (cl.tolerance == opts.tol_fd ? worst_fd : worst_exact) =
          std::max(cl.tolerance == opts.tol_fd ? worst_fd : worst_exact, cl.max_residual);
    }
    if (c.pass) {
      ++passed;
    } else {
      o.pass = false;
      o.detail += " " + s.name + " failed;";
    }
  }
  o.detail = std::to_string(passed) + "/" + std::to_string(specs.size()) + " theories certified, worst exact residual " +
             fmt(worst_exact) + ", worst fd residual " + fmt(worst_fd) + ";" + o.detail;
  return o;
}

Outcome completeness() {
  struct Named {
    std::string name;
    int degree;
    std::vector<Permutation> gens;
  };
  std::vector<Named> groups;
  for (int n = 1; n <= 6; ++n) groups.push_back({"trivial" + std::to_string(n), n, {}});
  groups.push_back({"C2", 2, {{1, 0}}});
  groups.push_back({"C3", 3, {{1, 2, 0}}});
  groups.push_back({"C4", 4, {{1, 2, 3, 0}}});
  groups.push_back({"C6", 6, {{1, 2, 3, 4, 5, 0}}});
  groups.push_back({"S3", 3, {{1, 0, 2}, {1, 2, 0}}});
  groups.push_back({"S4", 4, {{1, 0, 2, 3}, {1, 2, 3, 0}}});
  groups.push_back({"D4", 4, {{1, 2, 3, 0}, {3, 2, 1, 0}}});
  gen::Rng rng(77);
  for (int i = 0; i < 10; ++i) {
    auto g = gen::random_group(rng, 48);
    groups.push_back({"random" + std::to_string(i), g.degree, g.generators});
  }
  Outcome o;
  int ok = 0;
  for (const auto& g : groups) {
    const Claim c = certify_completeness_linear(SymmetryGroup{g.degree, g.gens, OutputAction::Same});
    const int exact = oracle::commutant_dim_exact(g.gens, g.degree);
    const int burnside = oracle::burnside_pair_orbits(oracle::bfs_closure(g.gens, g.degree), g.degree);
    if (c.passed && c.orbit_count == exact && c.commutant_dim == exact && burnside == exact) {
      ++ok;
    } else {
      o.pass = false;
      o.detail += " " + g.name + " orbits " + std::to_string(c.orbit_count) + " vs oracle " + std::to_string(exact) + ";";
    }
  }
  o.detail = std::to_string(ok) + "/" + std::to_string(groups.size()) +
             " groups with orbit count = exact commutant dimension;" + o.detail;
  return o;
}

Outcome functoriality() {
  Outcome o;
  SynthConfig cfg;
  const TypedTheory dee = checked(load("dee"));
  const TypedTheory s3 = checked(load("s3"));
  const TypedTheory c4 = checked(load("c4"));
  const TypedTheory divfree = checked(load("divfree"));
  const TypedTheory c4_sum = from_text(
      "theory c4_sum { signature { input: 4; output: 4; } "
      "primitive Sum : Cons = conserve { matrix: [[1, 1, 1, 1]]; mode: preserve; } }");
  const TypedTheory divfree_b = from_text(
      "theory divfree_b { signature { input: 2; output: 2; } primitive V : Diff = divfree2d { } }");

  struct Pair {
    TypedTheory a, b;
  };
  std::vector<Pair> compatible = {
      {sub(dee, {"K"}, "dee_K"), sub(dee, {"C"}, "dee_C")},
      {sub(dee, {"G"}, "dee_G"), sub(dee, {"C"}, "dee_C")},
      {sub(dee, {"K"}, "dee_K"), sub(dee, {"G"}, "dee_G")},
      {sub(dee, {"K", "G"}, "dee_KG"), sub(dee, {"C"}, "dee_C")},
      {sub(s3, {"S"}, "s3_S"), sub(s3, {"Total"}, "s3_Total")},
      {c4, c4_sum},
      {divfree, divfree_b},
  };
  double worst = 0;
  int ok = 0;
  for (const auto& [a, b] : compatible) {
    try {
      const Claim c = check_functoriality(a, b, cfg, 100, 5);
      worst = std::max(worst, c.max_residual);
      if (c.passed) {
        ++ok;
        continue;
      }
      o.detail += " " + c.primitive + " discrepancy " + fmt(c.max_residual) + ";";
    } catch (const Error& e) {
      o.detail += " " + a.spec.name + " x " + b.spec.name + " threw " + e.what() + ";";
    }
    o.pass = false;
  }

  const TypedTheory cons_2d = from_text(
      "theory flux2 { signature { input: 2; output: 2; } "
      "primitive F : Cons = conserve { matrix: [[1, 1]]; mode: preserve; } }");
  const TypedTheory first_coord = from_text(
      "theory first4 { signature { input: 4; output: 4; } "
      "primitive First : Cons = conserve { matrix: [[1, 0, 0, 0]]; mode: preserve; } }");
  const TypedTheory chain3 = from_text(
      "theory chain3 { signature { input: 3; output: 3; } "
      "primitive Chain : Caus = dag { vars: 3; edges: [(0,1), (1,2)]; } }");
  const TypedTheory dee_chain = from_text(
      "theory dee_chain { signature { input: 12; output: 12; } primitive Line : Caus = dag { vars: 12; edges: "
      "[(0,1), (1,2), (2,3), (3,4), (4,5), (5,6), (6,7), (7,8), (8,9), (9,10), (10,11)]; } }");
  std::vector<Pair> incompatible = {
      {divfree, cons_2d},
      {c4, first_coord},
      {sub(s3, {"S"}, "s3_S"), chain3},
      {sub(dee, {"K"}, "dee_K"), dee_chain},
  };
  int rejected = 0;
  for (const auto& [a, b] : incompatible) {
    bool refused = false;
    try {
      check_functoriality(a, b, cfg, 10, 5);
    } catch (const Error& e) {
      refused = e.code() == ErrorCode::MissingWitness || e.code() == ErrorCode::IncompatiblePrimitives;
    }
    // the bare conjunction must not compile either
    if (refused) {
      auto r = check_wellformed(conjoin(a.spec, b.spec));
      if (r.ok()) {
        try {
          compile(*r.typed, cfg);
          refused = false;
        } catch (const Error&) {
        }
      }
    }
    if (refused) {
      ++rejected;
    } else {
      o.pass = false;
      o.detail += " " + a.spec.name + " x " + b.spec.name + " was not rejected;";
    }
  }
  o.detail = std::to_string(ok) + "/" + std::to_string(compatible.size()) +
             " compatible pairs agree over 100 draws (worst " + fmt(worst) + "), " + std::to_string(rejected) + "/" +
             std::to_string(incompatible.size()) + " incompatible pairs rejected;" + o.detail;
  return o;
}

Outcome mutations() {
  Outcome o;
  const CertifyOptions opts;
  int applied = 0, caught = 0, not_applicable = 0;
  std::set<Mutation> exercised;
  for (const char* name : kCorpus) {
    const TypedTheory t = checked(load(name));
    const ArchGraph g = compile(t);
    for (Mutation m : kAllMutations) {
      const auto mutant = mutate(g, m);
      if (!mutant) {
        ++not_applicable;
        continue;
      }
      ++applied;
      exercised.insert(m);
      bool fails = false;
      try {
        fails = !certify_soundness(*mutant, t, opts).pass;
      } catch (const Error& e) {
        fails = e.code() == ErrorCode::ProvenanceMismatch;
      }
      if (fails) {
        ++caught;
      } else {
        o.pass = false;
        o.detail += std::string(" escaped: ") + name + "/" + std::string(to_string(m)) + ";";
      }
    }
  }
  if (exercised.size() != std::size(kAllMutations)) {
    o.pass = false;
    o.detail += " some mutation never applied;";
  }
  o.detail = std::to_string(caught) + "/" + std::to_string(applied) + " applicable mutants fail certification, " +
             std::to_string(applied - caught) + " escaped, " + std::to_string(not_applicable) +
             " corpus/mutation combinations not applicable;" + o.detail;
  return o;
}

Outcome determinism() {
  Outcome o;
  int stable = 0;
  for (const char* name : kCorpus) {
    std::string archir[3], cert[3];
    for (int run = 0; run < 3; ++run) {
      const TypedTheory t = checked(load(name));
      SynthConfig cfg;
      cfg.seed = 11;
      const ArchGraph g = compile(t, cfg);
      archir[run] = serialize_archir(g);
      CertifyOptions opts;
      opts.seed = 11;
      opts.threads = run + 1;
      cert[run] = certificate_json(certify_soundness(parse_archir(archir[run]), t, opts));
    }
    if (archir[0] == archir[1] && archir[1] == archir[2] && cert[0] == cert[1] && cert[1] == cert[2]) {
      ++stable;
    } else {
      o.pass = false;
      o.detail += std::string(" ") + name + " differs;";
    }
  }
  o.detail = std::to_string(stable) + "/5 corpus theories byte-identical over 3 runs;" + o.detail;
  return o;
}

Outcome round_trip() {
  Outcome o;
  gen::Rng rng(500);
  int ok = 0;
  for (int i = 0; i < 500; ++i) {
    const TheorySpec s = gen::random_spec(rng);
    try {
      if (parse_theory(serialize_theory(s)) == s) {
        ++ok;
        continue;
      }
    } catch (const Error& e) {
      o.detail += std::string(" ") + e.what() + ";";
    }
    o.pass = false;
  }
  o.detail = std::to_string(ok) + "/500 generated specs survive parse(serialize(s));" + o.detail;
  return o;
}

Outcome robustness() {
  Outcome o;
  std::vector<std::string> seeds;
  for (const char* c : kCorpus) seeds.push_back(serialize_theory(load(c)));
  gen::Rng rng(1000);
  const auto corpus = gen::fuzz_corpus(rng, 1000, seeds);
  const auto start = std::chrono::steady_clock::now();
  int diagnosed = 0;
  for (const auto& text : corpus) {
    bool has_diagnostic = false;
    try {
      has_diagnostic = !check_wellformed(parse_theory(text)).diagnostics.empty();
    } catch (const ParseError&) {
      has_diagnostic = true;
    } catch (const Error&) {
      has_diagnostic = true;
    } catch (const std::exception& e) {
      o.detail += std::string(" unexpected exception: ") + e.what() + ";";
    }
    if (has_diagnostic) {
      ++diagnosed;
    } else {
      o.pass = false;
      if (o.detail.size() < 400) o.detail += " accepted: " + text.substr(0, 60) + ";";
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs >= 10.0) o.pass = false;
  o.detail = std::to_string(diagnosed) + "/1000 malformed inputs diagnosed in " + fmt(secs) + " s (budget 10 s);" + o.detail;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <theories dir>\n";
    return 2;
  }
  g_dir = argv[1];
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"soundness", soundness},       {"completeness", completeness}, {"functoriality", functoriality},
      {"mutation sensitivity", mutations}, {"determinism", determinism}, {"parser round-trip", round_trip},
      {"decidability/robustness", robustness},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << " (" << fmt(secs)
              << " s)" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria met" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
