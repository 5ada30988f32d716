#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "generators.hpp"
#include "oracles.hpp"
#include "theoryc/certify.hpp"
#include "theoryc/error.hpp"
#include "theoryc/synth.hpp"
#include "theoryc/typecheck.hpp"

using namespace theoryc;

namespace {

TypedTheory typed(std::string_view text) {
  auto r = check_wellformed(parse_theory(text));
  REQUIRE(r.ok());
  return std::move(*r.typed);
}

TypedTheory corpus(const std::string& name) {
  std::ifstream in(std::string(THEORIES_DIR) + "/" + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return typed(ss.str());
}

CertifyOptions quick() {
  CertifyOptions o;
  o.n_params = 8;
  o.n_inputs = 8;
  o.seed = 3;
  return o;
}

// The sub-theory keeping only the named primitives.
TypedTheory only(const TypedTheory& t, std::initializer_list<const char*> names, const std::string& name) {
  TheorySpec s;
  s.name = name;
  s.signature = t.spec.signature;
  for (const char* n : names) s.primitives.push_back(*t.spec.find(n));
  auto r = check_wellformed(s);
  REQUIRE(r.ok());
  return std::move(*r.typed);
}

const Claim* find_claim(const Certificate& c, ClaimKind kind, const std::string& primitive) {
  for (const auto& cl : c.claims)
    if (cl.kind == kind && cl.primitive == primitive) return &cl;
  return nullptr;
}

}  // namespace

TEST_CASE("corpus compilations certify") {
  for (const char* f : {"dee.thy", "c4.thy", "s3.thy", "divfree.thy", "empty.thy"}) {
    CAPTURE(f);
    const auto t = corpus(f);
    const auto cert = certify_soundness(compile(t), t, quick());
    CHECK(cert.pass);
    for (const auto& p : t.spec.primitives) {
      CHECK(find_claim(cert, ClaimKind::SymbolicRule, p.name));
      CHECK(find_claim(cert, ClaimKind::NumericResidual, p.name));
    }
  }
}

TEST_CASE("certificate json is deterministic and self-describing") {
  const auto t = corpus("s3.thy");
  const ArchGraph g = compile(t);
  const std::string a = certificate_json(certify_soundness(g, t, quick()));
  const std::string b = certificate_json(certify_soundness(g, t, quick()));
  CHECK(a == b);
  const auto j = nlohmann::json::parse(a);
  CHECK(j["verdict"] == "pass");
  CHECK(j["archir_sha256"] == sha256_hex(serialize_archir(g)));
  CHECK(j["sample_counts"]["parameter_draws"] == 8);
  CHECK(j["statement"].get<std::string>().find("sampled") != std::string::npos);
  CHECK(j["tool_version"] == kToolVersion);
}

TEST_CASE("thread count does not change the certificate") {
  const auto t = corpus("c4.thy");
  const ArchGraph g = compile(t);
  auto o1 = quick(), o2 = quick();
  o1.threads = 1;
  o2.threads = 3;
  CHECK(certificate_json(certify_soundness(g, t, o1)) == certificate_json(certify_soundness(g, t, o2)));
}

TEST_CASE("a graph certified against the wrong theory is a provenance mismatch") {
  const ArchGraph g = compile(corpus("c4.thy"));
  const auto other = typed("theory c { signature { input: 4; output: 4; } "
                           "primitive Q : Sym = group { degree: 4; generators: [perm(1 2 3 0)]; output_action: same; } }");
  try {
    certify_soundness(g, other, quick());
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProvenanceMismatch);
  }
}

TEST_CASE("each mutation is caught") {
  struct Case {
    const char* file;
    Mutation m;
  };
  for (auto [file, m] : {Case{"c4.thy", Mutation::UnshareSlot}, Case{"s3.thy", Mutation::ZeroProjectionRow},
                         Case{"dee.thy", Mutation::FlipMaskBit}, Case{"divfree.thy", Mutation::CurlToDense}}) {
    CAPTURE(file);
    CAPTURE(to_string(m));
    const auto t = corpus(file);
    const auto mutant = mutate(compile(t), m);
    REQUIRE(mutant);
    CHECK_FALSE(certify_soundness(*mutant, t, quick()).pass);
  }
  CHECK_FALSE(mutate(compile(corpus("empty.thy")), Mutation::UnshareSlot));
}

TEST_CASE("a broken tie fails the symbolic claim as well as the numeric one") {
  const auto t = corpus("c4.thy");
  const auto cert = certify_soundness(*mutate(compile(t), Mutation::UnshareSlot), t, quick());
  CHECK_FALSE(find_claim(cert, ClaimKind::SymbolicRule, "R")->passed);
  CHECK_FALSE(find_claim(cert, ClaimKind::NumericResidual, "R")->passed);
}

TEST_CASE("completeness: orbit count equals the commutant dimension") {
  struct G {
    int n;
    std::vector<Permutation> gens;
  };
  for (const auto& [n, gens] : {G{4, {{1, 2, 3, 0}}}, G{3, {{1, 0, 2}, {1, 2, 0}}}, G{4, {{1, 2, 3, 0}, {3, 2, 1, 0}}},
                                G{5, {}}, G{6, {{1, 2, 3, 4, 5, 0}}}}) {
    const Claim c = certify_completeness_linear(SymmetryGroup{n, gens, OutputAction::Same});
    CHECK(c.passed);
    CHECK(c.orbit_count == c.commutant_dim);
    CHECK(c.commutant_dim == oracle::commutant_dim_exact(gens, n));
  }
}

TEST_CASE("conjoin keeps order and rejects clashes") {
  const auto dee = corpus("dee.thy");
  const auto k = only(dee, {"K"}, "k");
  const auto c = only(dee, {"C"}, "c");
  const TheorySpec both = conjoin(k.spec, c.spec);
  REQUIRE(both.primitives.size() == 2);
  CHECK(both.primitives[0].name == "K");
  CHECK_THROWS_AS(conjoin(k.spec, k.spec), Error);
  CHECK_THROWS_AS(conjoin(k.spec, corpus("c4.thy").spec), Error);
}

TEST_CASE("functoriality on the dee split") {
  const auto dee = corpus("dee.thy");
  SynthConfig cfg;
  cfg.hidden_width = 4;
  const auto g = only(dee, {"G"}, "g"), c = only(dee, {"C"}, "c"), k = only(dee, {"K"}, "k");
  for (auto [a, b] : {std::pair{&k, &c}, std::pair{&g, &c}, std::pair{&k, &g}}) {
    const Claim cl = check_functoriality(*a, *b, cfg, 20, 1);
    CAPTURE(cl.primitive);
    CHECK(cl.passed);
    CHECK(cl.max_residual <= kFunctorialityTolerance);
  }
  const auto kg = only(dee, {"K", "G"}, "kg");
  CHECK(check_functoriality(kg, c, cfg, 20, 2).passed);
}

TEST_CASE("functoriality rejects an incompatible pair") {
  const auto sym = typed("theory s { signature { input: 3; output: 3; } "
                         "primitive S : Sym = group { degree: 3; generators: [perm(1 2 0)]; output_action: same; } }");
  const auto cons = typed("theory c { signature { input: 3; output: 3; } "
                          "primitive C : Cons = conserve { matrix: [[1, 0, 0]]; mode: preserve; } }");
  try {
    check_functoriality(sym, cons, SynthConfig{}, 5, 0);
    FAIL("compiled an incompatible pair");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingWitness);
  }
}
