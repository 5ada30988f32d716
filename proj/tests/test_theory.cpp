#include <doctest.h>

#include <fstream>
#include <sstream>

#include "generators.hpp"
#include "theoryc/error.hpp"
#include "theoryc/theory.hpp"

using namespace theoryc;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(THEORIES_DIR) + "/" + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode parse_code(std::string_view text) {
  try {
    parse_theory(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("parse unexpectedly succeeded");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("dee corpus file has a causal graph, a conservation law and a symmetry") {
  const TheorySpec s = parse_theory(slurp("dee.thy"));
  CHECK(s.name == "dee");
  REQUIRE(s.primitives.size() == 3);
  CHECK(s.primitives[0].kind == PrimitiveKind::Caus);
  CHECK(s.primitives[1].kind == PrimitiveKind::Cons);
  CHECK(s.primitives[2].kind == PrimitiveKind::Sym);
  const auto& dag = std::get<CausalGraph>(s.primitives[0].payload);
  CHECK(dag.num_vars == 12);
  const auto& law = std::get<ConservationLaw>(s.primitives[1].payload);
  CHECK(law.matrix == RealMatrix{RealVector(12, 1.0)});
  CHECK(law.mode == ConservationMode::Preserve);
  REQUIRE(s.relations.size() == 1);
  CHECK(s.relations[0].args == std::vector<std::string>{"K", "C"});
}

TEST_CASE("every corpus file round-trips") {
  for (const char* f : {"dee.thy", "c4.thy", "s3.thy", "divfree.thy", "empty.thy"}) {
    CAPTURE(f);
    const TheorySpec s = parse_theory(slurp(f));
    CHECK(parse_theory(serialize_theory(s)) == s);
  }
}

TEST_CASE("permutations use image notation") {
  const auto s = parse_theory(
      "theory p { signature { input: 3; output: 3; }\n"
      "primitive S : Sym = group { degree: 3; generators: [perm(2 0 1)]; output_action: invariant; } }");
  const auto& g = std::get<SymmetryGroup>(s.primitives[0].payload);
  CHECK(g.generators[0] == Permutation{2, 0, 1});
  CHECK(g.output_action == OutputAction::Invariant);
}

TEST_CASE("fix mode, explicit input matrix and variable names") {
  const auto s = parse_theory(
      "theory q {\n"
      "  signature { input: 2; output: 3; names: [\"a b\", \"q\\\"\"]; }  // trailing comment\n"
      "  primitive F : Cons = conserve { matrix: [[1, -0.5, 2e-3]]; mode: fix [4.25]; }\n"
      "  primitive P : Cons = conserve { matrix: [[0, 1, 0]]; mode: preserve [[1, 1]]; }\n"
      "}\n");
  REQUIRE(s.signature.variable_names);
  CHECK((*s.signature.variable_names)[1] == "q\"");
  const auto& f = std::get<ConservationLaw>(s.primitives[0].payload);
  CHECK(f.mode == ConservationMode::Fix);
  CHECK(f.matrix[0][2] == 2e-3);
  CHECK(f.target == RealVector{4.25});
  const auto& p = std::get<ConservationLaw>(s.primitives[1].payload);
  REQUIRE(p.input_matrix);
  CHECK(*p.input_matrix == RealMatrix{{1, 1}});
}

TEST_CASE("syntax errors carry a location") {
  try {
    parse_theory("theory x {\n  signature { input: 2 output: 2; }\n}");
    FAIL("expected a syntax error");
  } catch (const ParseError& e) {
    CHECK(e.code() == ErrorCode::SyntaxError);
    CHECK(e.line() == 2);
    CHECK(e.column() > 1);
  }
  CHECK(parse_code("theory x { signature { input: 2; output: 2; }") == ErrorCode::SyntaxError);
  CHECK(parse_code("theory x { signature { input: 2; output: 2; } } trailing") == ErrorCode::SyntaxError);
  CHECK(parse_code("theory x { signature { input: 2.5; output: 2; } }") == ErrorCode::SyntaxError);
  CHECK(parse_code("") == ErrorCode::SyntaxError);
}

TEST_CASE("duplicate names and unknown kinds") {
  CHECK(parse_code("theory x { signature { input: 2; output: 2; }"
                   " primitive U : Diff = divfree2d { } primitive U : Diff = divfree2d { } }") ==
        ErrorCode::DuplicateName);
  CHECK(parse_code("theory x { signature { input: 2; output: 2; } primitive U : Flux = divfree2d { } }") ==
        ErrorCode::UnknownKind);
}

TEST_CASE("kind keyword must agree with the payload") {
  CHECK(parse_code("theory x { signature { input: 2; output: 2; } primitive U : Sym = divfree2d { } }") ==
        ErrorCode::SyntaxError);
}

TEST_CASE("property: parse(serialize(s)) == s on random specs") {
  gen::Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const TheorySpec s = gen::random_spec(rng);
    const std::string text = serialize_theory(s);
    CAPTURE(text);
    const TheorySpec back = parse_theory(text);
    CHECK(back == s);
    CHECK(serialize_theory(back) == text);
  }
}
