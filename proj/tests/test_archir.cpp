#include <doctest.h>

#include <json.hpp>

#include "generators.hpp"
#include "theoryc/archir.hpp"
#include "theoryc/error.hpp"
#include "theoryc/synth.hpp"
#include "theoryc/typecheck.hpp"

using namespace theoryc;

namespace {

ArchGraph compiled(const TheorySpec& s, SynthConfig cfg = {}) {
  const auto r = check_wellformed(s);
  REQUIRE(r.ok());
  return compile(*r.typed, cfg);
}

bool flags(const ArchGraph& g, GraphIssue issue) {
  for (const auto& d : validate_graph(g))
    if (d.issue == issue) return true;
  return false;
}

ArchGraph small_dense() {
  SynthConfig cfg;
  cfg.hidden_width = 3;
  return compiled(parse_theory("theory e { signature { input: 2; output: 2; } }"), cfg);
}

}  // namespace

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("free graph shape: Input, Dense, Pointwise, Dense, Output") {
  const ArchGraph g = small_dense();
  REQUIRE(g.nodes.size() == 5);
  CHECK(g.nodes[1].kind() == NodeKind::Dense);
  CHECK(g.nodes[2].kind() == NodeKind::Pointwise);
  CHECK(g.nodes[3].kind() == NodeKind::Dense);
  CHECK(validate_graph(g).empty());
}

TEST_CASE("property: serialise then parse is the identity on compiled graphs") {
  gen::Rng rng(31);
  SynthConfig cfg;
  cfg.hidden_width = 4;
  for (int i = 0; i < 40; ++i) {
    const ArchGraph g = compiled(gen::random_compilable(rng), cfg);
    const std::string text = serialize_archir(g);
    const ArchGraph back = parse_archir(text);
    CHECK(back == g);
    CHECK(serialize_archir(back) == text);
    CHECK(nlohmann::json::parse(text)["archir_version"] == kArchirVersion);
  }
}

TEST_CASE("parse rejects schema violations") {
  CHECK_THROWS_AS(parse_archir("not json"), Error);
  CHECK_THROWS_AS(parse_archir("{}"), Error);
  auto j = nlohmann::json::parse(serialize_archir(small_dense()));
  j["archir_version"] = 99;
  try {
    parse_archir(j.dump());
    FAIL("version accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidGraph);
  }
}

TEST_CASE("validation catches structural faults") {
  const ArchGraph good = small_dense();
  {
    ArchGraph g = good;
    g.edges.push_back({3, 1, 0});
    CHECK(flags(g, GraphIssue::PortConflict));
  }
  {
    ArchGraph g = good;
    g.nodes[3].width_in = 5;
    CHECK(flags(g, GraphIssue::WidthMismatch));
  }
  {
    ArchGraph g = good;
    g.nodes[3].params[0].id = g.nodes[1].params[0].id;
    CHECK(flags(g, GraphIssue::DuplicateSlotId));
  }
  {
    ArchGraph g = good;
    g.edges.erase(g.edges.begin());
    CHECK(flags(g, GraphIssue::PortUnconnected));
  }
  {
    ArchGraph g = good;
    g.nodes[2].id = 1;
    CHECK(flags(g, GraphIssue::DuplicateNodeId));
  }
  {
    ArchGraph g = good;
    g.edges.push_back({9, 4, 1});
    CHECK(flags(g, GraphIssue::UnknownNode));
  }
}

TEST_CASE("validation catches bad sharing patterns and masks") {
  const ArchGraph c4 = compiled(parse_theory(
      "theory c { signature { input: 4; output: 4; } "
      "primitive R : Sym = group { degree: 4; generators: [perm(1 2 3 0)]; output_action: same; } }"));
  ArchGraph g = c4;
  for (auto& n : g.nodes) {
    if (auto* s = std::get_if<SharedLinearNode>(&n.data)) {
      s->pattern[0][0] = 100000;
      break;
    }
  }
  CHECK(flags(g, GraphIssue::BadSharingPattern));

  const ArchGraph chain = compiled(parse_theory(
      "theory c { signature { input: 3; output: 3; } primitive G : Caus = dag { vars: 3; edges: [(0,1)]; } }"));
  g = chain;
  for (auto& n : g.nodes) {
    if (auto* m = std::get_if<MaskedDenseNode>(&n.data)) {
      m->mask[0][0] = 7;
      break;
    }
  }
  CHECK(flags(g, GraphIssue::BadMask));
}

TEST_CASE("a projection with dependent rows is rejected") {
  ArchGraph g = compiled(parse_theory(
      "theory c { signature { input: 3; output: 3; } "
      "primitive C : Cons = conserve { matrix: [[1, 1, 1], [1, 0, 0]]; mode: preserve; } }"));
  for (auto& n : g.nodes) {
    if (auto* p = std::get_if<ProjectionNode>(&n.data)) p->matrix[1] = p->matrix[0];
  }
  CHECK(flags(g, GraphIssue::RankDeficientProjection));
}

TEST_CASE("sequential composition chains graphs and shifts slot ids") {
  const ArchGraph a = small_dense();
  const ArchGraph b = small_dense();
  const ArchGraph ab = compose_sequential(a, b);
  CHECK(validate_graph(ab).empty());
  CHECK(ab.input_dim == 2);
  CHECK(ab.next_slot_id() == a.next_slot_id() + b.next_slot_id());
  const auto order = ab.topological_order();
  REQUIRE(order);
  CHECK(ab.find(order->front())->kind() == NodeKind::Input);
  CHECK(ab.find(order->back())->kind() == NodeKind::Output);
}

TEST_CASE("a cycle has no topological order") {
  ArchGraph g = small_dense();
  g.edges.push_back({3, 2, 1});
  CHECK_FALSE(g.topological_order());
}
