#include <doctest.h>

#include <cmath>
#include <set>

#include "generators.hpp"
#include "oracles.hpp"
#include "theoryc/error.hpp"
#include "theoryc/interp.hpp"
#include "theoryc/rng.hpp"
#include "theoryc/synth.hpp"
#include "theoryc/typecheck.hpp"

using namespace theoryc;

namespace {

ArchGraph compiled(std::string_view text, SynthConfig cfg = {}) {
  const auto r = check_wellformed(parse_theory(text));
  REQUIRE(r.ok());
  return compile(*r.typed, cfg);
}

ParamSet curl_params(const ArchGraph& g, std::vector<double> a, std::vector<double> w, std::vector<double> v,
                     std::vector<double> c) {
  ParamSet p;
  for (const auto& n : g.nodes) {
    for (const auto& s : n.params) {
      const auto& src = s.role == "a" ? a : s.role == "w" ? w : s.role == "v" ? v : c;
      p[s.id] = Tensor{{static_cast<int>(src.size())}, src};
    }
  }
  return p;
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
  using B = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter draws are stateless and in range") {
  const CounterRng a(42), b(42), c(43);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = a.uniform(3, i);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    const double z = a.normal(5, i);
    sum += z;
    sq += z * z;
  }
  CHECK(a.uniform(7, 9) == b.uniform(7, 9));
  CHECK(a.uniform(7, 9) != c.uniform(7, 9));
  CHECK(a.uniform(7, 9) != a.uniform(7, 10));
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}

TEST_CASE("init_params is deterministic and bounded by the fan-in") {
  const ArchGraph g = compiled("theory e { signature { input: 3; output: 2; } }");
  const ParamSet p = init_params(g, 9);
  CHECK(p == init_params(g, 9));
  CHECK(p != init_params(g, 10));
  for (const auto& n : g.nodes) {
    for (const auto& s : n.params) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
      for (double v : p.at(s.id).data) CHECK(std::abs(v) <= bound);
    }
  }
}

TEST_CASE("dense evaluation matches a hand computation") {
  SynthConfig cfg;
  cfg.hidden_width = 2;
  const ArchGraph g = compiled("theory e { signature { input: 2; output: 1; } }", cfg);
  ParamSet p;
  // layer 1: W = [[1, 2], [0, -1]], b = [0.5, 0]; layer 2: W = [[3, -2]], b = [1]
  const auto& l1 = g.nodes[1].params;
  const auto& l2 = g.nodes[3].params;
  p[l1[0].id] = Tensor{{2, 2}, {1, 2, 0, -1}};
  p[l1[1].id] = Tensor{{2}, {0.5, 0}};
  p[l2[0].id] = Tensor{{1, 2}, {3, -2}};
  p[l2[1].id] = Tensor{{1}, {1}};
  const Evaluator ev(g, p);
  const std::vector<double> x{0.3, -0.7};
  const double h0 = std::tanh(0.3 - 1.4 + 0.5), h1 = std::tanh(0.7);
  CHECK(ev(x)[0] == doctest::Approx(3 * h0 - 2 * h1 + 1).epsilon(1e-15));
  CHECK(forward(g, p, Tensor::vector(x)).data == ev(x));
}

TEST_CASE("curl head with one unit gives (sech^2(y), 0)") {
  SynthConfig cfg;
  cfg.hidden_width = 1;
  const ArchGraph g = compiled("theory d { signature { input: 2; output: 2; } primitive U : Diff = divfree2d { } }", cfg);
  const Evaluator ev(g, curl_params(g, {1}, {0}, {1}, {0}));
  for (double y : {-1.5, 0.0, 0.25, 2.0}) {
    const auto out = ev(std::vector<double>{0.7, y});
    const double s = 1.0 / std::cosh(y);
    CHECK(out[0] == doctest::Approx(s * s).epsilon(1e-14));
    CHECK(out[1] == 0.0);
  }
}

TEST_CASE("property: finite differences agree with the analytic curl Jacobian") {
  SynthConfig cfg;
  cfg.hidden_width = 5;
  const ArchGraph g = compiled("theory d { signature { input: 2; output: 2; } primitive U : Diff = divfree2d { } }", cfg);
  gen::Rng rng(41);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 30; ++t) {
    std::vector<double> a(5), w(5), v(5), c(5);
    for (auto* vec : {&a, &w, &v, &c})
      for (auto& e : *vec) e = nd(rng);
    const Evaluator ev(g, curl_params(g, a, w, v, c));
    const std::vector<double> x{nd(rng), nd(rng)};
    const RealMatrix fd = ev.jacobian_fd(x, 1e-4);
    const auto exact = oracle::curl_jacobian(a, w, v, c, x[0], x[1]);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(std::abs(fd[i][j] - exact[i][j]) < 1e-6);
    CHECK(std::abs(exact[0][0] + exact[1][1]) < 1e-12);
  }
}

TEST_CASE("apply_perm moves entry i to position perm[i]") {
  const Tensor x = Tensor::vector({10, 20, 30});
  CHECK(apply_perm({2, 0, 1}, x).data == std::vector<double>{20, 30, 10});
  CHECK(apply_perm({0, 1, 2}, x) == x);
}

TEST_CASE("shape and finiteness errors") {
  const ArchGraph g = compiled("theory e { signature { input: 2; output: 2; } }");
  const Evaluator ev(g, init_params(g, 0));
  try {
    ev(std::vector<double>{1, 2, 3});
    FAIL("wrong input length accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  try {
    ev(std::vector<double>{std::nan(""), 0});
    FAIL("nan propagated silently");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteValue);
  }
}

TEST_CASE("nonlinearities") {
  CHECK(apply_nonlinearity("relu", -2) == 0);
  CHECK(apply_nonlinearity("relu", 2) == 2);
  CHECK(apply_nonlinearity("sigmoid", 0) == 0.5);
  CHECK(apply_nonlinearity("identity", -3) == -3);
  CHECK(is_known_nonlinearity("tanh"));
  CHECK_FALSE(is_known_nonlinearity("gelu"));
}

TEST_CASE("property: finite differences agree with the chain-rule Jacobian of a tanh MLP") {
  gen::Rng rng(42);
  for (int t = 0; t < 20; ++t) {
    SynthConfig cfg;
    cfg.hidden_width = gen::uniform(rng, 1, 6);
    const int n = gen::uniform(rng, 1, 5), m = gen::uniform(rng, 1, 4);
    const ArchGraph g = compiled("theory e { signature { input: " + std::to_string(n) + "; output: " +
                                     std::to_string(m) + "; } }",
                                 cfg);
    const ParamSet p = init_params(g, t);
    auto matrix = [&](const ParamSlot& s) {
      RealMatrix w(s.shape[0], RealVector(s.shape[1]));
      for (int r = 0; r < s.shape[0]; ++r)
        for (int c = 0; c < s.shape[1]; ++c) w[r][c] = p.at(s.id).data[r * s.shape[1] + c];
      return w;
    };
    const RealMatrix w1 = matrix(*g.nodes[1].slot("weight"));
    const RealMatrix w2 = matrix(*g.nodes[3].slot("weight"));
    const auto b1 = p.at(g.nodes[1].slot("bias")->id).data;
    const CounterRng xr(t);
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = xr.normal(1, i);
    const RealMatrix fd = jacobian_fd(g, p, Tensor::vector(x), 1e-4);
    const RealMatrix exact = oracle::mlp_jacobian(w1, b1, w2, x);
    for (int r = 0; r < m; ++r)
      for (int i = 0; i < n; ++i) CHECK(std::abs(fd[r][i] - exact[r][i]) <= 1e-6);
  }
}

TEST_CASE("property: forward is pure and sequential composition is nested evaluation") {
  gen::Rng rng(43);
  for (int t = 0; t < 20; ++t) {
    SynthConfig cfg;
    cfg.hidden_width = 3;
    const int n = gen::uniform(rng, 1, 4), k = gen::uniform(rng, 1, 4), m = gen::uniform(rng, 1, 4);
    const ArchGraph g1 = compiled("theory a { signature { input: " + std::to_string(n) + "; output: " +
                                      std::to_string(k) + "; } }", cfg);
    const ArchGraph g2 = compiled("theory b { signature { input: " + std::to_string(k) + "; output: " +
                                      std::to_string(m) + "; } }", cfg);
    const ArchGraph g3 = compiled("theory c { signature { input: " + std::to_string(m) + "; output: 2; } }", cfg);
    const ParamSet p1 = init_params(g1, 1), p2 = init_params(g2, 2), p3 = init_params(g3, 3);
    const int shift = g1.next_slot_id();
    ParamSet p12 = p1;
    for (const auto& [id, v] : p2) p12[id + shift] = v;

    const ArchGraph g12 = compose_sequential(g1, g2);
    const CounterRng xr(t);
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = xr.normal(0, i);
    const auto nested = Evaluator(g2, p2)(Evaluator(g1, p1)(x));
    CHECK(Evaluator(g12, p12)(x) == nested);
    CHECK(Evaluator(g12, p12)(x) == Evaluator(g12, p12)(x));

    // associativity, functionally
    ParamSet left = p12, right;
    for (const auto& [id, v] : p3) left[id + g12.next_slot_id()] = v;
    const ArchGraph g23 = compose_sequential(g2, g3);
    right = p1;
    ParamSet p23 = p2;
    for (const auto& [id, v] : p3) p23[id + g2.next_slot_id()] = v;
    for (const auto& [id, v] : p23) right[id + shift] = v;
    const auto a = Evaluator(compose_sequential(g12, g3), left)(x);
    const auto b = Evaluator(compose_sequential(g1, g23), right)(x);
    CHECK(a == b);
  }
}
