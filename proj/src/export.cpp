#include "theoryc/export.hpp"

#include <json.hpp>

#include "theoryc/error.hpp"
#include "theoryc/rng.hpp"

namespace theoryc {

namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kPythonHeader = R"PY("""Compiled model exported by theoryc.

Standalone float64 forward pass; the graph, sharing patterns, masks,
projection matrices and parameter values live in METADATA.
"""
import json
import math
import sys

)PY";

constexpr const char* kPythonBody = R"PY(
_META = json.loads(METADATA)
ARCHIR_SHA256 = _META["archir_sha256"]
SEED = _META["seed"]
INPUT_DIM = _META["graph"]["input_dim"]
OUTPUT_DIM = _META["graph"]["output_dim"]


def _activate(name, v):
    if name == "tanh":
        return math.tanh(v)
    if name == "relu":
        return v if v > 0.0 else 0.0
    if name == "sigmoid":
        return 1.0 / (1.0 + math.exp(-v))
    return v


def _topological_order(nodes, edges):
    index = {n["id"]: i for i, n in enumerate(nodes)}
    indegree = [0] * len(nodes)
    out = [[] for _ in nodes]
    for e in edges:
        out[index[e["from"]]].append(index[e["to"]])
        indegree[index[e["to"]]] += 1
    ready = sorted(i for i, d in enumerate(indegree) if d == 0)
    order = []
    while ready:
        i = ready.pop(0)
        order.append(i)
        for t in out[i]:
            indegree[t] -= 1
            if indegree[t] == 0:
                ready.append(t)
                ready.sort()
    if len(order) != len(nodes):
        raise ValueError("graph contains a cycle")
    return order


class Model:
    def __init__(self, meta=_META):
        graph = meta["graph"]
        values = {p["id"]: p["data"] for p in meta["params"]}
        self.input_dim = graph["input_dim"]
        self.output_dim = graph["output_dim"]
        nodes = graph["nodes"]
        self.steps = []
        slot_of = {}
        for i in _topological_order(nodes, graph["edges"]):
            node = nodes[i]
            inputs = sorted((e["port"], e["from"]) for e in graph["edges"] if e["to"] == node["id"])
            step = {"kind": node["kind"], "id": node["id"], "inputs": [slot_of[f] for _, f in inputs],
                    "width_in": node["width_in"], "width_out": node["width_out"]}
            slots = {s["role"]: values[s["id"]] for s in node["params"]}
            kind = node["kind"]
            if kind in ("Dense", "MaskedDense"):
                w = list(slots["weight"])
                if kind == "MaskedDense":
                    cols = node["width_in"]
                    for r, row in enumerate(node["mask"]):
                        for c, bit in enumerate(row):
                            if not bit:
                                w[r * cols + c] = 0.0
                step["weight"] = w
                step["bias"] = list(slots["bias"])
            elif kind == "SharedLinear":
                shared = slots["weight"]
                step["weight"] = [shared[k] if k >= 0 else 0.0 for row in node["pattern"] for k in row]
                step["bias"] = [slots["bias"][k] for k in node["bias_pattern"]]
            elif kind == "Pointwise":
                step["nonlinearity"] = node["nonlinearity"]
            elif kind == "Projection":
                for key in ("matrix", "input_matrix", "offset", "correction"):
                    step[key] = node[key]
            elif kind == "CurlHead":
                for key in ("a", "w", "v", "c"):
                    step[key] = slots[key]
            slot_of[node["id"]] = len(self.steps)
            self.steps.append(step)

    def forward(self, x):
        x = [float(v) for v in x]
        if len(x) != self.input_dim:
            raise ValueError("expected %d inputs, got %d" % (self.input_dim, len(x)))
        values = []
        result = None
        for s in self.steps:
            ins = [values[k] for k in s["inputs"]]
            kind = s["kind"]
            if kind == "Input":
                y = list(x)
            elif kind == "Output":
                y = list(ins[0])
                result = y
            elif kind in ("Dense", "MaskedDense", "SharedLinear"):
                xin = ins[0]
                cols = s["width_in"]
                w = s["weight"]
                y = []
                for r in range(s["width_out"]):
                    acc = s["bias"][r]
                    base = r * cols
                    for c in range(cols):
                        acc += w[base + c] * xin[c]
                    y.append(acc)
            elif kind == "Pointwise":
                y = [_activate(s["nonlinearity"], v) for v in ins[0]]
            elif kind == "Projection":
                yhat = ins[0]
                residual = []
                for r, row in enumerate(s["matrix"]):
                    t = s["offset"][r]
                    if s["input_matrix"]:
                        for i, a in enumerate(s["input_matrix"][r]):
                            t += a * ins[1][i]
                    ay = 0.0
                    for j, a in enumerate(row):
                        ay += a * yhat[j]
                    residual.append(t - ay)
                y = list(yhat)
                for j in range(len(y)):
                    corr = 0.0
                    for r, d in enumerate(s["correction"][j]):
                        corr += d * residual[r]
                    y[j] += corr
            elif kind == "CurlHead":
                px, py = ins[0]
                u = 0.0
                v = 0.0
                for a, w, vv, c in zip(s["a"], s["w"], s["v"], s["c"]):
                    t = math.tanh(w * px + vv * py + c)
                    sech2 = 1.0 - t * t
                    u += a * vv * sech2
                    v += a * w * sech2
                y = [u, -v]
            elif kind == "Concat":
                y = [v for part in ins for v in part]
            else:
                raise ValueError("unknown node kind " + kind)
            for v in y:
                if not math.isfinite(v):
                    raise ArithmeticError("non-finite value produced by node %d" % s["id"])
            values.append(y)
        return result


_MODEL = Model()


def forward(x):
    return _MODEL.forward(x)


if __name__ == "__main__":
    with open(sys.argv[1]) as fh:
        cases = json.load(fh)
    json.dump([forward(x) for x in cases], sys.stdout)
    sys.stdout.write("\n")
)PY";

ojson params_json(const ParamSet& params) {
  ojson out = ojson::array();
  for (const auto& [id, t] : params) out.push_back({{"id", id}, {"shape", t.shape}, {"data", t.data}});
  return out;
}

}  // namespace

std::string export_metadata(const ArchGraph& g, const ParamSet& params, std::uint64_t seed) {
  ojson meta;
  meta["format"] = "theoryc-model";
  const std::string archir = serialize_archir(g);
  meta["archir_sha256"] = sha256_hex(archir);
  meta["seed"] = seed;
  meta["graph"] = ojson::parse(archir);
  meta["params"] = params_json(params);
  return meta.dump();
}

std::string reference_vectors(const ArchGraph& g, const ParamSet& params, std::uint64_t seed, int count) {
  const Evaluator ev(g, params);
  const CounterRng rng(derive_seed(seed, 0x7265667300ULL));
  ojson inputs = ojson::array();
  ojson outputs = ojson::array();
  for (int k = 0; k < count; ++k) {
    std::vector<double> x(g.input_dim);
    for (int i = 0; i < g.input_dim; ++i) x[i] = rng.normal(static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i));
    outputs.push_back(ev(x));
    inputs.push_back(std::move(x));
  }
  ojson doc;
  doc["inputs"] = std::move(inputs);
  doc["outputs"] = std::move(outputs);
  doc["seed"] = seed;
  doc["archir_sha256"] = sha256_hex(serialize_archir(g));
  return doc.dump() + "\n";
}

ExportBundle export_model(const ArchGraph& g, std::string_view target, std::uint64_t seed, int reference_cases) {
  if (target != "python") throw Error(ErrorCode::UnsupportedTarget, "unsupported export target '" + std::string(target) + "'");
  if (const auto issues = validate_graph(g); !issues.empty()) {
    throw Error(ErrorCode::InvalidGraph, "cannot export an invalid graph: " + issues.front().detail);
  }
  const ParamSet params = init_params(g, seed);
  ExportBundle b;
  b.source = kPythonHeader;
  b.source += "METADATA = " + ojson(export_metadata(g, params, seed)).dump() + "\n";
  b.source += kPythonBody;
  b.refs = reference_vectors(g, params, seed, reference_cases);
  return b;
}

}  // namespace theoryc
