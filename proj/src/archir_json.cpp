#include <json.hpp>

#include "theoryc/archir.hpp"
#include "theoryc/error.hpp"

namespace theoryc {

using ojson = nlohmann::ordered_json;

namespace {

ojson node_json(const LayerNode& n) {
  ojson j;
  j["id"] = n.id;
  j["kind"] = std::string(to_string(n.kind()));
  j["width_in"] = n.width_in;
  j["width_out"] = n.width_out;
  ojson params = ojson::array();
  for (const auto& s : n.params) {
    params.push_back({{"id", s.id}, {"role", s.role}, {"shape", s.shape}, {"fan_in", s.fan_in}});
  }
  j["params"] = std::move(params);
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, SharedLinearNode>) {
          j["pattern"] = d.pattern;
          j["bias_pattern"] = d.bias_pattern;
        } else if constexpr (std::is_same_v<T, MaskedDenseNode>) {
          ojson mask = ojson::array();
          for (const auto& row : d.mask) mask.push_back(std::vector<int>(row.begin(), row.end()));
          j["mask"] = std::move(mask);
        } else if constexpr (std::is_same_v<T, ProjectionNode>) {
          j["matrix"] = d.matrix;
          j["input_matrix"] = d.input_matrix;
          j["offset"] = d.offset;
          j["correction"] = d.correction;
          j["row_sources"] = d.row_sources;
        } else if constexpr (std::is_same_v<T, PointwiseNode>) {
          j["nonlinearity"] = d.nonlinearity;
        } else if constexpr (std::is_same_v<T, CurlHeadNode>) {
          j["features"] = d.features;
        } else if constexpr (std::is_same_v<T, ConcatNode>) {
          j["part_widths"] = d.part_widths;
        }
      },
      n.data);
  return j;
}

NodeKind kind_from_string(const std::string& s) {
  for (auto k : {NodeKind::Input, NodeKind::Dense, NodeKind::SharedLinear, NodeKind::Projection, NodeKind::MaskedDense,
                 NodeKind::Pointwise, NodeKind::CurlHead, NodeKind::Concat, NodeKind::Output}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidGraph, "unknown node kind '" + s + "'");
}

LayerNode node_from_json(const ojson& j) {
  LayerNode n;
  n.id = j.at("id").get<int>();
  n.width_in = j.at("width_in").get<int>();
  n.width_out = j.at("width_out").get<int>();
  for (const auto& s : j.at("params")) {
    n.params.push_back(ParamSlot{s.at("id").get<int>(), s.at("role").get<std::string>(),
                                 s.at("shape").get<std::vector<int>>(), s.at("fan_in").get<int>()});
  }
  switch (kind_from_string(j.at("kind").get<std::string>())) {
    case NodeKind::Input: n.data = InputNode{}; break;
    case NodeKind::Output: n.data = OutputNode{}; break;
    case NodeKind::Dense: n.data = DenseNode{}; break;
    case NodeKind::SharedLinear:
      n.data = SharedLinearNode{j.at("pattern").get<std::vector<std::vector<int>>>(),
                                j.at("bias_pattern").get<std::vector<int>>()};
      break;
    case NodeKind::MaskedDense: {
      MaskedDenseNode m;
      for (const auto& row : j.at("mask")) {
        std::vector<std::uint8_t> r;
        for (const auto& v : row) {
          const int bit = v.get<int>();
          if (bit != 0 && bit != 1) throw Error(ErrorCode::InvalidGraph, "mask entries must be 0 or 1");
          r.push_back(static_cast<std::uint8_t>(bit));
        }
        m.mask.push_back(std::move(r));
      }
      n.data = std::move(m);
      break;
    }
    case NodeKind::Projection:
      n.data = ProjectionNode{j.at("matrix").get<RealMatrix>(), j.at("input_matrix").get<RealMatrix>(),
                              j.at("offset").get<RealVector>(), j.at("correction").get<RealMatrix>(),
                              j.at("row_sources").get<std::vector<std::string>>()};
      break;
    case NodeKind::Pointwise: n.data = PointwiseNode{j.at("nonlinearity").get<std::string>()}; break;
    case NodeKind::CurlHead: n.data = CurlHeadNode{j.at("features").get<int>()}; break;
    case NodeKind::Concat: n.data = ConcatNode{j.at("part_widths").get<std::vector<int>>()}; break;
  }
  return n;
}

}  // namespace

std::string serialize_archir(const ArchGraph& g) {
  ojson doc;
  doc["archir_version"] = kArchirVersion;
  doc["input_dim"] = g.input_dim;
  doc["output_dim"] = g.output_dim;
  doc["loss"] = {{"kind", g.loss.kind == LossKind::MSE ? "mse" : "cross_entropy"}, {"note", g.loss.note}};
  ojson nodes = ojson::array();
  for (const auto& n : g.nodes) nodes.push_back(node_json(n));
  doc["nodes"] = std::move(nodes);
  ojson edges = ojson::array();
  for (const auto& e : g.edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"port", e.port}});
  doc["edges"] = std::move(edges);
  ojson prov = ojson::array();
  for (const auto& [id, entries] : g.provenance) {
    ojson list = ojson::array();
    for (const auto& e : entries) list.push_back({{"primitive", e.primitive}, {"rule", e.rule}});
    prov.push_back({{"node", id}, {"entries", std::move(list)}});
  }
  doc["provenance"] = std::move(prov);
  return doc.dump() + "\n";
}

ArchGraph parse_archir(std::string_view text) {
  try {
    const ojson doc = ojson::parse(text);
    if (doc.at("archir_version").get<int>() != kArchirVersion) {
      throw Error(ErrorCode::InvalidGraph, "unsupported archir_version");
    }
    ArchGraph g;
    g.input_dim = doc.at("input_dim").get<int>();
    g.output_dim = doc.at("output_dim").get<int>();
    const auto& loss = doc.at("loss");
    const auto loss_kind = loss.at("kind").get<std::string>();
    if (loss_kind != "mse" && loss_kind != "cross_entropy") throw Error(ErrorCode::InvalidGraph, "unknown loss kind");
    g.loss = {loss_kind == "mse" ? LossKind::MSE : LossKind::CrossEntropy, loss.at("note").get<std::string>()};
    for (const auto& n : doc.at("nodes")) g.nodes.push_back(node_from_json(n));
    for (const auto& e : doc.at("edges")) {
      g.edges.push_back({e.at("from").get<int>(), e.at("to").get<int>(), e.at("port").get<int>()});
    }
    for (const auto& p : doc.at("provenance")) {
      auto& entries = g.provenance[p.at("node").get<int>()];
      for (const auto& e : p.at("entries")) {
        entries.push_back({e.at("primitive").get<std::string>(), e.at("rule").get<std::string>()});
      }
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidGraph, e.what());
  }
}

}  // namespace theoryc
