#include "theoryc/archir.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>
#include <queue>
#include <set>

#include "theoryc/error.hpp"

namespace theoryc {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Input: return "Input";
    case NodeKind::Dense: return "Dense";
    case NodeKind::SharedLinear: return "SharedLinear";
    case NodeKind::Projection: return "Projection";
    case NodeKind::MaskedDense: return "MaskedDense";
    case NodeKind::Pointwise: return "Pointwise";
    case NodeKind::CurlHead: return "CurlHead";
    case NodeKind::Concat: return "Concat";
    case NodeKind::Output: return "Output";
  }
  return "?";
}

std::string_view to_string(GraphIssue issue) {
  switch (issue) {
    case GraphIssue::CyclicGraph: return "CyclicGraph";
    case GraphIssue::WidthMismatch: return "WidthMismatch";
    case GraphIssue::InputCount: return "InputCount";
    case GraphIssue::OutputCount: return "OutputCount";
    case GraphIssue::UnknownNode: return "UnknownNode";
    case GraphIssue::DuplicateNodeId: return "DuplicateNodeId";
    case GraphIssue::PortUnconnected: return "PortUnconnected";
    case GraphIssue::PortConflict: return "PortConflict";
    case GraphIssue::BadSharingPattern: return "BadSharingPattern";
    case GraphIssue::BadMask: return "BadMask";
    case GraphIssue::RankDeficientProjection: return "RankDeficientProjection";
    case GraphIssue::SlotShapeMismatch: return "SlotShapeMismatch";
    case GraphIssue::DuplicateSlotId: return "DuplicateSlotId";
  }
  return "?";
}

NodeKind LayerNode::kind() const {
  static constexpr std::array kKinds = {NodeKind::Input,       NodeKind::Dense,     NodeKind::SharedLinear,
                                        NodeKind::Projection,  NodeKind::MaskedDense, NodeKind::Pointwise,
                                        NodeKind::CurlHead,    NodeKind::Concat,    NodeKind::Output};
  return kKinds[data.index()];
}

const ParamSlot* LayerNode::slot(std::string_view role) const {
  for (const auto& s : params) {
    if (s.role == role) return &s;
  }
  return nullptr;
}

const LayerNode* ArchGraph::find(int id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

LayerNode* ArchGraph::find(int id) {
  for (auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

std::vector<int> ArchGraph::producers(int id) const {
  std::vector<std::pair<int, int>> by_port;
  for (const auto& e : edges) {
    if (e.to == id) by_port.emplace_back(e.port, e.from);
  }
  std::sort(by_port.begin(), by_port.end());
  std::vector<int> out;
  for (auto [port, from] : by_port) out.push_back(from);
  return out;
}

std::vector<int> ArchGraph::consumers(int id) const {
  std::vector<int> out;
  for (const auto& e : edges) {
    if (e.from == id) out.push_back(e.to);
  }
  return out;
}

std::optional<std::vector<int>> ArchGraph::topological_order() const {
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i].id] = i;
  std::vector<int> indegree(nodes.size(), 0);
  std::vector<std::vector<std::size_t>> out(nodes.size());
  for (const auto& e : edges) {
    auto f = index.find(e.from);
    auto t = index.find(e.to);
    if (f == index.end() || t == index.end()) continue;
    out[f->second].push_back(t->second);
    ++indegree[t->second];
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    order.push_back(nodes[i].id);
    for (std::size_t t : out[i]) {
      if (--indegree[t] == 0) ready.push(t);
    }
  }
  if (order.size() != nodes.size()) return std::nullopt;
  return order;
}

int ArchGraph::next_slot_id() const {
  int next = 0;
  for (const auto& n : nodes) {
    for (const auto& s : n.params) next = std::max(next, s.id + 1);
  }
  return next;
}

int ArchGraph::next_node_id() const {
  int next = 0;
  for (const auto& n : nodes) next = std::max(next, n.id + 1);
  return next;
}

namespace {

void issue(std::vector<GraphDiagnostic>& out, GraphIssue what, int node, std::string detail) {
  out.push_back({what, node, std::move(detail)});
}

// Declared input width of each port.
std::vector<int> port_widths(const LayerNode& n) {
  switch (n.kind()) {
    case NodeKind::Input: return {};
    case NodeKind::Projection: {
      const auto& p = std::get<ProjectionNode>(n.data);
      std::vector<int> w{n.width_out};
      if (!p.input_matrix.empty()) w.push_back(static_cast<int>(p.input_matrix[0].size()));
      return w;
    }
    case NodeKind::Concat: return std::get<ConcatNode>(n.data).part_widths;
    default: return {n.width_in};
  }
}

std::vector<std::pair<std::string, std::vector<int>>> expected_slots(const LayerNode& n) {
  switch (n.kind()) {
    case NodeKind::Dense:
    case NodeKind::MaskedDense:
      return {{"weight", {n.width_out, n.width_in}}, {"bias", {n.width_out}}};
    case NodeKind::SharedLinear: {
      const auto& s = std::get<SharedLinearNode>(n.data);
      int wmax = -1;
      for (const auto& row : s.pattern) {
        for (int v : row) wmax = std::max(wmax, v);
      }
      int bmax = -1;
      for (int v : s.bias_pattern) bmax = std::max(bmax, v);
      return {{"weight", {wmax + 1}}, {"bias", {bmax + 1}}};
    }
    case NodeKind::CurlHead: {
      const int m = std::get<CurlHeadNode>(n.data).features;
      return {{"a", {m}}, {"w", {m}}, {"v", {m}}, {"c", {m}}};
    }
    default: return {};
  }
}

// Every id in [0, count) used at least once and nothing outside [-1, count).
bool is_partition(const std::vector<int>& ids, bool allow_masked) {
  int count = 0;
  for (int v : ids) count = std::max(count, v + 1);
  std::vector<bool> used(static_cast<std::size_t>(count), false);
  for (int v : ids) {
    if (v < -1 || (v == -1 && !allow_masked)) return false;
    if (v >= 0) used[v] = true;
  }
  return std::all_of(used.begin(), used.end(), [](bool b) { return b; });
}

void validate_node(const LayerNode& n, std::vector<GraphDiagnostic>& out) {
  if (n.width_in < 1 || n.width_out < 1) issue(out, GraphIssue::WidthMismatch, n.id, "widths must be positive");
  switch (n.kind()) {
    case NodeKind::Pointwise:
    case NodeKind::Output:
    case NodeKind::Input:
    case NodeKind::Projection:
      if (n.width_in != n.width_out) issue(out, GraphIssue::WidthMismatch, n.id, "width_in must equal width_out");
      break;
    case NodeKind::CurlHead:
      if (n.width_in != 2 || n.width_out != 2) issue(out, GraphIssue::WidthMismatch, n.id, "CurlHead maps R^2 to R^2");
      if (std::get<CurlHeadNode>(n.data).features < 1)
        issue(out, GraphIssue::SlotShapeMismatch, n.id, "CurlHead needs at least one feature");
      break;
    case NodeKind::Concat: {
      const auto& parts = std::get<ConcatNode>(n.data).part_widths;
      const int total = std::accumulate(parts.begin(), parts.end(), 0);
      if (parts.empty() || total != n.width_out)
        issue(out, GraphIssue::WidthMismatch, n.id, "concat part widths must sum to width_out");
      break;
    }
    case NodeKind::SharedLinear: {
      const auto& s = std::get<SharedLinearNode>(n.data);
      bool shape = static_cast<int>(s.pattern.size()) == n.width_out &&
                   static_cast<int>(s.bias_pattern.size()) == n.width_out;
      std::vector<int> flat;
      for (const auto& row : s.pattern) {
        shape = shape && static_cast<int>(row.size()) == n.width_in;
        flat.insert(flat.end(), row.begin(), row.end());
      }
      if (!shape) {
        issue(out, GraphIssue::BadSharingPattern, n.id, "sharing pattern shape differs from node widths");
      } else if (!is_partition(flat, true) || !is_partition(s.bias_pattern, false)) {
        issue(out, GraphIssue::BadSharingPattern, n.id, "sharing pattern is not a partition of the allowed entries");
      }
      break;
    }
    case NodeKind::MaskedDense: {
      const auto& m = std::get<MaskedDenseNode>(n.data).mask;
      bool ok = static_cast<int>(m.size()) == n.width_out;
      for (const auto& row : m) {
        ok = ok && static_cast<int>(row.size()) == n.width_in;
        for (auto v : row) ok = ok && v <= 1;
      }
      if (!ok) issue(out, GraphIssue::BadMask, n.id, "mask must be a width_out x width_in 0/1 matrix");
      break;
    }
    default: break;
  }
  if (n.kind() == NodeKind::Projection) {
    const auto& p = std::get<ProjectionNode>(n.data);
    const std::size_t k = p.matrix.size();
    bool ok = k >= 1 && p.offset.size() == k && p.correction.size() == static_cast<std::size_t>(n.width_out) &&
              p.row_sources.size() == k && (p.input_matrix.empty() || p.input_matrix.size() == k);
    for (const auto& row : p.matrix) ok = ok && static_cast<int>(row.size()) == n.width_out;
    for (const auto& row : p.correction) ok = ok && row.size() == k;
    for (const auto& row : p.input_matrix) ok = ok && !p.input_matrix.empty() && row.size() == p.input_matrix[0].size();
    if (!ok) {
      issue(out, GraphIssue::WidthMismatch, n.id, "projection matrices have inconsistent shapes");
    } else if (numerical_rank(p.matrix) != static_cast<int>(k)) {
      issue(out, GraphIssue::RankDeficientProjection, n.id, "projection matrix is not full row rank");
    }
  }

  const auto expected = expected_slots(n);
  bool slots_ok = expected.size() == n.params.size();
  for (std::size_t i = 0; slots_ok && i < expected.size(); ++i) {
    slots_ok = n.params[i].role == expected[i].first && n.params[i].shape == expected[i].second &&
               n.params[i].fan_in >= 1;
  }
  if (!slots_ok) issue(out, GraphIssue::SlotShapeMismatch, n.id, "parameter slots do not match the node kind");
}

}  // namespace

std::vector<GraphDiagnostic> validate_graph(const ArchGraph& g) {
  std::vector<GraphDiagnostic> out;
  std::set<int> ids;
  std::set<int> slot_ids;
  int inputs = 0;
  int outputs = 0;
  for (const auto& n : g.nodes) {
    if (!ids.insert(n.id).second) issue(out, GraphIssue::DuplicateNodeId, n.id, "node id repeated");
    for (const auto& s : n.params) {
      if (!slot_ids.insert(s.id).second) issue(out, GraphIssue::DuplicateSlotId, n.id, "slot id repeated");
    }
    if (n.kind() == NodeKind::Input) {
      ++inputs;
      if (n.width_out != g.input_dim) issue(out, GraphIssue::WidthMismatch, n.id, "input node width != input_dim");
    }
    if (n.kind() == NodeKind::Output) {
      ++outputs;
      if (n.width_out != g.output_dim) issue(out, GraphIssue::WidthMismatch, n.id, "output node width != output_dim");
    }
    validate_node(n, out);
  }
  if (inputs != 1) issue(out, GraphIssue::InputCount, -1, "expected exactly one Input node");
  if (outputs != 1) issue(out, GraphIssue::OutputCount, -1, "expected exactly one Output node");

  std::map<std::pair<int, int>, int> port_use;
  for (const auto& e : g.edges) {
    const LayerNode* from = g.find(e.from);
    const LayerNode* to = g.find(e.to);
    if (!from || !to) {
      issue(out, GraphIssue::UnknownNode, from ? e.to : e.from, "edge refers to a missing node");
      continue;
    }
    const auto widths = port_widths(*to);
    if (e.port < 0 || e.port >= static_cast<int>(widths.size())) {
      issue(out, GraphIssue::PortConflict, e.to, "edge targets nonexistent port " + std::to_string(e.port));
      continue;
    }
    if (++port_use[{e.to, e.port}] > 1) issue(out, GraphIssue::PortConflict, e.to, "port fed by several edges");
    if (from->width_out != widths[e.port]) {
      issue(out, GraphIssue::WidthMismatch, e.to,
            "port " + std::to_string(e.port) + " expects width " + std::to_string(widths[e.port]) + " but node " +
                std::to_string(e.from) + " produces " + std::to_string(from->width_out));
    }
  }
  for (const auto& n : g.nodes) {
    const auto widths = port_widths(n);
    for (std::size_t p = 0; p < widths.size(); ++p) {
      if (!port_use.contains({n.id, static_cast<int>(p)}))
        issue(out, GraphIssue::PortUnconnected, n.id, "port " + std::to_string(p) + " has no producer");
    }
  }
  if (!g.topological_order()) issue(out, GraphIssue::CyclicGraph, -1, "graph contains a cycle");
  return out;
}

ArchGraph compose_sequential(const ArchGraph& g1, const ArchGraph& g2) {
  if (g1.output_dim != g2.input_dim) {
    throw Error(ErrorCode::DimensionMismatch, "first graph outputs " + std::to_string(g1.output_dim) +
                                                  " values but second expects " + std::to_string(g2.input_dim));
  }
  auto find_kind = [](const ArchGraph& g, NodeKind k) {
    for (const auto& n : g.nodes) {
      if (n.kind() == k) return n.id;
    }
    throw Error(ErrorCode::InvalidGraph, "graph lacks a " + std::string(to_string(k)) + " node");
  };
  const int g1_output = find_kind(g1, NodeKind::Output);
  const int g2_input = find_kind(g2, NodeKind::Input);
  const auto g1_tail = g1.producers(g1_output);
  if (g1_tail.size() != 1) throw Error(ErrorCode::InvalidGraph, "output node must have one producer");

  ArchGraph out;
  out.input_dim = g1.input_dim;
  out.output_dim = g2.output_dim;
  out.loss = g2.loss;

  std::map<int, int> remap1;
  std::map<int, int> remap2;
  int next_id = 0;
  for (const auto& n : g1.nodes) {
    if (n.id == g1_output) continue;
    remap1[n.id] = next_id;
    LayerNode copy = n;
    copy.id = next_id++;
    out.nodes.push_back(std::move(copy));
  }
  const int slot_offset = g1.next_slot_id();
  for (const auto& n : g2.nodes) {
    if (n.id == g2_input) continue;
    remap2[n.id] = next_id;
    LayerNode copy = n;
    copy.id = next_id++;
    for (auto& s : copy.params) s.id += slot_offset;
    out.nodes.push_back(std::move(copy));
  }
  remap2[g2_input] = remap1.at(g1_tail[0]);

  for (const auto& e : g1.edges) {
    if (e.to == g1_output) continue;
    out.edges.push_back({remap1.at(e.from), remap1.at(e.to), e.port});
  }
  for (const auto& e : g2.edges) out.edges.push_back({remap2.at(e.from), remap2.at(e.to), e.port});

  for (const auto& [id, entries] : g1.provenance) {
    if (auto it = remap1.find(id); it != remap1.end()) out.provenance[it->second] = entries;
  }
  for (const auto& [id, entries] : g2.provenance) {
    if (id == g2_input) continue;
    if (auto it = remap2.find(id); it != remap2.end()) out.provenance[it->second] = entries;
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr);
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    std::array<char, 3> buf{};
    std::snprintf(buf.data(), buf.size(), "%02x", digest[i]);
    hex += buf.data();
  }
  return hex;
}

}  // namespace theoryc
