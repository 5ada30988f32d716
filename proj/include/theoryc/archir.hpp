#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "theoryc/constraints.hpp"

namespace theoryc {

inline constexpr int kArchirVersion = 1;

enum class NodeKind { Input, Dense, SharedLinear, Projection, MaskedDense, Pointwise, CurlHead, Concat, Output };

std::string_view to_string(NodeKind kind);

/// Shape-only descriptor of learnable parameters; values live in a ParamSet.
struct ParamSlot {
  int id = 0;
  std::string role;  // weight, bias, a, w, v, c
  std::vector<int> shape;
  int fan_in = 1;

  bool operator==(const ParamSlot&) const = default;
};

struct InputNode {
  bool operator==(const InputNode&) const = default;
};

struct OutputNode {
  bool operator==(const OutputNode&) const = default;
};

struct DenseNode {
  bool operator==(const DenseNode&) const = default;
};

/// Tied linear map. pattern[r][c] indexes the weight slot; -1 is a structural
/// zero (mask-forbidden entry). bias_pattern indexes the bias slot.
struct SharedLinearNode {
  std::vector<std::vector<int>> pattern;
  std::vector<int> bias_pattern;

  bool operator==(const SharedLinearNode&) const = default;
};

struct MaskedDenseNode {
  Mask mask;

  bool operator==(const MaskedDenseNode&) const = default;
};

/// y = yhat + correction * (input_matrix * x + offset - matrix * yhat).
/// Port 0 carries yhat, port 1 (present iff input_matrix is non-empty) carries x.
struct ProjectionNode {
  RealMatrix matrix;
  RealMatrix input_matrix;
  RealVector offset;
  RealMatrix correction;
  std::vector<std::string> row_sources;

  bool operator==(const ProjectionNode&) const = default;
};

struct PointwiseNode {
  std::string nonlinearity = "tanh";

  bool operator==(const PointwiseNode&) const = default;
};

/// Stream-function head: psi = sum_r a_r tanh(w_r x + v_r y + c_r),
/// output (d psi / dy, -d psi / dx).
struct CurlHeadNode {
  int features = 0;

  bool operator==(const CurlHeadNode&) const = default;
};

struct ConcatNode {
  std::vector<int> part_widths;

  bool operator==(const ConcatNode&) const = default;
};

using NodeData = std::variant<InputNode, DenseNode, SharedLinearNode, ProjectionNode, MaskedDenseNode, PointwiseNode,
                              CurlHeadNode, ConcatNode, OutputNode>;

struct LayerNode {
  int id = 0;
  int width_in = 0;
  int width_out = 0;
  std::vector<ParamSlot> params;
  NodeData data;

  NodeKind kind() const;
  const ParamSlot* slot(std::string_view role) const;
  bool operator==(const LayerNode&) const = default;
};

struct Edge {
  int from = 0;
  int to = 0;
  int port = 0;

  bool operator==(const Edge&) const = default;
};

/// Which primitive (empty for free configuration structure) and which rule
/// produced a node.
struct ProvenanceEntry {
  std::string primitive;
  std::string rule;

  bool operator==(const ProvenanceEntry&) const = default;
};

enum class LossKind { MSE, CrossEntropy };

struct LossSpec {
  LossKind kind = LossKind::MSE;
  std::string note;

  bool operator==(const LossSpec&) const = default;
};

struct ArchGraph {
  std::vector<LayerNode> nodes;
  std::vector<Edge> edges;
  int input_dim = 0;
  int output_dim = 0;
  std::map<int, std::vector<ProvenanceEntry>> provenance;
  LossSpec loss;

  bool operator==(const ArchGraph&) const = default;

  const LayerNode* find(int id) const;
  LayerNode* find(int id);
  /// Producer node id for each input port of `id`, ordered by port.
  std::vector<int> producers(int id) const;
  std::vector<int> consumers(int id) const;
  /// Node ids in dependency order (ties by declaration order); nullopt on a cycle.
  std::optional<std::vector<int>> topological_order() const;
  int next_slot_id() const;
  int next_node_id() const;
};

enum class GraphIssue {
  CyclicGraph,
  WidthMismatch,
  InputCount,
  OutputCount,
  UnknownNode,
  DuplicateNodeId,
  PortUnconnected,
  PortConflict,
  BadSharingPattern,
  BadMask,
  RankDeficientProjection,
  SlotShapeMismatch,
  DuplicateSlotId,
};

std::string_view to_string(GraphIssue issue);

struct GraphDiagnostic {
  GraphIssue issue;
  int node = -1;
  std::string detail;
};

/// Empty iff every ArchGraph invariant holds.
std::vector<GraphDiagnostic> validate_graph(const ArchGraph& g);

/// g2 after g1. g2's parameter slot ids are shifted by g1.next_slot_id().
ArchGraph compose_sequential(const ArchGraph& g1, const ArchGraph& g2);

/// Deterministic `.archir` JSON text (schema version kArchirVersion).
std::string serialize_archir(const ArchGraph& g);
/// Throws Error(InvalidGraph) on schema violations.
ArchGraph parse_archir(std::string_view text);

std::string sha256_hex(std::string_view bytes);

}  // namespace theoryc
