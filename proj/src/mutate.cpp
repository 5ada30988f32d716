#include <algorithm>
#include <map>

#include "theoryc/certify.hpp"

namespace theoryc {

std::string_view to_string(Mutation m) {
  switch (m) {
    case Mutation::UnshareSlot: return "unshare_slot";
    case Mutation::ZeroProjectionRow: return "zero_projection_row";
    case Mutation::FlipMaskBit: return "flip_mask_bit";
    case Mutation::CurlToDense: return "curl_to_dense";
  }
  return "?";
}

namespace {

// Grows the node's weight slot by one entry and returns its index.
int fresh_class(LayerNode& n) {
  for (auto& slot : n.params) {
    if (slot.role == "weight") return slot.shape[0]++;
  }
  return -1;
}

bool unshare(ArchGraph& g) {
  for (auto& n : g.nodes) {
    auto* s = std::get_if<SharedLinearNode>(&n.data);
    if (!s) continue;
    std::map<int, int> seen;
    for (auto& row : s->pattern) {
      for (int& v : row) {
        if (v < 0) continue;
        if (++seen[v] == 2) {
          v = fresh_class(n);
          return true;
        }
      }
    }
  }
  return false;
}

bool zero_row(ArchGraph& g) {
  for (auto& n : g.nodes) {
    if (auto* p = std::get_if<ProjectionNode>(&n.data)) {
      std::fill(p->matrix[0].begin(), p->matrix[0].end(), 0.0);
      return true;
    }
  }
  return false;
}

bool flip_mask(ArchGraph& g) {
  for (auto& n : g.nodes) {
    if (auto* m = std::get_if<MaskedDenseNode>(&n.data)) {
      for (auto& row : m->mask) {
        for (auto& bit : row) {
          if (!bit) {
            bit = 1;
            return true;
          }
        }
      }
    }
    if (auto* s = std::get_if<SharedLinearNode>(&n.data)) {
      for (auto& row : s->pattern) {
        for (int& v : row) {
          if (v < 0) {
            v = fresh_class(n);
            return true;
          }
        }
      }
    }
  }
  return false;
}

bool curl_to_dense(ArchGraph& g) {
  for (auto& n : g.nodes) {
    if (n.kind() != NodeKind::CurlHead) continue;
    int next = g.next_slot_id();
    n.data = DenseNode{};
    n.params = {{next, "weight", {n.width_out, n.width_in}, n.width_in}, {next + 1, "bias", {n.width_out}, n.width_in}};
    return true;
  }
  return false;
}

}  // namespace

std::optional<ArchGraph> mutate(const ArchGraph& g, Mutation m) {
  ArchGraph out = g;
  bool applied = false;
  switch (m) {
    case Mutation::UnshareSlot: applied = unshare(out); break;
    case Mutation::ZeroProjectionRow: applied = zero_row(out); break;
    case Mutation::FlipMaskBit: applied = flip_mask(out); break;
    case Mutation::CurlToDense: applied = curl_to_dense(out); break;
  }
  if (!applied) return std::nullopt;
  return out;
}

}  // namespace theoryc
