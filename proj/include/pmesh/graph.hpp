#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "pmesh/topology.hpp"

namespace pmesh {

// Eight artificial nodes per PUC: an inbound and an outbound node for each of the
// four ports. Node id = 8 * puc + 2 * side + (0 inbound | 1 outbound).
using NodeId = int;
// Eight internal arcs per PUC, keyed by their inbound tail node and tag:
// arc id = 8 * puc + 2 * side_in + (0 bar | 1 cross). Waveguide (external) arcs
// carry no id; they are implied by the topology's links and weigh nothing.
using ArcId = int;

enum class ArcTag : std::uint8_t { Bar = 0, Cross = 1 };

std::string_view to_string(ArcTag tag);

inline constexpr NodeId in_node(const PortRef& r) { return 8 * r.puc + 2 * static_cast<int>(r.side); }
inline constexpr NodeId out_node(const PortRef& r) { return in_node(r) + 1; }
inline constexpr bool is_in_node(NodeId n) { return (n & 1) == 0; }
inline constexpr int puc_of_node(NodeId n) { return n >> 3; }
inline constexpr PortSide side_of_node(NodeId n) { return static_cast<PortSide>((n >> 1) & 3); }
inline constexpr PortRef port_of_node(NodeId n) { return {puc_of_node(n), side_of_node(n)}; }

/// Side reached when entering at `from` and leaving through the opposite end.
inline constexpr PortSide exit_side(PortSide from, ArcTag tag) {
  const int s = static_cast<int>(from);
  const int lane = (s & 1) ^ static_cast<int>(tag);
  return static_cast<PortSide>((s < 2 ? 2 : 0) + lane);
}

inline constexpr ArcId arc_id(NodeId tail_in, ArcTag tag) { return tail_in + static_cast<int>(tag); }
inline constexpr NodeId arc_tail(ArcId a) { return a & ~1; }
inline constexpr ArcTag arc_tag(ArcId a) { return static_cast<ArcTag>(a & 1); }
inline constexpr int arc_puc(ArcId a) { return a >> 3; }
inline constexpr NodeId arc_head(ArcId a) {
  const PortRef from = port_of_node(arc_tail(a));
  return out_node({from.puc, exit_side(from.side, arc_tag(a))});
}

/// Multipliers {c_i} of the per-PUC figures of merit in the arc weight.
struct WeightCoeffs {
  double c_il = 1.0;   ///< per dB of insertion loss
  double c_bul = 0.0;  ///< per basic unit length
  double c_pc = 0.0;   ///< per mW of actuation power

  /// Throws std::invalid_argument if any coefficient is negative or all are zero.
  void validate() const;
  bool operator==(const WeightCoeffs&) const = default;
};

/// w = c_il * |IL| + c_bul * BUL + c_pc * P_c. Loss enters as a magnitude so
/// lossier cells cost more and weights stay non-negative.
double edge_weight(const Puc& puc, const WeightCoeffs& coeffs);

/// Weighted directed routing graph of a mesh. Read-only queries are safe from many
/// threads; apply_penalty / reset_penalties need exclusive access.
class MeshGraph {
 public:
  MeshGraph(std::shared_ptr<const MeshTopology> topology, const WeightCoeffs& coeffs);

  const MeshTopology& topology() const { return *topology_; }
  const std::shared_ptr<const MeshTopology>& topology_ptr() const { return topology_; }
  const WeightCoeffs& coeffs() const { return coeffs_; }

  int puc_count() const { return static_cast<int>(topology_->puc_count()); }
  int node_count() const { return 8 * puc_count(); }
  int internal_arc_count() const { return 8 * puc_count(); }
  int external_arc_count() const { return 2 * static_cast<int>(topology_->links().size()); }

  /// Inbound node reached over the waveguide leaving `out`, or -1 at a mesh boundary.
  NodeId link_successor(NodeId out) const { return link_next_[out >> 1]; }
  /// Outbound node feeding `in` over a waveguide, or -1 at a mesh boundary.
  NodeId link_predecessor(NodeId in) const {
    const NodeId partner_in = link_next_[in >> 1];
    return partner_in < 0 ? -1 : partner_in + 1;
  }

  double base_weight(ArcId a) const { return base_[checked(a)]; }
  double penalty_multiplier(ArcId a) const { return multiplier_[checked(a)]; }
  double effective_weight(ArcId a) const { return base_[a] * multiplier_[a]; }

  /// Multiplies the penalty of each listed arc by `factor` (> 1). Throws
  /// std::out_of_range for ids that are not internal arcs.
  void apply_penalty(std::span<const ArcId> arcs, double factor);
  void reset_penalties();
  bool penalties_clear() const;
  /// Changes whenever effective weights may have changed.
  std::uint64_t weights_version() const { return weights_version_; }

  NodeId port_in_node(int external_index) const;
  NodeId port_out_node(int external_index) const;

 private:
  std::size_t checked(ArcId a) const;

  std::shared_ptr<const MeshTopology> topology_;
  WeightCoeffs coeffs_;
  std::vector<double> base_;
  std::vector<double> multiplier_;
  std::vector<NodeId> link_next_;  // per port (node >> 1): inbound node across the link
  std::uint64_t weights_version_ = 0;
};

/// Validates and builds. Node count is 8 x PUCs.
MeshGraph build_graph(const MeshTopology& topology, const WeightCoeffs& coeffs = {});
MeshGraph build_graph(std::shared_ptr<const MeshTopology> topology, const WeightCoeffs& coeffs = {});

/// Route of light from an external input port to an external output port.
/// `nodes` alternates inbound/outbound nodes: (nodes[2i], nodes[2i+1]) is the
/// internal arc through the i-th PUC traversal and (nodes[2i+1], nodes[2i+2]) a
/// waveguide. No node repeats. A PUC may be traversed twice (once per lane) as long
/// as both traversals need the same state, so puc_count counts distinct PUCs while
/// total_weight counts every traversal.
struct LightPath {
  int in_port = -1;
  int out_port = -1;
  std::vector<NodeId> nodes;
  double total_weight = 0.0;
  int puc_count = 0;
  std::map<int, ArcTag> required_states;

  std::vector<ArcId> arcs() const;
  std::vector<int> pucs() const;  ///< one entry per traversal, in order
  bool empty() const { return nodes.empty(); }
  bool operator==(const LightPath&) const = default;
};

/// Builds a LightPath from a node sequence, summing effective weights in order.
/// Throws InvariantViolation for non-contiguous sequences, repeated nodes, or a
/// PUC needed in both states.
LightPath make_path(const MeshGraph& graph, int in_port, int out_port, std::vector<NodeId> nodes);

/// Bar/Cross requirement of every traversed PUC. Throws InvariantViolation when the
/// node sequence is not contiguous in `graph`, repeats a node, or needs one PUC in
/// both states.
std::map<int, ArcTag> path_states(const MeshGraph& graph, const LightPath& path);

}  // namespace pmesh
