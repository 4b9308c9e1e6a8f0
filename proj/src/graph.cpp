#include "pmesh/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include "pmesh/errors.hpp"

namespace pmesh {

std::string_view to_string(ArcTag tag) { return tag == ArcTag::Bar ? "bar" : "cross"; }

void WeightCoeffs::validate() const {
  if (!(c_il >= 0.0 && c_bul >= 0.0 && c_pc >= 0.0)) {
    throw std::invalid_argument("weight coefficients must be non-negative");
  }
  if (c_il == 0.0 && c_bul == 0.0 && c_pc == 0.0) {
    throw std::invalid_argument("weight coefficients must not all be zero");
  }
}

double edge_weight(const Puc& puc, const WeightCoeffs& coeffs) {
  return coeffs.c_il * std::abs(puc.il_db) + coeffs.c_bul * puc.bul + coeffs.c_pc * puc.power_mw;
}

MeshGraph::MeshGraph(std::shared_ptr<const MeshTopology> topology, const WeightCoeffs& coeffs)
    : topology_(std::move(topology)), coeffs_(coeffs) {
  coeffs_.validate();
  require_valid(*topology_);
  const int n = puc_count();
  base_.resize(8 * n);
  multiplier_.assign(8 * n, 1.0);
  for (const auto& p : topology_->pucs()) {
    const double w = edge_weight(p, coeffs_);
    std::fill_n(base_.begin() + 8 * p.id, 8, w);
  }
  link_next_.assign(4 * n, -1);
  for (const auto& l : topology_->links()) {
    link_next_[in_node(l.a) >> 1] = in_node(l.b);
    link_next_[in_node(l.b) >> 1] = in_node(l.a);
  }
}

std::size_t MeshGraph::checked(ArcId a) const {
  if (a < 0 || a >= internal_arc_count()) {
    throw std::out_of_range("unknown internal arc id " + std::to_string(a));
  }
  return static_cast<std::size_t>(a);
}

void MeshGraph::apply_penalty(std::span<const ArcId> arcs, double factor) {
  if (!(factor > 1.0) || !std::isfinite(factor)) {
    throw std::invalid_argument("penalty factor must be a finite value > 1");
  }
  for (ArcId a : arcs) checked(a);
  for (ArcId a : arcs) multiplier_[a] *= factor;
  ++weights_version_;
}

void MeshGraph::reset_penalties() {
  std::fill(multiplier_.begin(), multiplier_.end(), 1.0);
  ++weights_version_;
}

bool MeshGraph::penalties_clear() const {
  return std::all_of(multiplier_.begin(), multiplier_.end(), [](double m) { return m == 1.0; });
}

NodeId MeshGraph::port_in_node(int external_index) const {
  return in_node(topology_->external_port(external_index).port);
}

NodeId MeshGraph::port_out_node(int external_index) const {
  return out_node(topology_->external_port(external_index).port);
}

MeshGraph build_graph(const MeshTopology& topology, const WeightCoeffs& coeffs) {
  return MeshGraph(std::make_shared<const MeshTopology>(topology), coeffs);
}

MeshGraph build_graph(std::shared_ptr<const MeshTopology> topology, const WeightCoeffs& coeffs) {
  return MeshGraph(std::move(topology), coeffs);
}

std::vector<ArcId> LightPath::arcs() const {
  std::vector<ArcId> out;
  out.reserve(nodes.size() / 2);
  for (std::size_t i = 0; i + 1 < nodes.size(); i += 2) {
    const NodeId tail = nodes[i];
    const PortSide from = side_of_node(tail);
    const PortSide to = side_of_node(nodes[i + 1]);
    const ArcTag tag = exit_side(from, ArcTag::Bar) == to ? ArcTag::Bar : ArcTag::Cross;
    out.push_back(arc_id(tail, tag));
  }
  return out;
}

std::vector<int> LightPath::pucs() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); i += 2) out.push_back(puc_of_node(nodes[i]));
  return out;
}

std::map<int, ArcTag> path_states(const MeshGraph& graph, const LightPath& path) {
  std::map<int, ArcTag> states;
  const auto& n = path.nodes;
  if (n.empty()) return states;
  auto fail = [](const std::string& why) { throw InvariantViolation("non-contiguous path: " + why); };
  if (n.size() % 2 != 0) fail("odd node count");
  for (NodeId id : n) {
    if (id < 0 || id >= graph.node_count()) fail("node id out of range");
  }
  std::vector<NodeId> sorted = n;
  std::sort(sorted.begin(), sorted.end());
  if (auto it = std::adjacent_find(sorted.begin(), sorted.end()); it != sorted.end()) {
    fail("node " + std::to_string(*it) + " repeats");
  }
  for (std::size_t i = 0; i < n.size(); i += 2) {
    const NodeId a = n[i], b = n[i + 1];
    if (!is_in_node(a) || is_in_node(b) || puc_of_node(a) != puc_of_node(b) ||
        is_a_end(side_of_node(a)) == is_a_end(side_of_node(b))) {
      fail("nodes " + std::to_string(a) + "," + std::to_string(b) + " are not an internal arc");
    }
    if (i + 2 < n.size() && graph.link_successor(b) != n[i + 2]) {
      fail("no waveguide from node " + std::to_string(b) + " to node " + std::to_string(n[i + 2]));
    }
    const ArcTag tag = exit_side(side_of_node(a), ArcTag::Bar) == side_of_node(b) ? ArcTag::Bar
                                                                                  : ArcTag::Cross;
    auto [it, inserted] = states.try_emplace(puc_of_node(a), tag);
    if (!inserted && it->second != tag) {
      throw InvariantViolation("PUC " + std::to_string(puc_of_node(a)) +
                               " is traversed in both the bar and the cross state");
    }
  }
  return states;
}

LightPath make_path(const MeshGraph& graph, int in_port, int out_port, std::vector<NodeId> nodes) {
  LightPath p;
  p.in_port = in_port;
  p.out_port = out_port;
  p.nodes = std::move(nodes);
  p.required_states = path_states(graph, p);
  if (!p.nodes.empty()) {
    if (p.nodes.front() != graph.port_in_node(in_port) ||
        p.nodes.back() != graph.port_out_node(out_port)) {
      throw InvariantViolation("path endpoints do not match its ports");
    }
  }
  for (ArcId a : p.arcs()) p.total_weight += graph.effective_weight(a);
  p.puc_count = static_cast<int>(p.required_states.size());
  return p;
}

}  // namespace pmesh
