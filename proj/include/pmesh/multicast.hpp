#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string_view>
#include <vector>

#include "pmesh/graph.hpp"

namespace pmesh {

/// Which loss value the splitting computation assumes for each PUC traversal.
enum class IlSource {
  PerPuc,         ///< the topology's own il_db of every PUC
  GlobalAverage,  ///< one mean il_db over all PUCs of the topology
};

std::string_view to_string(IlSource s);
/// Accepts "per_puc" and "global_average". Throws std::invalid_argument.
IlSource parse_il_source(std::string_view text);

struct MulticastRequest {
  int input_port = -1;
  std::vector<int> output_ports;
  /// Target share of every output, summing to 1. Empty means equal shares.
  std::vector<double> proportion;
  IlSource il_source = IlSource::PerPuc;

  /// Throws std::invalid_argument: no outputs, repeated outputs, an output equal to
  /// the input, wrong proportion length, non-positive shares, or a sum off 1 by
  /// more than 1e-9.
  void validate() const;
  /// The proportion with the equal-share default filled in.
  std::vector<double> shares() const;
};

/// PUCs that two of the paths need in different states. With one common source
/// these are the points where the tree splits.
std::set<int> get_tunable_pucs(const std::vector<LightPath>& paths);

/// Cross-port fraction that makes a coupler deliver the cross:bar power ratio
/// k_target : (1 - k_target) when the two branches behind it transmit il_bar_db and
/// il_cross_db (dB, <= 0 for losses). Requires 0 <= k_target <= 1.
double splitting_ratio(double k_target, double il_bar_db, double il_cross_db);

/// Transmission (dB) from a coupler output to one output of a child coupler's
/// cross branch: the child's cross fraction, its onward cross-branch loss, and the
/// connecting waveguide loss.
double child_branch_loss_db(double k_child, double onward_db, double connecting_db);

/// A splitting PUC of the tree.
struct TunableCoupler {
  int puc = -1;
  NodeId split_node = -1;    ///< inbound node where the light divides
  int depth = 0;             ///< PUC traversals from the source to this coupler
  std::vector<int> bar_outputs;    ///< output ports fed through the bar branch
  std::vector<int> cross_outputs;  ///< output ports fed through the cross branch
  double k_target = 0.0;     ///< share of the subtree's target power sent cross
  double k = 0.0;            ///< loss-compensated cross fraction
  double il_bar_db = 0.0;    ///< transmission of the whole bar branch, dB
  double il_cross_db = 0.0;  ///< transmission of the whole cross branch, dB
};

/// Per-output routes from one input merged into a directed tree.
class MulticastTree {
 public:
  /// Throws TreeConflict when the paths re-merge after splitting, or when a PUC
  /// would have to split one signal while steering another.
  MulticastTree(const MeshGraph& graph, int input_port, std::vector<LightPath> paths);

  int input_port() const { return input_port_; }
  const std::vector<LightPath>& paths() const { return paths_; }
  /// Couplers ordered child before parent (deepest first, then by PUC id).
  const std::vector<TunableCoupler>& couplers() const { return couplers_; }
  /// Fixed bar/cross state of every non-splitting PUC the tree uses.
  const std::map<int, ArcTag>& fixed_states() const { return fixed_; }

  /// What lies behind one output of a coupler: the PUC traversals up to and
  /// including the next coupler's PUC, and either that coupler or the output port.
  struct Chain {
    std::vector<int> pucs;
    int next_coupler = -1;  ///< index into couplers(), -1 at an output
    int output = -1;        ///< output port, -1 at a coupler
  };
  Chain chain(std::size_t coupler, ArcTag side) const;

 private:
  const MeshGraph* graph_;
  int input_port_;
  std::vector<LightPath> paths_;
  std::vector<TunableCoupler> couplers_;
  std::map<int, ArcTag> fixed_;
  std::map<NodeId, std::uint8_t> in_tags_;   // inbound node -> bit 0 bar, bit 1 cross
  std::map<NodeId, int> leaf_of_;            // outbound node -> output port
  std::map<NodeId, std::size_t> coupler_at_;  // split node -> coupler index
};

/// k_target of every coupler: the share of the target power below its cross branch
/// divided by the share below both branches. Keyed by PUC id.
std::map<int, double> target_ratios(const MulticastTree& tree, const std::vector<int>& outputs,
                                    const std::vector<double>& shares);

/// Fills k_target, k and the branch losses of every coupler, visiting them in
/// `order` (indices into couplers()). A branch that ends at a child coupler is
/// charged child_branch_loss_db of the child's cross branch divided by the child's
/// cross target share, which is the transmission of the child's whole subtree.
/// Throws EvaluationOrderError when a coupler is visited before a child.
std::vector<TunableCoupler> solve_couplers(const MulticastTree& tree, const std::vector<int>& outputs,
                                           const std::vector<double>& shares,
                                           const std::vector<double>& il_per_puc,
                                           const std::vector<std::size_t>& order);

struct MulticastConfig {
  int input_port = -1;
  std::vector<int> output_ports;
  std::vector<double> shares;
  std::vector<LightPath> paths;           ///< one per output, request order
  std::vector<TunableCoupler> couplers;   ///< child before parent
  std::map<int, PucState> states;         ///< every PUC; unused ones are Off
  IlSource il_source = IlSource::PerPuc;
};

/// Routes every output, merges the routes into a tree, and sets each splitting PUC
/// to the loss-compensated ratio. When an optimal route would re-merge with the
/// tree built so far, it is routed again with the tree's arcs made free so that it
/// shares them. Throws NoRoute and TreeConflict.
MulticastConfig auto_multicast(const MeshGraph& graph, const MulticastRequest& request);

/// Loss the splitting computation assumes for each PUC, by source.
std::vector<double> assumed_il(const MeshTopology& topology, IlSource source);

}  // namespace pmesh
