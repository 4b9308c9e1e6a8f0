#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pmesh/graph.hpp"

namespace pmesh {

/// Extra restrictions for a route query.
struct RouteConstraints {
  /// Per PUC: bit 0 allows the bar arcs, bit 1 the cross arcs. Empty allows all.
  std::vector<std::uint8_t> allowed;
  /// Per internal arc weight used instead of the graph's effective weight. Empty
  /// uses the graph; +infinity forbids the arc. The returned path still reports
  /// graph weights.
  std::vector<double> arc_weight;

  static constexpr std::uint8_t kBar = 1;
  static constexpr std::uint8_t kCross = 2;
  static constexpr std::uint8_t kAny = kBar | kCross;
};

/// Point-to-point router with reusable scratch space. One instance per thread.
///
/// Routes are minimum-weight paths in which every PUC keeps one state: a PUC may be
/// passed more than once, but only through arcs of the same tag. Ties are broken by
/// fewer PUC traversals, then by the lexicographically smallest node sequence.
///
/// Dropping the one-state rule leaves an ordinary shortest-path problem, solved by
/// a backward Dijkstra and a forward walk over tight arcs in node-id order. When
/// that route needs some PUC in both states, the search branches into a bar-only
/// and a cross-only restriction of that PUC and solves each again, always
/// expanding the cheapest open branch. The first state-consistent route taken from
/// the queue is optimal. Without constraints the distance field of each target is
/// kept until the graph's weights change, so most queries are a single walk.
///
/// Branching is slow to prove that no route exists. Once a query has branched a
/// few hundred times, a depth-first search over light trajectories runs alongside
/// with a growing budget: with every PUC state fixed, light follows exactly one
/// trajectory, so a consistent route exists iff some choice of states at first
/// visits reaches the target. Pruning by reachability usually settles this quickly.
class Router {
 public:
  explicit Router(const MeshGraph& graph);

  /// Throws std::invalid_argument on bad ports and NoRoute when none exists.
  LightPath route(int in_port, int out_port, const RouteConstraints* constraints = nullptr);

  const MeshGraph& graph() const { return *graph_; }
  /// Restricted searches the last route() call needed besides the first one.
  std::size_t last_branch_count() const { return branches_; }

 private:
  struct Cost {
    double w = 0.0;
    int hops = 0;
  };
  struct HeapItem {
    double w;
    int hops;
    NodeId node;
  };
  using Field = std::vector<Cost>;
  using Mask = std::vector<std::uint8_t>;
  struct Branch {
    Cost cost;
    std::vector<NodeId> nodes;
    Mask mask;
  };

  double weight(ArcId a) const;
  bool allowed(ArcId a) const;
  void fill_field(NodeId target, Field& dist);
  void relax_tails(NodeId out, Field& dist);
  const Field& cached_field(NodeId target);
  void walk(const Field& dist, NodeId source, std::vector<NodeId>& nodes) const;
  int first_conflict(const std::vector<NodeId>& nodes);

  enum class Proof { Routable, Unroutable, Undecided };
  Proof prove(NodeId source, const Mask& root, std::size_t budget);
  bool trajectory(NodeId in, std::size_t& budget);
  bool target_reachable(NodeId from);

  static int compare(const Cost& a, const Cost& b);
  static Cost add(const Cost& a, const Cost& b) { return {a.w + b.w, a.hops + b.hops}; }

  const MeshGraph* graph_;
  const RouteConstraints* constraints_ = nullptr;
  const Mask* mask_ = nullptr;
  NodeId target_ = -1;

  std::vector<std::uint32_t> done_;
  std::uint32_t stamp_ = 0;
  std::vector<HeapItem> heap_;
  Field scratch_;

  struct CachedField {
    std::uint64_t version = 0;
    Field dist;
  };
  std::unordered_map<NodeId, CachedField> fields_;

  std::vector<std::uint32_t> tag_seen_;
  std::vector<ArcTag> tag_;
  std::uint32_t tag_stamp_ = 0;
  std::size_t branches_ = 0;

  // Trajectory search state: per PUC the allowed tags, narrowed to one on the
  // first visit, and the nodes already lit.
  Mask fixed_;
  std::vector<std::uint8_t> lit_;
  std::vector<std::uint32_t> seen_;
  std::uint32_t seen_stamp_ = 0;
  std::vector<NodeId> stack_;
};

/// Minimum-weight route between two usable external ports.
LightPath shortest_path(const MeshGraph& graph, int in_port, int out_port);
LightPath shortest_path(const MeshGraph& graph, int in_port, int out_port,
                        const RouteConstraints& constraints);

/// Minimum-weight route avoiding every PUC in `failed_pucs`.
LightPath self_heal(const MeshGraph& graph, int in_port, int out_port,
                    const std::set<int>& failed_pucs);

/// Exhaustive list of state-consistent routes touching at most `max_pucs` distinct
/// PUCs, sorted by (weight, PUC traversals, node sequence). Exponential; test oracle.
std::vector<LightPath> enumerate_paths(const MeshGraph& graph, int in_port, int out_port,
                                       int max_pucs);

struct BatchResult {
  std::vector<std::optional<LightPath>> paths;  ///< one entry per pair, nullopt on NoRoute
  std::vector<std::string> errors;              ///< "" on success
  std::vector<double> per_path_us;
  double mean_us = 0.0;
  double median_us = 0.0;
  double p99_us = 0.0;
};

/// Routes every pair independently (no conflict checking) and times each query.
BatchResult route_batch(const MeshGraph& graph, std::span<const std::pair<int, int>> pairs);

}  // namespace pmesh
