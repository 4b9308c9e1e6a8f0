#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pmesh/graph.hpp"

namespace pmesh {

using IoPair = std::pair<int, int>;

enum class SwitchAlgorithm { EdgePenalty, Sequential };

std::string_view to_string(SwitchAlgorithm a);
/// Accepts "edge_penalty" / "edge-penalty" and "sequential". Throws std::invalid_argument.
SwitchAlgorithm parse_switch_algorithm(std::string_view text);

inline constexpr int kDefaultMaxIter = 25;
inline constexpr double kDefaultPenaltyFactor = 10.0;

struct SwitchRequest {
  std::vector<IoPair> io_pairs;
  int max_iter = kDefaultMaxIter;
  SwitchAlgorithm algorithm = SwitchAlgorithm::EdgePenalty;
  double penalty_factor = kDefaultPenaltyFactor;

  /// Throws std::invalid_argument: repeated input, repeated output, a port used as
  /// both, no pairs, or max_iter < 1.
  void validate() const;
};

struct SwitchConfig {
  std::map<IoPair, LightPath> paths;  ///< weights are un-penalized base weights
  std::map<int, PucState> states;     ///< every PUC; unused ones are Off
  int iterations_used = 0;
  double total_weight = 0.0;
};

struct ConflictSet {
  std::set<int> pucs;
  std::set<IoPair> pairs;

  bool empty() const { return pucs.empty(); }
};

/// PUCs needed in the bar state by one path and the cross state by another, and
/// the pairs whose paths touch them. Sharing a PUC in the same state is allowed.
ConflictSet get_conflict_edges(const std::vector<LightPath>& paths);

/// Per-iteration record of an edge-penalty solve, for inspection and tests.
struct SwitchIteration {
  ConflictSet conflicts;
  std::vector<ArcId> penalized;         ///< arcs multiplied this iteration
  std::vector<ArcId> penalized_so_far;  ///< every arc whose multiplier is not 1 afterwards
};

/// Synthesizes a zero-conflict configuration.
///
/// EdgePenalty routes every pair, then repeats: find the conflicting PUCs, pick
/// the state that prevails at each (the one that prevailed before, else the one
/// more paths need, else the earliest pair's), multiply the four arcs of the other
/// state by penalty_factor, and re-route only the conflicting pairs. They are
/// re-routed in request order, each one also charged penalty_factor, for that
/// query only, on arcs that contradict states the other current paths hold. The
/// graph's penalties are cleared before and after the call, also on failure.
/// Sequential routes the pairs one after another, each restricted to the PUC
/// states fixed by the earlier ones, trying successive pair orders (lexicographic
/// permutations, at most max_iter of them) until every pair fits.
///
/// Throws Unsolved when max_iter is exhausted and NoRoute when a pair has no route
/// even on its own.
SwitchConfig auto_switch(MeshGraph& graph, const SwitchRequest& request,
                         std::vector<SwitchIteration>* trace = nullptr);

struct SweepEntry {
  std::vector<int> permutation;  ///< output index assigned to each input
  bool solved = false;
  int iterations = 0;
  double total_weight = 0.0;
  double weight_spread = 0.0;    ///< max - min path weight
  std::string error;
};

struct SweepReport {
  std::vector<SweepEntry> entries;  ///< lexicographic permutation order
  int solved = 0;
  std::map<int, int> iteration_histogram;
  double solve_rate() const {
    return entries.empty() ? 0.0 : static_cast<double>(solved) / entries.size();
  }
};

/// Runs auto_switch for every assignment of `outputs` to `inputs`. Work is spread
/// over `threads` private graph copies; the report does not depend on it.
SweepReport feasibility_sweep(const MeshGraph& graph, const std::vector<int>& inputs,
                              const std::vector<int>& outputs, int max_iter,
                              SwitchAlgorithm algorithm = SwitchAlgorithm::EdgePenalty,
                              int threads = 1);

/// Pairs input i with outputs[permutation[i]].
std::vector<IoPair> permutation_pairs(const std::vector<int>& inputs, const std::vector<int>& outputs,
                                      const std::vector<int>& permutation);

}  // namespace pmesh
