#include "pmesh/switching.hpp"

#include <algorithm>
#include <cstdint>
#include <atomic>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "pmesh/errors.hpp"
#include "pmesh/interconnect.hpp"

namespace pmesh {

std::string_view to_string(SwitchAlgorithm a) {
  return a == SwitchAlgorithm::EdgePenalty ? "edge_penalty" : "sequential";
}

SwitchAlgorithm parse_switch_algorithm(std::string_view text) {
  if (text == "edge_penalty" || text == "edge-penalty") return SwitchAlgorithm::EdgePenalty;
  if (text == "sequential") return SwitchAlgorithm::Sequential;
  throw std::invalid_argument("unknown switch algorithm \"" + std::string(text) + "\"");
}

void SwitchRequest::validate() const {
  if (io_pairs.empty()) throw std::invalid_argument("switch request has no I/O pairs");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (!(penalty_factor > 1.0)) throw std::invalid_argument("penalty_factor must be > 1");
  std::set<int> ins, outs;
  for (const auto& [in, out] : io_pairs) {
    if (!ins.insert(in).second) {
      throw std::invalid_argument("input port " + std::to_string(in) + " appears twice");
    }
    if (!outs.insert(out).second) {
      throw std::invalid_argument("output port " + std::to_string(out) + " appears twice");
    }
  }
  for (int p : ins) {
    if (outs.contains(p)) {
      throw std::invalid_argument("port " + std::to_string(p) + " is both an input and an output");
    }
  }
}

ConflictSet get_conflict_edges(const std::vector<LightPath>& paths) {
  std::map<int, std::uint8_t> seen;  // bit 0: some path needs bar, bit 1: cross
  for (const auto& p : paths) {
    for (const auto& [puc, tag] : p.required_states) seen[puc] |= tag == ArcTag::Bar ? 1 : 2;
  }
  ConflictSet out;
  for (const auto& [puc, bits] : seen) {
    if (bits == 3) out.pucs.insert(puc);
  }
  if (out.pucs.empty()) return out;
  for (const auto& p : paths) {
    for (const auto& [puc, tag] : p.required_states) {
      if (out.pucs.contains(puc)) {
        out.pairs.insert({p.in_port, p.out_port});
        break;
      }
    }
  }
  return out;
}

namespace {

// Clears penalties on entry and on every exit path.
class PenaltyScope {
 public:
  explicit PenaltyScope(MeshGraph& g) : g_(g) { g_.reset_penalties(); }
  ~PenaltyScope() { g_.reset_penalties(); }
  PenaltyScope(const PenaltyScope&) = delete;
  PenaltyScope& operator=(const PenaltyScope&) = delete;

 private:
  MeshGraph& g_;
};

std::vector<LightPath> values(const std::map<IoPair, LightPath>& m) {
  std::vector<LightPath> out;
  out.reserve(m.size());
  for (const auto& [k, v] : m) out.push_back(v);
  return out;
}

SwitchConfig finish(const MeshGraph& graph, const std::map<IoPair, LightPath>& paths, int iterations) {
  SwitchConfig cfg;
  cfg.iterations_used = iterations;
  for (int p = 0; p < graph.puc_count(); ++p) cfg.states[p] = PucState::off();
  for (const auto& [pair, path] : paths) {
    LightPath clean = make_path(graph, pair.first, pair.second, path.nodes);
    for (const auto& [puc, tag] : clean.required_states) {
      cfg.states[puc] = tag == ArcTag::Bar ? PucState::bar() : PucState::cross();
    }
    cfg.total_weight += clean.total_weight;
    cfg.paths.emplace(pair, std::move(clean));
  }
  return cfg;
}

// At every conflicting PUC one state prevails. A state that already lost there
// keeps losing, so penalties pile up on one side instead of alternating. Without
// history the state more paths need wins, and on a tie the one needed by the
// earliest pair of the request. The four arcs of the other state are returned.
std::vector<ArcId> losing_arcs(const MeshGraph& graph, const std::vector<IoPair>& order,
                               const std::map<IoPair, LightPath>& paths, const std::set<int>& pucs) {
  std::vector<ArcId> arcs;
  for (int puc : pucs) {
    int votes[2] = {0, 0};
    int first = -1;
    for (const auto& pair : order) {
      const auto& states = paths.at(pair).required_states;
      auto it = states.find(puc);
      if (it == states.end()) continue;
      const int tag = static_cast<int>(it->second);
      ++votes[tag];
      if (first < 0) first = tag;
    }
    int keep = votes[0] != votes[1] ? (votes[1] > votes[0] ? 1 : 0) : first;
    const double bar = graph.penalty_multiplier(8 * puc), cross = graph.penalty_multiplier(8 * puc + 1);
    if (bar != cross) keep = bar < cross ? 0 : 1;
    for (int k = 0; k < 4; ++k) arcs.push_back(8 * puc + 2 * k + (1 - keep));
  }
  return arcs;
}

// Routes one pair on the penalized weights, with every arc that would contradict
// a state held by another pair's current path made penalty_factor times dearer.
// That surcharge lasts for this query only.
LightPath reroute(Router& router, const MeshGraph& graph, const IoPair& pair,
                  const std::map<IoPair, LightPath>& paths, double factor, RouteConstraints& scratch) {
  scratch.arc_weight.resize(static_cast<std::size_t>(graph.internal_arc_count()));
  for (ArcId a = 0; a < graph.internal_arc_count(); ++a) scratch.arc_weight[a] = graph.effective_weight(a);
  std::vector<std::uint8_t> held(static_cast<std::size_t>(graph.puc_count()), 0);
  for (const auto& [other, path] : paths) {
    if (other == pair) continue;
    for (const auto& [puc, tag] : path.required_states) held[puc] |= tag == ArcTag::Bar ? 1 : 2;
  }
  for (int puc = 0; puc < graph.puc_count(); ++puc) {
    for (int tag = 0; tag < 2; ++tag) {
      if ((held[puc] & (2 >> tag)) == 0) continue;  // nobody holds the other state
      for (int k = 0; k < 4; ++k) scratch.arc_weight[8 * puc + 2 * k + tag] *= factor;
    }
  }
  return router.route(pair.first, pair.second, &scratch);
}

SwitchConfig edge_penalty(MeshGraph& graph, const SwitchRequest& req,
                          std::vector<SwitchIteration>* trace) {
  PenaltyScope scope(graph);
  Router router(graph);
  RouteConstraints scratch;
  std::map<IoPair, LightPath> paths;
  for (const auto& pair : req.io_pairs) paths[pair] = router.route(pair.first, pair.second);

  for (int iter = 0; iter < req.max_iter; ++iter) {
    ConflictSet conflicts = get_conflict_edges(values(paths));
    if (conflicts.empty()) {
      // Every conflict-free state ends the search, so the first one is also the
      // best one seen.
      return finish(graph, paths, iter);
    }
    std::vector<ArcId> arcs = losing_arcs(graph, req.io_pairs, paths, conflicts.pucs);
    graph.apply_penalty(arcs, req.penalty_factor);
    if (trace != nullptr) {
      trace->push_back({conflicts, arcs, {}});
      for (ArcId a = 0; a < graph.internal_arc_count(); ++a) {
        if (graph.penalty_multiplier(a) != 1.0) trace->back().penalized_so_far.push_back(a);
      }
    }
    // Re-routed one after another in request order, each seeing the states the
    // others hold at that moment.
    for (const auto& pair : req.io_pairs) {
      if (!conflicts.pairs.contains(pair)) continue;
      LightPath p = reroute(router, graph, pair, paths, req.penalty_factor, scratch);
      paths[pair] = make_path(graph, pair.first, pair.second, std::move(p.nodes));
    }
  }
  throw Unsolved("edge-penalty switch synthesis found no conflict-free configuration within " +
                 std::to_string(req.max_iter) + " iterations");
}

SwitchConfig sequential(MeshGraph& graph, const SwitchRequest& req) {
  PenaltyScope scope(graph);
  Router router(graph);
  for (const auto& [in, out] : req.io_pairs) router.route(in, out);

  std::vector<std::size_t> order(req.io_pairs.size());
  std::iota(order.begin(), order.end(), 0);
  int tries = 0;
  do {
    if (tries == req.max_iter) break;
    ++tries;
    RouteConstraints c;
    c.allowed.assign(graph.puc_count(), RouteConstraints::kAny);
    std::map<IoPair, LightPath> paths;
    bool ok = true;
    for (std::size_t i : order) {
      const auto& pair = req.io_pairs[i];
      try {
        LightPath p = router.route(pair.first, pair.second, &c);
        for (const auto& [puc, tag] : p.required_states) {
          c.allowed[puc] = tag == ArcTag::Bar ? RouteConstraints::kBar : RouteConstraints::kCross;
        }
        paths.emplace(pair, std::move(p));
      } catch (const NoRoute&) {
        ok = false;
        break;
      }
    }
    if (ok) return finish(graph, paths, tries - 1);
  } while (std::next_permutation(order.begin(), order.end()));
  throw Unsolved("sequential switch synthesis found no conflict-free configuration after " +
                 std::to_string(tries) + " pair orders");
}

}  // namespace

SwitchConfig auto_switch(MeshGraph& graph, const SwitchRequest& request,
                         std::vector<SwitchIteration>* trace) {
  request.validate();
  if (request.algorithm == SwitchAlgorithm::EdgePenalty) return edge_penalty(graph, request, trace);
  return sequential(graph, request);
}

std::vector<IoPair> permutation_pairs(const std::vector<int>& inputs, const std::vector<int>& outputs,
                                      const std::vector<int>& permutation) {
  if (inputs.size() != outputs.size() || permutation.size() != inputs.size()) {
    throw std::invalid_argument("inputs, outputs and permutation must have equal length");
  }
  std::vector<IoPair> pairs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    pairs.emplace_back(inputs[i], outputs.at(static_cast<std::size_t>(permutation[i])));
  }
  return pairs;
}

SweepReport feasibility_sweep(const MeshGraph& graph, const std::vector<int>& inputs,
                              const std::vector<int>& outputs, int max_iter,
                              SwitchAlgorithm algorithm, int threads) {
  if (inputs.size() != outputs.size() || inputs.empty() || inputs.size() > 8) {
    throw std::invalid_argument("feasibility_sweep needs 1..8 inputs and as many outputs");
  }
  std::vector<std::vector<int>> perms;
  std::vector<int> perm(inputs.size());
  std::iota(perm.begin(), perm.end(), 0);
  do {
    perms.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));

  SweepReport report;
  report.entries.resize(perms.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    MeshGraph local = graph;
    for (std::size_t i = next++; i < perms.size(); i = next++) {
      SweepEntry& e = report.entries[i];
      e.permutation = perms[i];
      SwitchRequest req{permutation_pairs(inputs, outputs, perms[i]), max_iter, algorithm};
      try {
        const SwitchConfig cfg = auto_switch(local, req);
        e.solved = true;
        e.iterations = cfg.iterations_used;
        e.total_weight = cfg.total_weight;
        double lo = cfg.paths.begin()->second.total_weight, hi = lo;
        for (const auto& [pair, p] : cfg.paths) {
          lo = std::min(lo, p.total_weight);
          hi = std::max(hi, p.total_weight);
        }
        e.weight_spread = hi - lo;
      } catch (const Error& ex) {
        e.error = ex.what();
      }
    }
  };
  const int n = std::clamp(threads, 1, static_cast<int>(perms.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : report.entries) {
    if (!e.solved) continue;
    ++report.solved;
    ++report.iteration_histogram[e.iterations];
  }
  return report;
}

}  // namespace pmesh
