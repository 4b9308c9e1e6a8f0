#include "pmesh/multicast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pmesh/errors.hpp"
#include "pmesh/interconnect.hpp"

namespace pmesh {

std::string_view to_string(IlSource s) {
  return s == IlSource::PerPuc ? "per_puc" : "global_average";
}

IlSource parse_il_source(std::string_view text) {
  if (text == "per_puc") return IlSource::PerPuc;
  if (text == "global_average") return IlSource::GlobalAverage;
  throw std::invalid_argument("unknown IL source \"" + std::string(text) + "\"");
}

void MulticastRequest::validate() const {
  if (output_ports.empty()) throw std::invalid_argument("multicast request has no outputs");
  std::set<int> seen;
  for (int p : output_ports) {
    if (p == input_port) {
      throw std::invalid_argument("output port " + std::to_string(p) + " equals the input");
    }
    if (!seen.insert(p).second) {
      throw std::invalid_argument("output port " + std::to_string(p) + " appears twice");
    }
  }
  if (proportion.empty()) return;
  if (proportion.size() != output_ports.size()) {
    throw std::invalid_argument("proportion needs one entry per output");
  }
  for (double s : proportion) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("proportion entries must be > 0");
  }
  const double sum = std::accumulate(proportion.begin(), proportion.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("proportion must sum to 1");
}

std::vector<double> MulticastRequest::shares() const {
  if (!proportion.empty()) return proportion;
  return std::vector<double>(output_ports.size(), 1.0 / static_cast<double>(output_ports.size()));
}

std::set<int> get_tunable_pucs(const std::vector<LightPath>& paths) {
  std::map<int, std::uint8_t> seen;
  for (const auto& p : paths) {
    for (const auto& [puc, tag] : p.required_states) seen[puc] |= tag == ArcTag::Bar ? 1 : 2;
  }
  std::set<int> out;
  for (const auto& [puc, bits] : seen) {
    if (bits == 3) out.insert(puc);
  }
  return out;
}

double splitting_ratio(double k_target, double il_bar_db, double il_cross_db) {
  if (!(k_target >= 0.0 && k_target <= 1.0)) {
    throw std::invalid_argument("ideal splitting ratio must lie in [0, 1]");
  }
  if (il_bar_db == il_cross_db) return k_target;
  // Cross carries k * t_cross and bar (1 - k) * t_bar; their ratio must be
  // k_target : (1 - k_target).
  const double cross_over_bar = std::pow(10.0, (il_cross_db - il_bar_db) / 10.0);
  return k_target / ((1.0 - k_target) * cross_over_bar + k_target);
}

double child_branch_loss_db(double k_child, double onward_db, double connecting_db) {
  return 10.0 * std::log10(k_child) + onward_db + connecting_db;
}

MulticastTree::MulticastTree(const MeshGraph& graph, int input_port, std::vector<LightPath> paths)
    : graph_(&graph), input_port_(input_port), paths_(std::move(paths)) {
  if (paths_.empty()) throw std::invalid_argument("a multicast tree needs at least one path");
  const NodeId source = graph.port_in_node(input_port);
  std::map<NodeId, std::pair<NodeId, int>> parent;  // node -> (predecessor, owning path)
  for (int i = 0; i < static_cast<int>(paths_.size()); ++i) {
    const auto& n = paths_[i].nodes;
    if (n.empty() || n.front() != source) {
      throw std::invalid_argument("every multicast path must start at the input port");
    }
    for (std::size_t j = 1; j < n.size(); ++j) {
      auto [it, fresh] = parent.try_emplace(n[j], n[j - 1], i);
      if (!fresh && it->second.first != n[j - 1]) {
        throw TreeConflict("routes to ports " + std::to_string(paths_[it->second.second].out_port) +
                           " and " + std::to_string(paths_[i].out_port) + " meet again at node " +
                           std::to_string(n[j]) + " after splitting");
      }
    }
    for (std::size_t j = 0; j + 1 < n.size(); j += 2) {
      const bool bar = exit_side(side_of_node(n[j]), ArcTag::Bar) == side_of_node(n[j + 1]);
      in_tags_[n[j]] |= bar ? 1 : 2;
    }
    leaf_of_[n.back()] = paths_[i].out_port;
  }

  std::map<int, std::vector<NodeId>> entries;
  for (const auto& [in, bits] : in_tags_) entries[puc_of_node(in)].push_back(in);
  for (const auto& [puc, ins] : entries) {
    std::uint8_t bits = 0;
    NodeId split = -1;
    for (NodeId in : ins) {
      bits |= in_tags_[in];
      if (in_tags_[in] == 3) split = in;
    }
    if (split >= 0) {
      if (ins.size() > 1) {
        throw TreeConflict("PUC " + std::to_string(puc) + " would split one signal while steering another");
      }
      TunableCoupler c;
      c.puc = puc;
      c.split_node = split;
      couplers_.push_back(c);
    } else if (bits == 3) {
      throw TreeConflict("PUC " + std::to_string(puc) + " is needed in both states by separate branches");
    } else {
      fixed_[puc] = bits == 1 ? ArcTag::Bar : ArcTag::Cross;
    }
  }

  for (auto& c : couplers_) {
    for (const auto& p : paths_) {
      const auto it = std::find(p.nodes.begin(), p.nodes.end(), c.split_node);
      if (it == p.nodes.end()) continue;
      const auto pos = static_cast<std::size_t>(it - p.nodes.begin());
      c.depth = static_cast<int>(pos / 2);
      const bool bar = exit_side(side_of_node(p.nodes[pos]), ArcTag::Bar) == side_of_node(p.nodes[pos + 1]);
      (bar ? c.bar_outputs : c.cross_outputs).push_back(p.out_port);
    }
  }
  std::sort(couplers_.begin(), couplers_.end(), [](const TunableCoupler& a, const TunableCoupler& b) {
    return a.depth != b.depth ? a.depth > b.depth : a.puc < b.puc;
  });
  for (std::size_t i = 0; i < couplers_.size(); ++i) coupler_at_[couplers_[i].split_node] = i;
}

MulticastTree::Chain MulticastTree::chain(std::size_t coupler, ArcTag side) const {
  Chain out;
  NodeId node = arc_head(arc_id(couplers_.at(coupler).split_node, side));
  for (;;) {
    if (auto leaf = leaf_of_.find(node); leaf != leaf_of_.end()) {
      out.output = leaf->second;
      return out;
    }
    const NodeId in = graph_->link_successor(node);
    out.pucs.push_back(puc_of_node(in));
    if (auto c = coupler_at_.find(in); c != coupler_at_.end()) {
      out.next_coupler = static_cast<int>(c->second);
      return out;
    }
    const ArcTag tag = in_tags_.at(in) == 1 ? ArcTag::Bar : ArcTag::Cross;
    node = arc_head(arc_id(in, tag));
  }
}

namespace {

double share_of(const std::vector<int>& ports, const std::map<int, double>& share) {
  double s = 0.0;
  for (int p : ports) s += share.at(p);
  return s;
}

std::map<int, double> share_map(const std::vector<int>& outputs, const std::vector<double>& shares) {
  if (outputs.size() != shares.size()) throw std::invalid_argument("one share per output is required");
  std::map<int, double> m;
  for (std::size_t i = 0; i < outputs.size(); ++i) m[outputs[i]] = shares[i];
  return m;
}

}  // namespace

std::map<int, double> target_ratios(const MulticastTree& tree, const std::vector<int>& outputs,
                                    const std::vector<double>& shares) {
  const auto share = share_map(outputs, shares);
  std::map<int, double> out;
  for (const auto& c : tree.couplers()) {
    const double cross = share_of(c.cross_outputs, share), bar = share_of(c.bar_outputs, share);
    out[c.puc] = cross / (cross + bar);
  }
  return out;
}

std::vector<TunableCoupler> solve_couplers(const MulticastTree& tree, const std::vector<int>& outputs,
                                           const std::vector<double>& shares,
                                           const std::vector<double>& il_per_puc,
                                           const std::vector<std::size_t>& order) {
  const auto share = share_map(outputs, shares);
  std::vector<TunableCoupler> cs = tree.couplers();
  std::vector<char> done(cs.size(), 0);
  for (std::size_t idx : order) {
    TunableCoupler& c = cs.at(idx);
    const double cross = share_of(c.cross_outputs, share), bar = share_of(c.bar_outputs, share);
    c.k_target = cross / (cross + bar);
    for (ArcTag side : {ArcTag::Bar, ArcTag::Cross}) {
      const auto ch = tree.chain(idx, side);
      double il = 0.0;
      for (int p : ch.pucs) il += il_per_puc.at(p);
      if (ch.next_coupler >= 0) {
        const TunableCoupler& q = cs[ch.next_coupler];
        if (!done[ch.next_coupler]) {
          throw EvaluationOrderError("coupler at PUC " + std::to_string(c.puc) +
                                     " evaluated before its child at PUC " + std::to_string(q.puc));
        }
        // The child's cross branch carries k_target of the child's subtree power.
        il = child_branch_loss_db(q.k, q.il_cross_db, il) - 10.0 * std::log10(q.k_target);
      }
      (side == ArcTag::Bar ? c.il_bar_db : c.il_cross_db) = il;
    }
    c.k = splitting_ratio(c.k_target, c.il_bar_db, c.il_cross_db);
    done[idx] = 1;
  }
  return cs;
}

namespace {

// Cheapest route to `out` that follows the tree from the input, leaves it at one
// inbound node through the arc the tree does not use, and never meets the tree
// again. Any route that keeps the paths a tree has this shape.
LightPath graft(const MeshGraph& graph, Router& router, int in_port, int out,
                const std::vector<LightPath>& tree) {
  std::map<NodeId, std::uint8_t> in_tags;
  std::map<int, std::set<NodeId>> entries;
  for (const auto& p : tree) {
    for (std::size_t j = 0; j + 1 < p.nodes.size(); j += 2) {
      const bool bar = exit_side(side_of_node(p.nodes[j]), ArcTag::Bar) == side_of_node(p.nodes[j + 1]);
      in_tags[p.nodes[j]] |= bar ? 1 : 2;
      entries[puc_of_node(p.nodes[j])].insert(p.nodes[j]);
    }
  }
  constexpr double kForbidden = std::numeric_limits<double>::infinity();
  std::vector<double> base(static_cast<std::size_t>(graph.internal_arc_count()));
  for (ArcId a = 0; a < graph.internal_arc_count(); ++a) base[a] = graph.effective_weight(a);
  for (const auto& [puc, ins] : entries) {
    std::uint8_t bits = 0;
    for (NodeId in : ins) bits |= in_tags[in];
    for (int k = 0; k < 8; ++k) {
      const ArcId a = 8 * puc + k;
      // Couplers take no second signal; fixed PUCs keep their state; tree nodes
      // are never re-entered.
      if (bits == 3 || ((bits >> static_cast<int>(arc_tag(a))) & 1) == 0 || ins.contains(arc_tail(a))) {
        base[a] = kForbidden;
      }
    }
  }

  std::optional<LightPath> best;
  std::set<NodeId> tried;
  for (const auto& p : tree) {
    for (std::size_t j = 0; j + 1 < p.nodes.size(); j += 2) {
      const NodeId u = p.nodes[j];
      const int puc = puc_of_node(u);
      if (!tried.insert(u).second || in_tags[u] == 3 || entries[puc].size() != 1) continue;
      RouteConstraints c;
      c.arc_weight = base;
      for (std::size_t i = 0; i < j; i += 2) {
        const ArcId a = arc_id(p.nodes[i], in_tags[p.nodes[i]] == 3
                                               ? (exit_side(side_of_node(p.nodes[i]), ArcTag::Bar) ==
                                                          side_of_node(p.nodes[i + 1])
                                                      ? ArcTag::Bar
                                                      : ArcTag::Cross)
                                               : (in_tags[p.nodes[i]] == 1 ? ArcTag::Bar : ArcTag::Cross));
        c.arc_weight[a] = graph.effective_weight(a);
      }
      for (int k = 0; k < 8; ++k) c.arc_weight[8 * puc + k] = kForbidden;
      const ArcId leave = arc_id(u, in_tags[u] == 1 ? ArcTag::Cross : ArcTag::Bar);
      c.arc_weight[leave] = graph.effective_weight(leave);
      try {
        LightPath cand = router.route(in_port, out, &c);
        if (!best || cand.total_weight < best->total_weight - 1e-12 * std::max(1.0, best->total_weight) ||
            (cand.total_weight <= best->total_weight + 1e-12 * std::max(1.0, best->total_weight) &&
             cand.nodes < best->nodes)) {
          best = std::move(cand);
        }
      } catch (const NoRoute&) {
      }
    }
  }
  if (!best) {
    throw TreeConflict("no route to port " + std::to_string(out) + " can join the multicast tree");
  }
  return *std::move(best);
}

bool forms_tree(const MeshGraph& graph, int input_port, const std::vector<LightPath>& paths) {
  try {
    MulticastTree probe(graph, input_port, paths);
    return true;
  } catch (const TreeConflict&) {
    return false;
  }
}

}  // namespace

std::vector<double> assumed_il(const MeshTopology& topology, IlSource source) {
  std::vector<double> il(topology.puc_count());
  for (const auto& p : topology.pucs()) il[p.id] = p.il_db;
  if (source == IlSource::GlobalAverage && !il.empty()) {
    const double mean = std::accumulate(il.begin(), il.end(), 0.0) / static_cast<double>(il.size());
    std::fill(il.begin(), il.end(), mean);
  }
  return il;
}

namespace {

// Routes the outputs in `order`, growing one tree. Returns the position in `order`
// of an output that cannot join, or -1 with `paths` filled in request order.
int grow_tree(const MeshGraph& graph, Router& router, const MulticastRequest& request,
              const std::vector<std::size_t>& order, std::vector<LightPath>& out) {
  std::vector<LightPath> paths;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const int target = request.output_ports[order[pos]];
    paths.push_back(router.route(request.input_port, target));
    if (forms_tree(graph, request.input_port, paths)) continue;
    // Make the tree built so far free to use so the new route follows it as far
    // as it can before branching off.
    RouteConstraints free_tree;
    free_tree.arc_weight.resize(static_cast<std::size_t>(graph.internal_arc_count()));
    for (ArcId a = 0; a < graph.internal_arc_count(); ++a) free_tree.arc_weight[a] = graph.effective_weight(a);
    for (std::size_t i = 0; i + 1 < paths.size(); ++i) {
      for (ArcId a : paths[i].arcs()) free_tree.arc_weight[a] = 0.0;
    }
    try {
      const LightPath shared = router.route(request.input_port, target, &free_tree);
      paths.back() = make_path(graph, request.input_port, target, shared.nodes);
      if (forms_tree(graph, request.input_port, paths)) continue;
    } catch (const NoRoute&) {
    }
    paths.pop_back();
    try {
      paths.push_back(graft(graph, router, request.input_port, target, paths));
    } catch (const TreeConflict&) {
      return static_cast<int>(pos);
    }
  }
  out.assign(order.size(), {});
  for (std::size_t pos = 0; pos < order.size(); ++pos) out[order[pos]] = std::move(paths[pos]);
  return -1;
}

}  // namespace

MulticastConfig auto_multicast(const MeshGraph& graph, const MulticastRequest& request) {
  request.validate();
  Router router(graph);
  std::vector<std::size_t> order(request.output_ports.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<LightPath> paths;
  // An output that cannot join the tree is moved to the front and the tree is
  // grown again, at most once per output.
  std::set<std::size_t> promoted;
  for (;;) {
    const int failed = grow_tree(graph, router, request, order, paths);
    if (failed < 0) break;
    const std::size_t idx = order[failed];
    if (!promoted.insert(idx).second) {
      throw TreeConflict("no route to port " + std::to_string(request.output_ports[idx]) +
                         " can join the multicast tree");
    }
    order.erase(order.begin() + failed);
    order.insert(order.begin(), idx);
  }

  MulticastTree tree(graph, request.input_port, paths);
  std::vector<std::size_t> child_first(tree.couplers().size());
  std::iota(child_first.begin(), child_first.end(), 0);

  MulticastConfig cfg;
  cfg.input_port = request.input_port;
  cfg.output_ports = request.output_ports;
  cfg.shares = request.shares();
  cfg.il_source = request.il_source;
  cfg.couplers = solve_couplers(tree, cfg.output_ports, cfg.shares,
                                assumed_il(graph.topology(), request.il_source), child_first);
  for (int p = 0; p < graph.puc_count(); ++p) cfg.states[p] = PucState::off();
  for (const auto& [puc, tag] : tree.fixed_states()) {
    cfg.states[puc] = tag == ArcTag::Bar ? PucState::bar() : PucState::cross();
  }
  for (const auto& c : cfg.couplers) cfg.states[c.puc] = PucState::tunable(c.k);
  cfg.paths = std::move(paths);
  return cfg;
}

}  // namespace pmesh
