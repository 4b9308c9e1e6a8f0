#include "pmesh/interconnect.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "pmesh/errors.hpp"

namespace pmesh {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kBranchBudget = 1'000'000;

void check_ports(const MeshTopology& t, int in_port, int out_port) {
  for (int p : {in_port, out_port}) {
    if (!t.has_external_port(p)) {
      throw std::invalid_argument("port " + std::to_string(p) + " is not an external port");
    }
    if (!t.is_usable(p)) {
      throw std::invalid_argument("port " + std::to_string(p) + " is not usable as I/O");
    }
  }
  if (in_port == out_port) throw std::invalid_argument("input and output port must differ");
}

}  // namespace

Router::Router(const MeshGraph& graph) : graph_(&graph) {
  const auto n = static_cast<std::size_t>(graph.node_count());
  done_.assign(n, 0);
  tag_seen_.assign(static_cast<std::size_t>(graph.puc_count()), 0);
  tag_.assign(static_cast<std::size_t>(graph.puc_count()), ArcTag::Bar);
  heap_.reserve(n);
}

int Router::compare(const Cost& a, const Cost& b) {
  if (a.w != b.w) {
    if (std::isinf(a.w) || std::isinf(b.w)) return a.w < b.w ? -1 : 1;
    const double tol = 1e-12 * std::max({1.0, std::abs(a.w), std::abs(b.w)});
    if (a.w < b.w - tol) return -1;
    if (a.w > b.w + tol) return 1;
  }
  return a.hops < b.hops ? -1 : (a.hops > b.hops ? 1 : 0);
}

double Router::weight(ArcId a) const {
  if (constraints_ != nullptr && !constraints_->arc_weight.empty()) return constraints_->arc_weight[a];
  return graph_->effective_weight(a);
}

bool Router::allowed(ArcId a) const {
  return mask_ == nullptr || (((*mask_)[arc_puc(a)] >> static_cast<int>(arc_tag(a))) & 1) != 0;
}

namespace {
struct HeapGreater {
  template <typename T>
  bool operator()(const T& l, const T& r) const {
    if (l.w != r.w) return l.w > r.w;
    if (l.hops != r.hops) return l.hops > r.hops;
    return l.node > r.node;
  }
};
}  // namespace

// An outbound node's only successor is the inbound node across its waveguide, so
// both share one distance. The heap holds inbound nodes only; settling one settles
// the outbound node feeding it.
void Router::fill_field(NodeId target, Field& dist) {
  if (++stamp_ == 0) {
    std::fill(done_.begin(), done_.end(), 0);
    stamp_ = 1;
  }
  dist.assign(done_.size(), {kInf, std::numeric_limits<int>::max() / 2});
  heap_.clear();
  dist[target] = {0.0, 0};
  done_[target] = stamp_;
  relax_tails(target, dist);
  while (!heap_.empty()) {
    std::pop_heap(heap_.begin(), heap_.end(), HeapGreater{});
    const HeapItem top = heap_.back();
    heap_.pop_back();
    const NodeId u = top.node;
    if (done_[u] == stamp_ || dist[u].w != top.w || dist[u].hops != top.hops) continue;
    done_[u] = stamp_;
    const NodeId pred = graph_->link_predecessor(u);
    if (pred < 0 || done_[pred] == stamp_) continue;
    dist[pred] = dist[u];
    done_[pred] = stamp_;
    relax_tails(pred, dist);
  }
}

void Router::relax_tails(NodeId out, Field& dist) {
  const Cost d = dist[out];
  const PortRef r = port_of_node(out);
  for (ArcTag tag : {ArcTag::Bar, ArcTag::Cross}) {
    const NodeId tail = in_node({r.puc, exit_side(r.side, tag)});
    const ArcId a = arc_id(tail, tag);
    if (!allowed(a) || done_[tail] == stamp_) continue;
    const double w = weight(a);
    if (std::isinf(w)) continue;
    const Cost c = add(d, {w, 1});
    if (dist[tail].w < c.w || (dist[tail].w == c.w && dist[tail].hops <= c.hops)) continue;
    dist[tail] = c;
    heap_.push_back({c.w, c.hops, tail});
    std::push_heap(heap_.begin(), heap_.end(), HeapGreater{});
  }
}

const Router::Field& Router::cached_field(NodeId target) {
  auto [it, fresh] = fields_.try_emplace(target);
  CachedField& f = it->second;
  if (fresh || f.version != graph_->weights_version()) {
    fill_field(target, f.dist);
    f.version = graph_->weights_version();
  }
  return f.dist;
}

// Follows tight arcs from the source, smallest head node first. An arc is tight
// when it accounts for the whole distance drop from its tail, so the walk yields
// the lexicographically smallest optimal route.
void Router::walk(const Field& dist, NodeId source, std::vector<NodeId>& nodes) const {
  nodes.assign(1, source);
  for (NodeId u = source; u != target_;) {
    NodeId next = -1;
    if (!is_in_node(u)) {
      next = graph_->link_successor(u);
    } else {
      ArcId arcs[2] = {arc_id(u, ArcTag::Bar), arc_id(u, ArcTag::Cross)};
      if (arc_head(arcs[1]) < arc_head(arcs[0])) std::swap(arcs[0], arcs[1]);
      for (ArcId a : arcs) {
        if (allowed(a) && !std::isinf(weight(a)) &&
            compare(add(dist[arc_head(a)], {weight(a), 1}), dist[u]) <= 0) {
          next = arc_head(a);
          break;
        }
      }
    }
    if (next < 0 || nodes.size() > done_.size()) {
      throw InvariantViolation("route reconstruction left the distance field");
    }
    nodes.push_back(next);
    u = next;
  }
}

// The first PUC the route enters in a state other than the one it used before,
// or -1 when the route keeps every PUC in one state.
int Router::first_conflict(const std::vector<NodeId>& nodes) {
  if (++tag_stamp_ == 0) {
    std::fill(tag_seen_.begin(), tag_seen_.end(), 0);
    tag_stamp_ = 1;
  }
  for (std::size_t i = 0; i + 1 < nodes.size(); i += 2) {
    const int p = puc_of_node(nodes[i]);
    const ArcTag tag =
        exit_side(side_of_node(nodes[i]), ArcTag::Bar) == side_of_node(nodes[i + 1]) ? ArcTag::Bar
                                                                                      : ArcTag::Cross;
    if (tag_seen_[p] != tag_stamp_) {
      tag_seen_[p] = tag_stamp_;
      tag_[p] = tag;
    } else if (tag_[p] != tag) {
      return p;
    }
  }
  return -1;
}

bool Router::target_reachable(NodeId from) {
  if (++seen_stamp_ == 0) {
    std::fill(seen_.begin(), seen_.end(), 0);
    seen_stamp_ = 1;
  }
  stack_.assign(1, target_);
  seen_[target_] = seen_stamp_;
  while (!stack_.empty()) {
    const PortRef r = port_of_node(stack_.back());
    stack_.pop_back();
    for (ArcTag tag : {ArcTag::Bar, ArcTag::Cross}) {
      if (((fixed_[r.puc] >> static_cast<int>(tag)) & 1) == 0) continue;
      const NodeId in = in_node({r.puc, exit_side(r.side, tag)});
      if (lit_[in] || seen_[in] == seen_stamp_ || std::isinf(weight(arc_id(in, tag)))) continue;
      if (in == from) return true;
      seen_[in] = seen_stamp_;
      const NodeId pred = graph_->link_predecessor(in);
      if (pred < 0 || lit_[pred] || seen_[pred] == seen_stamp_) continue;
      seen_[pred] = seen_stamp_;
      stack_.push_back(pred);
    }
  }
  return false;
}

// True when some state choice carries light from `in` to the target. Throws
// nothing; a spent budget leaves `budget` at zero and returns false.
bool Router::trajectory(NodeId in, std::size_t& budget) {
  if (budget == 0) return false;
  --budget;
  if (!target_reachable(in)) return false;
  const int p = puc_of_node(in);
  const std::uint8_t before = fixed_[p];
  for (ArcTag tag : {ArcTag::Bar, ArcTag::Cross}) {
    const std::uint8_t bit = static_cast<std::uint8_t>(1 << static_cast<int>(tag));
    if ((before & bit) == 0 || std::isinf(weight(arc_id(in, tag)))) continue;
    const NodeId out = arc_head(arc_id(in, tag));
    if (lit_[out]) continue;
    fixed_[p] = bit;
    lit_[in] = lit_[out] = 1;
    bool ok = out == target_;
    if (!ok) {
      const NodeId next = graph_->link_successor(out);
      ok = next >= 0 && !lit_[next] && trajectory(next, budget);
    }
    lit_[in] = lit_[out] = 0;
    fixed_[p] = before;
    if (ok) return true;
    if (budget == 0) return false;
  }
  return false;
}

Router::Proof Router::prove(NodeId source, const Mask& root, std::size_t budget) {
  fixed_ = root;
  lit_.assign(done_.size(), 0);
  seen_.resize(done_.size(), 0);
  if (trajectory(source, budget)) return Proof::Routable;
  return budget == 0 ? Proof::Undecided : Proof::Unroutable;
}

LightPath Router::route(int in_port, int out_port, const RouteConstraints* constraints) {
  const MeshTopology& topo = graph_->topology();
  check_ports(topo, in_port, out_port);
  if (constraints != nullptr) {
    if (!constraints->allowed.empty() &&
        constraints->allowed.size() != static_cast<std::size_t>(graph_->puc_count())) {
      throw std::invalid_argument("RouteConstraints::allowed must have one entry per PUC");
    }
    if (!constraints->arc_weight.empty() &&
        constraints->arc_weight.size() != static_cast<std::size_t>(graph_->internal_arc_count())) {
      throw std::invalid_argument("RouteConstraints::arc_weight must have one entry per arc");
    }
  }
  struct Reset {
    Router* r;
    ~Reset() {
      r->constraints_ = nullptr;
      r->mask_ = nullptr;
    }
  } reset{this};
  constraints_ = constraints;
  mask_ = nullptr;
  branches_ = 0;

  const NodeId source = graph_->port_in_node(in_port);
  target_ = graph_->port_out_node(out_port);

  auto later = [](const Branch& l, const Branch& r) {
    const int c = compare(l.cost, r.cost);
    return c != 0 ? c > 0 : l.nodes > r.nodes;
  };
  std::vector<Branch> open;
  std::set<Mask> seen;
  auto push = [&](Mask mask, const Field& dist) {
    if (!std::isfinite(dist[source].w)) return;
    Branch b{dist[source], {}, std::move(mask)};
    mask_ = &b.mask;
    walk(dist, source, b.nodes);
    open.push_back(std::move(b));
    std::push_heap(open.begin(), open.end(), later);
  };

  Mask root = constraints_ != nullptr && !constraints_->allowed.empty()
                  ? constraints_->allowed
                  : Mask(static_cast<std::size_t>(graph_->puc_count()), RouteConstraints::kAny);
  const Mask root_copy = root;
  std::size_t next_proof = 256;
  bool routable = false;
  if (constraints_ == nullptr || (constraints_->allowed.empty() && constraints_->arc_weight.empty())) {
    push(std::move(root), cached_field(target_));
  } else {
    mask_ = &root;
    fill_field(target_, scratch_);
    push(std::move(root), scratch_);
  }

  while (!open.empty()) {
    std::pop_heap(open.begin(), open.end(), later);
    Branch b = std::move(open.back());
    open.pop_back();
    const int p = first_conflict(b.nodes);
    if (p < 0) return make_path(*graph_, in_port, out_port, std::move(b.nodes));
    // Every state-consistent route obeys one of the two restrictions, and each
    // child's optimum is no cheaper and no smaller than the parent's.
    if (!routable && branches_ >= next_proof) {
      const Proof proof = prove(source, root_copy, 64 * next_proof);
      if (proof == Proof::Unroutable) break;
      routable = proof == Proof::Routable;
      next_proof *= 16;
    }
    for (std::uint8_t keep : {RouteConstraints::kBar, RouteConstraints::kCross}) {
      if (++branches_ > kBranchBudget) throw NoRoute("route search budget exhausted");
      Mask child = b.mask;
      child[p] &= keep;
      if (!seen.insert(child).second) continue;
      mask_ = &child;
      fill_field(target_, scratch_);
      push(std::move(child), scratch_);
    }
  }
  throw NoRoute("no route from port " + std::to_string(in_port) + " to port " +
                std::to_string(out_port));
}

LightPath shortest_path(const MeshGraph& graph, int in_port, int out_port) {
  Router router(graph);
  return router.route(in_port, out_port);
}

LightPath shortest_path(const MeshGraph& graph, int in_port, int out_port,
                        const RouteConstraints& constraints) {
  Router router(graph);
  return router.route(in_port, out_port, &constraints);
}

LightPath self_heal(const MeshGraph& graph, int in_port, int out_port,
                    const std::set<int>& failed_pucs) {
  RouteConstraints c;
  c.allowed.assign(static_cast<std::size_t>(graph.puc_count()), RouteConstraints::kAny);
  for (int p : failed_pucs) {
    if (p < 0 || p >= graph.puc_count()) {
      throw std::invalid_argument("unknown PUC id " + std::to_string(p));
    }
    c.allowed[p] = 0;
  }
  Router router(graph);
  return router.route(in_port, out_port, &c);
}

std::vector<LightPath> enumerate_paths(const MeshGraph& graph, int in_port, int out_port,
                                       int max_pucs) {
  check_ports(graph.topology(), in_port, out_port);
  std::vector<LightPath> out;
  if (max_pucs <= 0) return out;

  const NodeId target = graph.port_out_node(out_port);
  // Per PUC: -1 untouched, otherwise the tag every traversal must use.
  std::vector<int> state(static_cast<std::size_t>(graph.puc_count()), -1);
  std::vector<char> seen(static_cast<std::size_t>(graph.node_count()), 0);
  std::vector<NodeId> trail;
  int distinct = 0;

  std::function<void(NodeId)> walk = [&](NodeId in) {
    if (seen[in]) return;
    const int p = puc_of_node(in);
    const bool fresh = state[p] < 0;
    if (fresh && distinct == max_pucs) return;
    seen[in] = 1;
    trail.push_back(in);
    distinct += fresh;
    for (int tag = 0; tag < 2; ++tag) {
      if (!fresh && state[p] != tag) continue;
      if (fresh) state[p] = tag;
      const NodeId head = arc_head(arc_id(in, static_cast<ArcTag>(tag)));
      trail.push_back(head);
      if (head == target) {
        out.push_back(make_path(graph, in_port, out_port, trail));
      } else if (const NodeId next = graph.link_successor(head); next >= 0) {
        walk(next);
      }
      trail.pop_back();
      if (fresh) state[p] = -1;
    }
    distinct -= fresh;
    trail.pop_back();
    seen[in] = 0;
  };
  walk(graph.port_in_node(in_port));

  std::sort(out.begin(), out.end(), [](const LightPath& a, const LightPath& b) {
    if (a.total_weight != b.total_weight) return a.total_weight < b.total_weight;
    if (a.nodes.size() != b.nodes.size()) return a.nodes.size() < b.nodes.size();
    return a.nodes < b.nodes;
  });
  return out;
}

BatchResult route_batch(const MeshGraph& graph, std::span<const std::pair<int, int>> pairs) {
  BatchResult result;
  Router router(graph);
  for (const auto& [in, out] : pairs) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      result.paths.emplace_back(router.route(in, out));
      result.errors.emplace_back();
    } catch (const NoRoute& e) {
      result.paths.emplace_back(std::nullopt);
      result.errors.emplace_back(e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    result.per_path_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  if (!result.per_path_us.empty()) {
    std::vector<double> sorted = result.per_path_us;
    std::sort(sorted.begin(), sorted.end());
    result.mean_us = std::accumulate(sorted.begin(), sorted.end(), 0.0) / sorted.size();
    const std::size_t n = sorted.size();
    result.median_us = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    const auto idx = static_cast<std::size_t>(std::ceil(0.99 * n)) - 1;
    result.p99_us = sorted[std::min(idx, n - 1)];
  }
  return result;
}

}  // namespace pmesh
