#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "pmesh/graph.hpp"
#include "pmesh/topology.hpp"

namespace pmesh::testing {

inline int port_index(const MeshTopology& t, int puc, PortSide side) {
  auto idx = t.external_index({puc, side});
  if (!idx) throw std::logic_error("not an external port: " + std::to_string(puc));
  return *idx;
}

/// Small random mesh (<= 12 PUCs) with random per-PUC attributes. Returns a
/// connected topology with at least two usable ports.
inline MeshTopology random_small_mesh(std::mt19937_64& rng) {
  static constexpr int kShapes[3][2] = {{1, 1}, {2, 1}, {1, 2}};
  std::uniform_real_distribution<double> il(-1.0, -0.05);
  std::uniform_real_distribution<double> unit(0.5, 2.0);
  for (;;) {
    const auto& s = kShapes[std::uniform_int_distribution<int>(0, 2)(rng)];
    MeshTopology t = generate_hex_mesh(s[0], s[1]);
    const int drop = std::uniform_int_distribution<int>(0, 2)(rng);
    std::set<int> removed;
    for (int i = 0; i < drop; ++i) {
      removed.insert(std::uniform_int_distribution<int>(0, static_cast<int>(t.puc_count()) - 1)(rng));
    }
    if (!removed.empty()) t = remove_pucs(t, removed);
    std::vector<Puc> pucs = t.pucs();
    for (auto& p : pucs) {
      // Quantized values keep exact ties between different routes likely.
      p.il_db = std::round(il(rng) * 8.0) / 8.0;
      p.bul = unit(rng);
      p.power_mw = unit(rng);
    }
    t = t.with_pucs(std::move(pucs));
    if (validate_topology(t).empty() && t.usable_ports().size() >= 2) return t;
  }
}

/// The route the router must return among an exhaustive list: minimum weight (ties
/// within 1e-12 relative), then fewest PUC traversals, then smallest node sequence.
inline LightPath preferred_route(const std::vector<LightPath>& all) {
  double best = all.front().total_weight;
  for (const auto& p : all) best = std::min(best, p.total_weight);
  const double tol = 1e-12 * std::max(1.0, std::abs(best));
  const LightPath* pick = nullptr;
  for (const auto& p : all) {
    if (p.total_weight > best + tol) continue;
    if (pick == nullptr || p.nodes.size() < pick->nodes.size() ||
        (p.nodes.size() == pick->nodes.size() && p.nodes < pick->nodes)) {
      pick = &p;
    }
  }
  return *pick;
}

}  // namespace pmesh::testing
