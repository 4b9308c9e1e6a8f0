#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "pmesh/errors.hpp"
#include "pmesh/interconnect.hpp"

using namespace pmesh;
using testing::port_index;

TEST_CASE("ports on the same boundary PUC give a one-PUC route") {
  const auto t = generate_hex_mesh(1, 1);
  const auto g = build_graph(t);
  const auto p = shortest_path(g, port_index(t, 0, PortSide::A1), port_index(t, 0, PortSide::B1));
  CHECK(p.puc_count == 1);
  CHECK(p.required_states.at(0) == ArcTag::Bar);
  CHECK(p.total_weight == doctest::Approx(0.215));
}

TEST_CASE("ports at the same corner go around the ring") {
  // Both outer ports at the top vertex: the only way between them crosses onto the
  // inner ring, follows it through four bar PUCs and crosses back out.
  const auto t = generate_hex_mesh(1, 1);
  const auto g = build_graph(t);
  const int in = port_index(t, 0, PortSide::B1);
  const int out = port_index(t, 1, PortSide::A1);
  const auto p = shortest_path(g, in, out);
  CHECK(p.puc_count == 6);
  CHECK(p.pucs() == std::vector<int>{0, 2, 4, 5, 3, 1});
  CHECK(p.required_states.at(0) == ArcTag::Cross);
  CHECK(p.required_states.at(1) == ArcTag::Cross);
  for (int q : {2, 3, 4, 5}) CHECK(p.required_states.at(q) == ArcTag::Bar);
  const auto all = enumerate_paths(g, in, out, 6);
  REQUIRE(all.size() == 1);
  CHECK(all.front() == p);
}

TEST_CASE("enumerate_paths basics") {
  const auto t = generate_hex_mesh(1, 1);
  const auto g = build_graph(t);
  const int in = port_index(t, 0, PortSide::A1), out = port_index(t, 0, PortSide::B1);
  CHECK(enumerate_paths(g, in, out, 0).empty());
  // Direct bar route, or cross onto the inner ring, pass the five other PUCs in bar
  // and come back through PUC 0's other lane, still in the cross state.
  const auto paths = enumerate_paths(g, in, out, 6);
  REQUIRE(paths.size() == 2);
  CHECK(paths[0].puc_count == 1);
  CHECK(paths[1].puc_count == 6);
  CHECK(paths[1].pucs() == std::vector<int>{0, 1, 3, 5, 4, 2, 0});
  CHECK(paths[1].required_states.at(0) == ArcTag::Cross);
  CHECK(paths[1].total_weight == doctest::Approx(7 * 0.215));
  CHECK(enumerate_paths(g, in, out, 5).size() == 1);

  const auto t2 = generate_hex_mesh(2, 1);
  const auto g2 = build_graph(t2);
  for (int a : t2.usable_ports()) {
    for (int b : t2.usable_ports()) {
      if (a == b) continue;
      const auto list = enumerate_paths(g2, a, b, 11);
      std::set<std::vector<NodeId>> unique;
      for (const auto& p : list) {
        unique.insert(p.nodes);
        CHECK(p.puc_count <= 11);
        CHECK(path_states(g2, p).size() == static_cast<std::size_t>(p.puc_count));
      }
      CHECK(unique.size() == list.size());
      if (list.empty()) {
        CHECK_THROWS_AS(shortest_path(g2, a, b), NoRoute);
        continue;
      }
      const auto best = shortest_path(g2, a, b);
      CHECK(std::find(list.begin(), list.end(), best) != list.end());
      CHECK(list.front() == best);
    }
  }
}

TEST_CASE("router matches exhaustive enumeration on random small meshes") {
  std::mt19937_64 rng(2024);
  int compared = 0;
  for (int m = 0; m < 40; ++m) {
    const auto t = testing::random_small_mesh(rng);
    WeightCoeffs coeffs{1.0, (m % 2) * 0.5, (m % 3 == 0) ? 0.25 : 0.0};
    const auto g = build_graph(t, coeffs);
    Router router(g);
    for (int a : t.usable_ports()) {
      for (int b : t.usable_ports()) {
        if (a == b) continue;
        const auto list = enumerate_paths(g, a, b, static_cast<int>(t.puc_count()));
        if (list.empty()) {
          CHECK_THROWS_AS(router.route(a, b), NoRoute);
          continue;
        }
        const auto p = router.route(a, b);
        CHECK(p == testing::preferred_route(list));
        CHECK(std::abs(p.total_weight - list.front().total_weight) <=
              1e-12 * std::max(1.0, list.front().total_weight));
        ++compared;
      }
    }
  }
  CHECK(compared > 500);
}

TEST_CASE("router stays exact on heavily penalized and restricted graphs") {
  std::mt19937_64 rng(77);
  int compared = 0;
  std::size_t branched = 0;
  for (int m = 0; m < 40; ++m) {
    const auto t = testing::random_small_mesh(rng);
    auto g = build_graph(t);
    std::uniform_int_distribution<int> arc(0, g.internal_arc_count() - 1), times(1, 8);
    for (int k = 0; k < g.puc_count(); ++k) {
      const ArcId a = arc(rng);
      const int n = times(rng);
      for (int i = 0; i < n; ++i) g.apply_penalty(std::vector<ArcId>{a}, 10.0);
    }
    RouteConstraints c;
    c.allowed.assign(g.puc_count(), RouteConstraints::kAny);
    for (int p = 0; p < g.puc_count(); ++p) {
      if (rng() % 5 == 0) c.allowed[p] = rng() % 2 ? RouteConstraints::kBar : RouteConstraints::kCross;
    }
    Router router(g);
    for (int a : t.usable_ports()) {
      for (int b : t.usable_ports()) {
        if (a == b) continue;
        auto list = enumerate_paths(g, a, b, static_cast<int>(t.puc_count()));
        if (!list.empty()) {
          CHECK(router.route(a, b) == testing::preferred_route(list));
          branched += router.last_branch_count();
          ++compared;
        }
        std::erase_if(list, [&](const LightPath& p) {
          return std::any_of(p.required_states.begin(), p.required_states.end(), [&](const auto& s) {
            return ((c.allowed[s.first] >> static_cast<int>(s.second)) & 1) == 0;
          });
        });
        if (list.empty()) {
          CHECK_THROWS_AS(router.route(a, b, &c), NoRoute);
        } else {
          CHECK(router.route(a, b, &c) == testing::preferred_route(list));
          branched += router.last_branch_count();
        }
      }
    }
  }
  CHECK(compared > 500);
  CHECK(branched > 0);
}

TEST_CASE("total weight is the sum of arc weights") {
  const auto t = mesh72();
  const auto g = build_graph(t);
  const auto& u = t.usable_ports();
  for (std::size_t i = 0; i < u.size(); i += 3) {
    const auto p = shortest_path(g, u[i], u[(i + 11) % u.size()]);
    double sum = 0.0;
    for (ArcId a : p.arcs()) sum += g.effective_weight(a);
    CHECK(p.total_weight == sum);
    CHECK(p.total_weight == doctest::Approx(0.215 * p.puc_count));
  }
}

TEST_CASE("mesh72 interconnect sweep from four inputs") {
  const auto t = mesh72();
  const auto g = build_graph(t);
  const auto& u = t.usable_ports();
  int lo = 1 << 30, hi = 0, routes = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (int out : u) {
      if (out == u[i]) continue;
      const auto p = shortest_path(g, u[i], out);
      CHECK(path_states(g, p).size() == static_cast<std::size_t>(p.puc_count));
      lo = std::min(lo, p.puc_count);
      hi = std::max(hi, p.puc_count);
      ++routes;
    }
  }
  CHECK(routes == 4 * 29);
  CHECK(lo <= 2);
  CHECK(hi >= 12);
}

TEST_CASE("self-healing") {
  const auto t = generate_hex_mesh(2, 1);
  const auto g = build_graph(t);
  const auto& u = t.usable_ports();

  SUBCASE("no failures equals the plain route") {
    for (int a : u) {
      for (int b : u) {
        if (a == b) continue;
        try {
          const auto p = shortest_path(g, a, b);
          CHECK(self_heal(g, a, b, {}) == p);
        } catch (const NoRoute&) {
          CHECK_THROWS_AS(self_heal(g, a, b, {}), NoRoute);
        }
      }
    }
  }
  SUBCASE("failing the PUC that owns both ports leaves no route") {
    const int in = port_index(t, 0, PortSide::A1), out = port_index(t, 0, PortSide::B1);
    REQUIRE(shortest_path(g, in, out).puc_count == 1);
    CHECK_THROWS_AS(self_heal(g, in, out, {0}), NoRoute);
  }
  SUBCASE("detour on a two-cell mesh") {
    int detours = 0;
    for (int a : u) {
      for (int b : u) {
        if (a == b) continue;
        if (enumerate_paths(g, a, b, 11).empty()) continue;
        const auto direct = shortest_path(g, a, b);
        for (int p : direct.pucs()) {
          const int ap = t.external_port(a).port.puc, bp = t.external_port(b).port.puc;
          if (p == ap || p == bp) continue;
          try {
            const auto healed = self_heal(g, a, b, {p});
            const auto hp = healed.pucs();
            CHECK(std::find(hp.begin(), hp.end(), p) == hp.end());
            CHECK(healed.total_weight >= direct.total_weight);
            ++detours;
          } catch (const NoRoute&) {
          }
        }
      }
    }
    CHECK(detours > 20);
  }
  SUBCASE("cutting the input PUC leaves no route") {
    const int in = u[0];
    CHECK_THROWS_AS(self_heal(g, in, u[3], {t.external_port(in).port.puc}), NoRoute);
  }
  SUBCASE("invalid PUC id") { CHECK_THROWS_AS(self_heal(g, u[0], u[1], {99}), std::invalid_argument); }
}

TEST_CASE("self-heal weight is monotone in the failed set") {
  std::mt19937_64 rng(5);
  const auto t = mesh72();
  const auto g = build_graph(t);
  const auto& u = t.usable_ports();
  std::uniform_int_distribution<std::size_t> pick(0, u.size() - 1);
  std::uniform_int_distribution<int> puc(0, 71);
  for (int trial = 0; trial < 60; ++trial) {
    const int a = u[pick(rng)];
    int b = u[pick(rng)];
    if (a == b) continue;
    std::set<int> s1, s2;
    for (int i = 0; i < 3; ++i) s1.insert(puc(rng));
    s2 = s1;
    for (int i = 0; i < 4; ++i) s2.insert(puc(rng));
    double w1 = 0, w2 = 0;
    bool r1 = true, r2 = true;
    try { w1 = self_heal(g, a, b, s1).total_weight; } catch (const NoRoute&) { r1 = false; }
    try { w2 = self_heal(g, a, b, s2).total_weight; } catch (const NoRoute&) { r2 = false; }
    if (!r1) CHECK_FALSE(r2);
    if (r1 && r2) CHECK(w2 >= w1 - 1e-12);
  }
}

TEST_CASE("constraints restrict PUC states") {
  const auto t = generate_hex_mesh(2, 1);
  const auto g = build_graph(t);
  const auto& u = t.usable_ports();
  const auto free_route = shortest_path(g, u[0], u[5]);
  const auto [puc, tag] = *free_route.required_states.begin();
  RouteConstraints c;
  c.allowed.assign(g.puc_count(), RouteConstraints::kAny);
  c.allowed[puc] = tag == ArcTag::Bar ? RouteConstraints::kCross : RouteConstraints::kBar;
  try {
    const auto p = shortest_path(g, u[0], u[5], c);
    auto it = p.required_states.find(puc);
    if (it != p.required_states.end()) CHECK(it->second != tag);
  } catch (const NoRoute&) {
  }
  c.allowed.pop_back();
  CHECK_THROWS_AS(shortest_path(g, u[0], u[5], c), std::invalid_argument);

  RouteConstraints zero;
  zero.arc_weight.assign(g.internal_arc_count(), 1.0);
  const auto hop = shortest_path(g, u[0], u[5], zero);
  CHECK(hop.puc_count == free_route.puc_count);
}

TEST_CASE("bad ports are rejected") {
  const auto t = generate_hex_mesh(1, 1);
  const auto g = build_graph(t);
  CHECK_THROWS_AS(shortest_path(g, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(shortest_path(g, 0, 99), std::invalid_argument);
  const int bottom = port_index(t, 4, PortSide::B2);
  CHECK_FALSE(t.is_usable(bottom));
  CHECK_THROWS_AS(shortest_path(g, 0, bottom), std::invalid_argument);
}

TEST_CASE("batch routing") {
  const auto t = mesh72();
  const auto g = build_graph(t);
  CHECK(route_batch(g, {}).paths.empty());

  const std::vector<std::pair<int, int>> same(10, {t.usable_ports()[1], t.usable_ports()[17]});
  const auto r = route_batch(g, same);
  REQUIRE(r.paths.size() == 10);
  for (const auto& p : r.paths) CHECK(*p == *r.paths.front());

  std::mt19937_64 rng(1);
  const auto& u = t.usable_ports();
  std::uniform_int_distribution<std::size_t> pick(0, u.size() - 1);
  std::vector<std::pair<int, int>> pairs;
  while (pairs.size() < 400) {
    const int a = u[pick(rng)], b = u[pick(rng)];
    if (a != b) pairs.emplace_back(a, b);
  }
  const auto big = route_batch(g, pairs);
  CHECK(big.paths.size() == 400);
  CHECK(std::all_of(big.paths.begin(), big.paths.end(), [](const auto& p) { return p.has_value(); }));
  CHECK(big.mean_us > 0.0);
  CHECK(big.median_us <= big.p99_us);
}

TEST_CASE("unroutable pairs on a long strip are settled quickly") {
  const auto t = generate_hex_mesh(8, 1);
  const auto g = build_graph(t);
  Router router(g);
  for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 2}, {2, 0}, {1, 39}, {39, 1}}) {
    CHECK_THROWS_AS(router.route(a, b), NoRoute);
    CHECK(router.last_branch_count() < 10000);
  }
  CHECK_NOTHROW(router.route(3, 10));
}

TEST_CASE("an infinite arc weight forbids the arc") {
  const auto g = build_graph(mesh72());
  const auto plain = shortest_path(g, 4, 24);
  const auto arcs = plain.arcs();
  RouteConstraints c;
  c.arc_weight.resize(static_cast<std::size_t>(g.internal_arc_count()));
  for (ArcId a = 0; a < g.internal_arc_count(); ++a) c.arc_weight[a] = g.effective_weight(a);
  c.arc_weight[arcs[arcs.size() / 2]] = std::numeric_limits<double>::infinity();
  const auto detour = shortest_path(g, 4, 24, c);
  const auto used = detour.arcs();
  CHECK(std::find(used.begin(), used.end(), arcs[arcs.size() / 2]) == used.end());
  CHECK(detour.total_weight >= plain.total_weight);
  CHECK(std::isfinite(detour.total_weight));
}
