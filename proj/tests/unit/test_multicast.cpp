#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "pmesh/errors.hpp"
#include "pmesh/interconnect.hpp"
#include "pmesh/multicast.hpp"
#include "pmesh/powersim.hpp"

using namespace pmesh;

namespace {

std::vector<double> random_shares(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> s(n);
  for (auto& x : s) x = u(rng);
  const double sum = std::accumulate(s.begin(), s.end(), 0.0);
  for (auto& x : s) x /= sum;
  // Absorb rounding so the shares sum to 1 within the request tolerance.
  s.back() = 1.0 - std::accumulate(s.begin(), s.end() - 1, 0.0);
  return s;
}

// Deviation of simulated output powers from the requested shares, computed from
// the raw power map.
double simulated_deviation(const MeshTopology& t, const MulticastConfig& cfg) {
  SimParams sp;
  const auto pm = propagate(t, cfg.states, cfg.input_port, sp);
  double total = 0.0;
  for (int o : cfg.output_ports) total += pm.port_lin.at(o);
  double worst = 0.0;
  for (std::size_t i = 0; i < cfg.output_ports.size(); ++i) {
    const double got = pm.port_lin.at(cfg.output_ports[i]) / total;
    worst = std::max(worst, std::abs(10.0 * std::log10(got / cfg.shares[i])));
  }
  return 2.0 * worst;  // bounds the max pairwise deviation
}

// Multiplies the target fractions of the couplers each output's route passes
// through; with lossless cells this is the output's share of the power.
double target_product(const MulticastConfig& cfg, std::size_t out) {
  const LightPath& p = cfg.paths[out];
  double f = 1.0;
  for (const auto& c : cfg.couplers) {
    const auto it = std::find(p.nodes.begin(), p.nodes.end(), c.split_node);
    if (it == p.nodes.end()) continue;
    const bool cross = std::find(c.cross_outputs.begin(), c.cross_outputs.end(), p.out_port) !=
                       c.cross_outputs.end();
    f *= cross ? c.k_target : 1.0 - c.k_target;
  }
  return f;
}

}  // namespace

TEST_CASE("splitting ratio") {
  SUBCASE("worked example: lossier bar branch gets more power") {
    const double k = splitting_ratio(0.5, -1.0, -0.5);
    CHECK(k == doctest::Approx(0.5 / (0.5 * std::pow(10.0, 0.05) + 0.5)).epsilon(1e-14));
    CHECK(k == doctest::Approx(0.4712).epsilon(1e-4));
    // Delivered cross:bar power ratio equals the target ratio.
    const double cross = k * std::pow(10.0, -0.05), bar = (1.0 - k) * std::pow(10.0, -0.1);
    CHECK(cross / bar == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("identities over random draws") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> kt(0.0, 1.0), il(-20.0, 0.0);
    for (int i = 0; i < 1000; ++i) {
      const double t = kt(rng), a = il(rng), b = il(rng);
      CHECK(splitting_ratio(t, a, a) == t);
      CHECK(splitting_ratio(0.0, a, b) == 0.0);
      CHECK(splitting_ratio(1.0, a, b) == 1.0);
      const double k = splitting_ratio(t, a, b);
      CHECK(k >= 0.0);
      CHECK(k <= 1.0);
      const double ratio = k * std::pow(10.0, b / 10.0) / ((1.0 - k) * std::pow(10.0, a / 10.0));
      CHECK(ratio == doctest::Approx(t / (1.0 - t)).epsilon(1e-9));
    }
  }
  SUBCASE("target outside [0, 1]") {
    CHECK_THROWS_AS(splitting_ratio(-0.1, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(splitting_ratio(1.5, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(splitting_ratio(std::nan(""), 0.0, 0.0), std::invalid_argument);
  }
}

TEST_CASE("branch loss through a child coupler") {
  CHECK(child_branch_loss_db(0.5, -0.215, -0.43) == doctest::Approx(-3.655).epsilon(1e-4));
  CHECK(child_branch_loss_db(1.0, -0.2, -0.3) == doctest::Approx(-0.5));
}

TEST_CASE("multicast request validation") {
  const auto t = mesh72();
  auto g = build_graph(t);
  auto bad = [&](MulticastRequest r) { CHECK_THROWS_AS(auto_multicast(g, r), std::invalid_argument); };
  bad({4, {}});
  bad({4, {24, 24}});
  bad({4, {4, 24}});
  bad({4, {24, 25}, {1.0}});
  bad({4, {24, 25}, {0.5, 0.6}});
  bad({4, {24, 25}, {1.0, 0.0}});
  CHECK(MulticastRequest{4, {24, 25, 26, 27}}.shares() == std::vector<double>(4, 0.25));
  CHECK(parse_il_source("global_average") == IlSource::GlobalAverage);
  CHECK(parse_il_source(to_string(IlSource::PerPuc)) == IlSource::PerPuc);
  CHECK_THROWS_AS(parse_il_source("mean"), std::invalid_argument);
}

TEST_CASE("tunable PUC identification") {
  const auto t = mesh72();
  const auto g = build_graph(t);
  const auto p = shortest_path(g, 4, 24);
  CHECK(get_tunable_pucs({p}).empty());
  CHECK(get_tunable_pucs({p, p}).empty());
  LightPath a, b;
  a.required_states = {{3, ArcTag::Bar}, {4, ArcTag::Cross}};
  b.required_states = {{3, ArcTag::Bar}, {4, ArcTag::Bar}, {9, ArcTag::Cross}};
  CHECK(get_tunable_pucs({a, b}) == std::set<int>{4});
}

TEST_CASE("one output needs no coupler") {
  const auto t = mesh72();
  const auto g = build_graph(t);
  const auto cfg = auto_multicast(g, {7, {26}});
  CHECK(cfg.couplers.empty());
  REQUIRE(cfg.paths.size() == 1);
  CHECK(cfg.paths[0] == shortest_path(g, 7, 26));
  for (const auto& [puc, s] : cfg.states) {
    const auto it = cfg.paths[0].required_states.find(puc);
    if (it == cfg.paths[0].required_states.end()) {
      CHECK(s.is_off());
    } else {
      CHECK(s == (it->second == ArcTag::Bar ? PucState::bar() : PucState::cross()));
    }
  }
}

TEST_CASE("1x3 on a single hexagon") {
  const auto t = generate_hex_mesh(1, 1);
  const auto g = build_graph(t);
  const auto cfg = auto_multicast(g, {0, {1, 3, 5}});
  REQUIRE(cfg.couplers.size() == 2);
  CHECK(get_tunable_pucs(cfg.paths).size() == 2);
  std::set<int> coupler_pucs;
  for (const auto& c : cfg.couplers) coupler_pucs.insert(c.puc);
  CHECK(coupler_pucs == get_tunable_pucs(cfg.paths));

  SUBCASE("simulated powers are equal") {
    const auto rep = multicast_power_report(t, cfg, {});
    REQUIRE(rep.port_db.size() == 3);
    CHECK(rep.max_deviation_db < 0.01);
    for (double db : rep.port_db) CHECK(db == doctest::Approx(rep.port_db[0]).epsilon(1e-9));
  }
  SUBCASE("the root sends a third one way and the child splits evenly") {
    const auto& child = cfg.couplers[0];
    const auto& root = cfg.couplers[1];
    CHECK(root.depth < child.depth);
    CHECK(child.k_target == doctest::Approx(0.5));
    const double root_minor = std::min(root.k_target, 1.0 - root.k_target);
    CHECK(root_minor == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("custom proportions set the targets") {
    const std::vector<double> share{0.7, 0.2, 0.1};
    MulticastTree tree(g, 0, cfg.paths);
    const auto kt = target_ratios(tree, {1, 3, 5}, share);
    REQUIRE(kt.size() == 2);
    auto custom = auto_multicast(g, {0, {1, 3, 5}, share});
    for (std::size_t i = 0; i < 3; ++i) CHECK(target_product(custom, i) == doctest::Approx(share[i]));
    for (const auto& c : custom.couplers) CHECK(kt.at(c.puc) == doctest::Approx(c.k_target));
    CHECK(multicast_power_report(t, custom, {}).max_deviation_db < 1e-6);
  }
  SUBCASE("leaf branches sum the PUC losses behind the coupler") {
    for (const auto& c : cfg.couplers) {
      for (const auto& p : cfg.paths) {
        const auto it = std::find(p.nodes.begin(), p.nodes.end(), c.split_node);
        if (it == p.nodes.end()) continue;
        const auto after = static_cast<int>((p.nodes.end() - it) / 2) - 1;
        bool deeper = false;
        for (const auto& d : cfg.couplers) {
          deeper = deeper || (d.depth > c.depth && std::find(it, p.nodes.end(), d.split_node) != p.nodes.end());
        }
        if (deeper) continue;
        const bool cross = std::find(c.cross_outputs.begin(), c.cross_outputs.end(), p.out_port) !=
                           c.cross_outputs.end();
        CHECK((cross ? c.il_cross_db : c.il_bar_db) == doctest::Approx(after * kDefaultIlDb));
      }
    }
  }
  SUBCASE("evaluating a parent before its child is refused") {
    MulticastTree tree(g, 0, cfg.paths);
    const auto il = assumed_il(t, IlSource::PerPuc);
    CHECK_THROWS_AS(solve_couplers(tree, {1, 3, 5}, {0.2, 0.3, 0.5}, il, {1, 0}), EvaluationOrderError);
    CHECK_NOTHROW(solve_couplers(tree, {1, 3, 5}, {0.2, 0.3, 0.5}, il, {0, 1}));
  }
}

TEST_CASE("routes that re-merge are not a tree") {
  const auto t = mesh72();
  const auto g = build_graph(t);
  // Two different routes to one output split and meet again at its port.
  std::vector<LightPath> routes;
  for (int out : {26, 27, 28, 29, 24, 25}) {
    const auto p = shortest_path(g, 7, out);
    routes = enumerate_paths(g, 7, out, static_cast<int>(p.nodes.size()) / 2 + 2);
    if (routes.size() >= 2) break;
  }
  REQUIRE(routes.size() >= 2);
  CHECK_THROWS_AS(MulticastTree(g, 7, {routes[0], routes[1]}), TreeConflict);
  CHECK_THROWS_AS(MulticastTree(g, 8, {routes[0]}), std::invalid_argument);
  CHECK_THROWS_AS(MulticastTree(g, 7, {}), std::invalid_argument);
}

TEST_CASE("global-average loss assumption") {
  std::mt19937_64 rng(3);
  const auto t = testing::random_small_mesh(rng);
  const auto own = assumed_il(t, IlSource::PerPuc);
  const auto avg = assumed_il(t, IlSource::GlobalAverage);
  const double mean = std::accumulate(own.begin(), own.end(), 0.0) / static_cast<double>(own.size());
  for (std::size_t i = 0; i < own.size(); ++i) {
    CHECK(own[i] == t.puc(static_cast<int>(i)).il_db);
    CHECK(avg[i] == doctest::Approx(mean));
  }
}

TEST_CASE("compensation is exact on random trees and proportions") {
  std::mt19937_64 rng(21);
  int trees = 0, attempts = 0;
  while (trees < 150 && attempts < 5000) {
    ++attempts;
    const auto t = testing::random_small_mesh(rng);
    const auto g = build_graph(t);
    auto ports = t.usable_ports();
    std::shuffle(ports.begin(), ports.end(), rng);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, ports.size() - 1)(rng);
    MulticastRequest req{ports[0], std::vector<int>(ports.begin() + 1, ports.begin() + 1 + n)};
    req.proportion = random_shares(rng, n);
    MulticastConfig cfg;
    try {
      cfg = auto_multicast(g, req);
    } catch (const NoRoute&) {
      continue;
    } catch (const TreeConflict&) {
      continue;
    }
    ++trees;
    for (const auto& c : cfg.couplers) {
      CHECK(c.k > 0.0);
      CHECK(c.k < 1.0);
    }
    for (std::size_t i = 0; i < n; ++i) CHECK(target_product(cfg, i) == doctest::Approx(req.proportion[i]));
    CHECK(simulated_deviation(t, cfg) < 1e-6);
    CHECK(multicast_power_report(t, cfg, {}).max_deviation_db < 1e-6);
  }
  CHECK(trees == 150);
}

TEST_CASE("hand-picked route combinations form exact trees") {
  // Trees beyond the router's own choices: every combination of enumerated routes
  // that the tree builder accepts must be compensated exactly.
  std::mt19937_64 rng(8);
  int accepted = 0, rejected = 0;
  for (int m = 0; m < 25; ++m) {
    const auto t = testing::random_small_mesh(rng);
    const auto g = build_graph(t);
    auto ports = t.usable_ports();
    if (ports.size() < 3) continue;
    std::shuffle(ports.begin(), ports.end(), rng);
    const int in = ports[0], o1 = ports[1], o2 = ports[2];
    const int cap = static_cast<int>(t.puc_count());
    const auto r1 = enumerate_paths(g, in, o1, cap), r2 = enumerate_paths(g, in, o2, cap);
    for (std::size_t i = 0; i < std::min<std::size_t>(r1.size(), 6); ++i) {
      for (std::size_t j = 0; j < std::min<std::size_t>(r2.size(), 6); ++j) {
        std::vector<LightPath> paths{r1[i], r2[j]};
        try {
          MulticastTree tree(g, in, paths);
          ++accepted;
          std::vector<std::size_t> order(tree.couplers().size());
          std::iota(order.begin(), order.end(), 0);
          const auto share = random_shares(rng, 2);
          MulticastConfig cfg;
          cfg.input_port = in;
          cfg.output_ports = {o1, o2};
          cfg.shares = share;
          cfg.paths = paths;
          cfg.couplers = solve_couplers(tree, {o1, o2}, share, assumed_il(t, IlSource::PerPuc), order);
          for (int p = 0; p < g.puc_count(); ++p) cfg.states[p] = PucState::off();
          for (const auto& [puc, tag] : tree.fixed_states()) {
            cfg.states[puc] = tag == ArcTag::Bar ? PucState::bar() : PucState::cross();
          }
          for (const auto& c : cfg.couplers) cfg.states[c.puc] = PucState::tunable(c.k);
          CHECK(simulated_deviation(t, cfg) < 1e-6);
        } catch (const TreeConflict&) {
          ++rejected;
        }
      }
    }
  }
  CHECK(accepted > 10);
  CHECK(rejected > 0);
}

TEST_CASE("1x26 on mesh72 lights every output") {
  const auto t = mesh72();
  const auto g = build_graph(t);
  std::vector<int> outs;
  for (int p : t.usable_ports()) {
    if (p != 7 && outs.size() < 26) outs.push_back(p);
  }
  const auto cfg = auto_multicast(g, {7, outs});
  CHECK(cfg.couplers.size() == 25);
  const auto rep = multicast_power_report(t, cfg, {});
  CHECK(rep.max_deviation_db < 1e-6);
  CHECK(rep.min_db > -40.0);
  CHECK(rep.mean_db == doctest::Approx(rep.min_db).epsilon(1e-9));
}
