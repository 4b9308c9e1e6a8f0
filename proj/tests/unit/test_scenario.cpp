#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "pmesh/csv.hpp"
#include "pmesh/errors.hpp"
#include "pmesh/interconnect.hpp"
#include "pmesh/scenario.hpp"
#include "pmesh/study.hpp"

using namespace pmesh;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("pmesh_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_text(const std::string& json, const fs::path& out) {
  try {
    return run_scenario(parse_scenario(json, PMESH_SCENARIO_DIR), {out, {}, {}});
  } catch (const std::exception& e) {
    return {1, e.what(), {}, {}};
  }
}

}  // namespace

TEST_CASE("fixed three-decimal formatting") {
  CHECK(format_fixed3(-10.0) == "-10.000");
  CHECK(format_fixed3(1.23456) == "1.235");
  CHECK(format_fixed3(-0.0001) == "0.000");
  CHECK(format_fixed3(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_fixed3(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("csv round trip and schema checks") {
  CsvTable t{{"input", "22", "23"}, {{"4", "-10.000", "-35.125"}, {"5", "-40.000", "-9.500"}}};
  const auto back = parse_csv(to_csv(t));
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK_NOTHROW(check_schema(back, CsvSchema::SwitchMatrix));
  CHECK_THROWS_AS(parse_csv(""), ParseError);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), ParseError);

  auto bad = t;
  bad.rows[0][1] = "-10.0";
  CHECK_THROWS_AS(check_schema(bad, CsvSchema::SwitchMatrix), ParseError);
  bad = t;
  bad.rows[0][1] = "";
  CHECK_THROWS_AS(check_schema(bad, CsvSchema::SwitchMatrix), ParseError);
  CHECK_NOTHROW(check_schema(bad, CsvSchema::PortMatrix));
  bad = t;
  bad.header[0] = "port";
  CHECK_THROWS_AS(check_schema(bad, CsvSchema::SwitchMatrix), ParseError);
  CHECK_NOTHROW(check_schema(bad, CsvSchema::MulticastFunnel));

  CsvTable f{{"permutation", "solved", "iterations", "total_weight"}, {{"1-0", "1", "2", "3.500"}, {"0-1", "0", "25", ""}}};
  CHECK_NOTHROW(check_schema(f, CsvSchema::Feasibility));
  f.rows[1][3] = "1.000";
  CHECK_THROWS_AS(check_schema(f, CsvSchema::Feasibility), ParseError);
  f.rows[1][3] = "";
  f.rows[0][1] = "yes";
  CHECK_THROWS_AS(check_schema(f, CsvSchema::Feasibility), ParseError);
}

TEST_CASE("matrix table") {
  PowerMatrix m{{4, 5}, {22, 23}, {{-10.0, -35.0}, {-35.0, -10.0004}}};
  const auto t = matrix_table(m);
  CHECK(to_csv(t) == "input,22,23\n4,-10.000,-35.000\n5,-35.000,-10.000\n");
}

TEST_CASE("loss perturbation and averaging") {
  const auto t = mesh72();
  const auto a = perturb_il(t, 0.3, 11), b = perturb_il(t, 0.3, 11), c = perturb_il(t, 0.3, 12);
  CHECK(a.pucs() == b.pucs());
  CHECK(a.pucs() != c.pucs());
  for (const auto& p : a.pucs()) CHECK(p.il_db <= 0.0);
  CHECK(perturb_il(t, 0.0, 5).pucs() == t.pucs());
  CHECK_THROWS_AS(perturb_il(t, -1.0, 1), std::invalid_argument);

  const auto avg = average_il(a);
  double sum = 0.0;
  for (const auto& p : a.pucs()) sum += p.il_db;
  for (const auto& p : avg.pucs()) CHECK(p.il_db == doctest::Approx(sum / a.puc_count()).epsilon(1e-12));
}

TEST_CASE("farthest-first output order") {
  const auto g = build_graph(mesh72());
  const auto order = farthest_first_outputs(g, 7);
  CHECK(order.size() == g.topology().usable_ports().size() - 1);
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double prev = shortest_path(g, 7, order[i - 1]).total_weight;
    const double cur = shortest_path(g, 7, order[i]).total_weight;
    CHECK(prev >= cur);
    if (prev == cur) CHECK(order[i - 1] < order[i]);
  }
}

TEST_CASE("spearman rank correlation") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  // Independent check against the closed form for untied ranks.
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 5};
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
  CHECK(spearman(x, y) == doctest::Approx(1.0 - 6.0 * d2 / (5.0 * 24.0)));
  CHECK(spearman({1, 2, 2, 3}, {1, 2, 2, 3}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(spearman({1}, {1}), std::invalid_argument);
}

TEST_CASE("deviation study") {
  const auto t = mesh72();
  DeviationStudy s;
  s.min_n = 1;
  s.max_n = 6;
  s.seeds = 3;
  SUBCASE("no perturbation means exact compensation") {
    s.sigma_db = 0.0;
    const auto c = deviation_curve(t, s);
    REQUIRE(c.points.size() == 6);
    for (const auto& p : c.points) CHECK(p.mean_deviation_db < 1e-6);
    // Equal shares: every output of the nominal fan-out receives the same power.
    for (const auto& row : c.nominal_port_db) {
      for (double v : row) CHECK(v == doctest::Approx(row.front()).epsilon(1e-9));
    }
    // Each doubling of the fan-out costs about 3 dB plus path differences.
    CHECK(c.nominal_port_db[1][0] < c.nominal_port_db[0][0] - 2.5);
  }
  SUBCASE("perturbation opens a gap and is seed-deterministic") {
    s.sigma_db = 0.3;
    const auto a = deviation_curve(t, s), b = deviation_curve(t, s);
    CHECK(a.points[1].mean_deviation_db > 0.1);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      CHECK(a.points[i].mean_deviation_db == b.points[i].mean_deviation_db);
    }
    CHECK(a.points[0].mean_deviation_db == 0.0);
  }
  SUBCASE("range checks") {
    s.max_n = 40;
    CHECK_THROWS_AS(deviation_curve(t, s), std::invalid_argument);
    s.max_n = 2;
    s.min_n = 3;
    CHECK_THROWS_AS(deviation_curve(t, s), std::invalid_argument);
  }
  SUBCASE("anchor outside the bracket") {
    s.seeds = 2;
    CHECK_THROWS_AS(fit_sigma(t, s, 50.0, 0.5), Unsolved);
  }
}

TEST_CASE("fitted sigma reproduces the anchor") {
  DeviationStudy s;
  s.min_n = s.max_n = 2;
  const auto c = deviation_curve(mesh72(), s);
  CHECK(c.points.front().mean_deviation_db == doctest::Approx(kDeviationAnchorDb).epsilon(0.002 / 0.663));
}

TEST_CASE("command names") {
  for (auto c : {Command::Interconnect, Command::InterconnectSweep, Command::Switch, Command::SwitchSweep,
                 Command::Multicast, Command::MulticastSweep, Command::BenchPaths}) {
    CHECK(parse_command(to_string(c)) == c);
  }
  CHECK_THROWS_AS(parse_command("route"), std::invalid_argument);
}

TEST_CASE("topology references") {
  std::string src;
  CHECK(load_topology_ref("mesh72", {}, &src).puc_count() == 72);
  CHECK(src == "mesh72");
  CHECK(load_topology_ref("generator:2x1", {}, &src).puc_count() == static_cast<std::size_t>(hex_mesh_puc_count(2, 1)));
  CHECK(src == "generator:2x1");
  CHECK(load_topology_ref("mesh72.json", PMESH_DATA_DIR).puc_count() == 72);
  CHECK_THROWS_AS(load_topology_ref("missing.json", PMESH_DATA_DIR), std::invalid_argument);
}

TEST_CASE("scenario parsing") {
  const auto s = parse_scenario(R"({"command": "switch-sweep", "seed": 3})");
  CHECK(s.command == Command::SwitchSweep);
  CHECK(s.inputs == kDefaultSwitchInputs);
  CHECK(s.outputs == kDefaultSwitchOutputs);
  CHECK(s.seed == 3u);
  CHECK(s.topology.puc_count() == 72);
  CHECK_NOTHROW(validate_scenario(s));

  const auto g = parse_scenario(
      R"({"command": "interconnect", "topology": {"generator": {"rows": 1, "cols": 1, "il_db": -0.5}},
          "args": {"in_port": 0, "out_port": 3}})");
  CHECK(g.topology_source == "generator:1x1");
  CHECK(g.topology.pucs().front().il_db == -0.5);
  CHECK(g.pairs == std::vector<IoPair>{{0, 3}});

  CHECK_THROWS_AS(parse_scenario("{"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"command": "teleport"})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"command": "switch", "colour": 1})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"command": "switch", "args": {"n_paths": 3}})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"command": "switch", "args": {"max_iter": "many"}})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"command": "switch", "name": "a/b"})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"command": "switch", "seed": -1})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"command": "interconnect", "args": {"in_port": 1}})"), ParseError);

  auto bad = parse_scenario(R"({"command": "multicast", "args": {"input": 7, "outputs": [22, 99]}})");
  CHECK_THROWS_AS(validate_scenario(bad), std::invalid_argument);
  bad = parse_scenario(R"({"command": "bench-paths"})");
  CHECK_THROWS_AS(validate_scenario(bad), std::invalid_argument);
  bad = parse_scenario(R"({"command": "switch", "args": {"permutation": [0, 0, 1, 2, 3, 4]}})");
  CHECK_THROWS_AS(validate_scenario(bad), std::invalid_argument);
}

TEST_CASE("scenario dump is stable") {
  const auto s = parse_scenario(R"({"name": "x", "command": "multicast", "args": {"input": 7, "outputs": [22, 23]}})");
  const auto text = dump_scenario(s);
  CHECK(text == dump_scenario(s));
  CHECK(text.find("\"per_puc\"") != std::string::npos);
}

TEST_CASE("output directory resolution") {
  CHECK(resolve_out_dir({"/tmp/a", {}, {}}, "s") == fs::path("/tmp/a/s"));
  setenv("PMESH_OUT_DIR", "/tmp/env_out", 1);
  CHECK(resolve_out_dir({}, "s") == fs::path("/tmp/env_out/s"));
  unsetenv("PMESH_OUT_DIR");
  CHECK(resolve_out_dir({}, "s") == fs::path("results/s"));
}

TEST_CASE("exit codes") {
  const auto out = temp_dir("exit");
  SUBCASE("success writes every artifact") {
    const auto r = run_text(R"({"name": "ok", "command": "interconnect", "args": {"pairs": [[4, 25]]}})", out);
    CHECK(r.exit_code == 0);
    for (const char* f : {"config.json", "summary.json", "timing.json", "routes.csv"}) {
      CHECK(fs::exists(out / "ok" / f));
    }
  }
  SUBCASE("input errors") {
    CHECK(run_text(R"({"name": "e1", "command": "interconnect", "args": {"pairs": [[4, 99]]}})", out).exit_code == 1);
    CHECK(run_text(R"({"name": "e2", "command": "bench-paths"})", out).exit_code == 1);
    CHECK(run_scenario(fs::path("/nonexistent/scenario.json"), {out, {}, {}}).exit_code == 1);
  }
  SUBCASE("solver failure") {
    // No consistent route joins these ports of a long strip.
    const auto r = run_text(
        R"({"name": "nr", "command": "interconnect", "topology": "generator:8x1", "args": {"pairs": [[0, 2]]}})", out);
    CHECK(r.exit_code == 2);
    CHECK(slurp(out / "nr" / "summary.json").find("solver_failure") != std::string::npos);
  }
  SUBCASE("seed override satisfies the seed requirement") {
    auto s = parse_scenario(R"({"name": "b", "command": "bench-paths", "args": {"n_paths": 5}})");
    CHECK(run_scenario(s, {out, 9u, {}}).exit_code == 0);
    CHECK(slurp(out / "b" / "config.json").find("\"seed\": 9") != std::string::npos);
  }
}

TEST_CASE("bench paths") {
  const auto t = mesh72();
  const auto a = random_pairs(t, 400, 5), b = random_pairs(t, 400, 5), c = random_pairs(t, 400, 6);
  CHECK(a == b);
  CHECK(a != c);
  std::map<int, int> seen;
  for (const auto& [x, y] : a) {
    CHECK(x != y);
    ++seen[x];
  }
  CHECK(seen.size() > 20);
  const auto one = bench_paths(t, 1, 3);
  CHECK(one.pairs.size() == 1);
  CHECK(one.routed == 1);
  CHECK(one.mean_us == one.median_us);
  CHECK(one.graph_build_us > 0.0);
  CHECK_THROWS_AS(bench_paths(t, 0, 3), std::invalid_argument);
}

TEST_CASE("shipped scenarios run, validate and reproduce") {
  const std::map<std::string, CsvSchema> schema_of = {
      {"switch_matrix.csv", CsvSchema::SwitchMatrix}, {"funnel.csv", CsvSchema::MulticastFunnel},
      {"feasibility.csv", CsvSchema::Feasibility},    {"loss_matrix.csv", CsvSchema::PortMatrix}};
  const auto a = temp_dir("run_a"), b = temp_dir("run_b");
  int files = 0;
  for (const auto& entry : fs::directory_iterator(PMESH_SCENARIO_DIR)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    const auto ra = run_scenario(entry.path(), {a, {}, {}});
    const auto rb = run_scenario(entry.path(), {b, {}, {}});
    REQUIRE(ra.exit_code == 0);
    REQUIRE(rb.exit_code == 0);
    CHECK(ra.csv_files == rb.csv_files);
    CHECK(slurp(ra.out_dir / "config.json") == slurp(rb.out_dir / "config.json"));
    for (const auto& rel : ra.csv_files) {
      CAPTURE(rel.string());
      CHECK(slurp(ra.out_dir / rel) == slurp(rb.out_dir / rel));
      const auto table = read_csv(ra.out_dir / rel);
      const auto it = schema_of.find(rel.filename().string());
      if (it != schema_of.end()) CHECK_NOTHROW(check_schema(table, it->second));
      if (rel.parent_path() == "matrices") CHECK_NOTHROW(check_schema(table, CsvSchema::SwitchMatrix));
      ++files;
    }
  }
  CHECK(files > 40);
}
