#include "pmesh/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <regex>
#include <sstream>

#include "pmesh/csv.hpp"
#include "pmesh/errors.hpp"
#include "pmesh/interconnect.hpp"

namespace pmesh {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::pair<Command, std::string_view> kCommands[] = {
    {Command::Interconnect, "interconnect"},     {Command::InterconnectSweep, "interconnect-sweep"},
    {Command::Switch, "switch"},                 {Command::SwitchSweep, "switch-sweep"},
    {Command::Multicast, "multicast"},           {Command::MulticastSweep, "multicast-sweep"},
    {Command::BenchPaths, "bench-paths"},
};

// Argument keys each command accepts.
const std::map<Command, std::set<std::string>> kArgKeys = {
    {Command::Interconnect, {"pairs", "in_port", "out_port", "failed_pucs"}},
    {Command::InterconnectSweep, {"inputs"}},
    {Command::Switch, {"inputs", "outputs", "permutation", "pairs", "algorithm", "max_iter"}},
    {Command::SwitchSweep, {"inputs", "outputs", "algorithm", "max_iter", "sample_every", "threads"}},
    {Command::Multicast, {"input", "outputs", "proportion", "il_source"}},
    {Command::MulticastSweep, {"input", "outputs", "min_n", "max_n", "sigma_db", "seeds"}},
    {Command::BenchPaths, {"n_paths"}},
};

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ParseError(where + "." + key + ": unknown key");
  }
}

int as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ParseError(where + ": expected an integer");
  return v.get<int>();
}

double as_double(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw ParseError(where + ": expected a string");
  return v.get<std::string>();
}

std::vector<int> int_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_int(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<IoPair> pair_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array of [input, output] pairs");
  std::vector<IoPair> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto w = where + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != 2) throw ParseError(w + ": expected [input, output]");
    out.emplace_back(as_int(v[i][0], w + "[0]"), as_int(v[i][1], w + "[1]"));
  }
  return out;
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  const auto w = where + "." + key;
  if constexpr (std::is_same_v<T, int>) {
    out = as_int(*it, w);
  } else if constexpr (std::is_same_v<T, double>) {
    out = as_double(*it, w);
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) throw ParseError(w + ": expected true or false");
    out = it->template get<bool>();
  } else if constexpr (std::is_same_v<T, std::vector<int>>) {
    out = int_list(*it, w);
  } else {
    static_assert(std::is_same_v<T, std::vector<double>>);
    if (!it->is_array()) throw ParseError(w + ": expected an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < it->size(); ++i) out.push_back(as_double((*it)[i], w + "[" + std::to_string(i) + "]"));
  }
}

MeshTopology generator_topology(const json& g, std::string* resolved) {
  check_keys(g, {"rows", "cols", "il_db", "bul", "power_mw", "crosstalk_db"}, "topology.generator");
  if (!g.contains("rows") || !g.contains("cols")) throw ParseError("topology.generator: rows and cols are required");
  const int rows = as_int(g["rows"], "topology.generator.rows");
  const int cols = as_int(g["cols"], "topology.generator.cols");
  PucAttributes a;
  read_opt(g, "il_db", a.il_db, "topology.generator");
  read_opt(g, "bul", a.bul, "topology.generator");
  read_opt(g, "power_mw", a.power_mw, "topology.generator");
  read_opt(g, "crosstalk_db", a.crosstalk_db, "topology.generator");
  if (rows < 1 || cols < 1) throw std::invalid_argument("generator rows and cols must be >= 1");
  if (resolved) *resolved = "generator:" + std::to_string(rows) + "x" + std::to_string(cols);
  return generate_hex_mesh(rows, cols, a);
}

json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<int>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

std::map<int, PucState> states_for(const MeshGraph& g, const LightPath& p) {
  std::map<int, PucState> s;
  for (int i = 0; i < g.puc_count(); ++i) s[i] = PucState::off();
  for (const auto& [puc, tag] : p.required_states) s[puc] = tag == ArcTag::Bar ? PucState::bar() : PucState::cross();
  return s;
}

int traversals(const LightPath& p) { return static_cast<int>(p.nodes.size() / 2); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

class Clock {
 public:
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

// What one command run produces besides the CSV files.
struct Output {
  fs::path dir;
  json summary = json::object();
  json timing = json::object();
  std::vector<fs::path> csv;

  void csv_file(const fs::path& rel, const CsvTable& table) {
    fs::create_directories((dir / rel).parent_path());
    write_csv(table, dir / rel);
    csv.push_back(rel);
  }
};

CsvTable route_table() {
  CsvTable t;
  t.header = {"input", "output", "pucs", "traversals", "weight", "power_db"};
  return t;
}

void add_route(CsvTable& t, const MeshGraph& g, const LightPath& p, const SimParams& sim) {
  const double db = propagate(g.topology(), states_for(g, p), p.in_port, sim).db(p.out_port);
  t.rows.push_back({std::to_string(p.in_port), std::to_string(p.out_port), std::to_string(p.puc_count),
                    std::to_string(traversals(p)), format_fixed3(p.total_weight), format_fixed3(db)});
}

void run_interconnect(const Scenario& s, const MeshGraph& g, Output& out) {
  auto table = route_table();
  json routes = json::array();
  for (const auto& [a, b] : s.pairs) {
    const auto p = s.failed_pucs.empty() ? shortest_path(g, a, b) : self_heal(g, a, b, s.failed_pucs);
    add_route(table, g, p, s.sim);
    std::vector<int> nodes(p.nodes.begin(), p.nodes.end());
    routes.push_back({{"input", a}, {"output", b}, {"weight", p.total_weight}, {"pucs", p.puc_count},
                      {"power_db", std::stod(table.rows.back().back())}, {"nodes", nodes}});
  }
  out.csv_file("routes.csv", table);
  out.summary["routes"] = routes;
}

void run_interconnect_sweep(const Scenario& s, const MeshGraph& g, Output& out) {
  const auto& ports = g.topology().usable_ports();
  auto routes = route_table();
  CsvTable matrix;
  matrix.header.push_back("input");
  for (int o : ports) matrix.header.push_back(std::to_string(o));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  int min_hops = std::numeric_limits<int>::max(), max_hops = 0, routed = 0, failed = 0;
  for (int in : s.inputs) {
    auto& row = matrix.rows.emplace_back();
    row.push_back(std::to_string(in));
    for (int o : ports) {
      if (o == in) {
        row.emplace_back();
        continue;
      }
      try {
        const auto p = shortest_path(g, in, o);
        add_route(routes, g, p, s.sim);
        const double db = std::stod(routes.rows.back().back());
        row.push_back(routes.rows.back().back());
        lo = std::min(lo, -db);
        hi = std::max(hi, -db);
        min_hops = std::min(min_hops, traversals(p));
        max_hops = std::max(max_hops, traversals(p));
        ++routed;
      } catch (const NoRoute&) {
        row.emplace_back();
        ++failed;
      }
    }
  }
  out.csv_file("loss_matrix.csv", matrix);
  out.csv_file("routes.csv", routes);
  out.summary["routed"] = routed;
  out.summary["unroutable"] = failed;
  out.summary["insertion_loss_db"] = {{"min", finite_or_string(lo)}, {"max", finite_or_string(hi)}};
  out.summary["traversals"] = {{"min", routed ? min_hops : 0}, {"max", max_hops}};
}

// Column j of a switch matrix wants the row whose input is paired with outputs[j].
std::vector<int> target_rows(const std::vector<IoPair>& pairs, const std::vector<int>& inputs,
                             const std::vector<int>& outputs) {
  std::vector<int> rows;
  for (int o : outputs) {
    const auto it = std::find_if(pairs.begin(), pairs.end(), [&](const IoPair& p) { return p.second == o; });
    rows.push_back(static_cast<int>(std::find(inputs.begin(), inputs.end(), it->first) - inputs.begin()));
  }
  return rows;
}

json crosstalk_json(const CrosstalkReport& r) {
  json per = json::array();
  for (double v : r.per_output) per.push_back(finite_or_string(v));
  return {{"per_output_db", per},
          {"worst_db", finite_or_string(r.worst)},
          {"typical_db", finite_or_string(r.typical)},
          {"best_db", finite_or_string(r.best)}};
}

void run_switch(const Scenario& s, MeshGraph& g, Output& out) {
  std::vector<int> inputs, outputs;
  for (const auto& [a, b] : s.pairs) {
    inputs.push_back(a);
    outputs.push_back(b);
  }
  std::sort(outputs.begin(), outputs.end());
  SwitchRequest req{s.pairs, s.max_iter, s.algorithm};
  const auto cfg = auto_switch(g, req);
  const auto m = switch_matrix(g.topology(), cfg, inputs, outputs, s.sim);
  out.csv_file("switch_matrix.csv", matrix_table(m));
  auto routes = route_table();
  for (const auto& pr : s.pairs) add_route(routes, g, cfg.paths.at(pr), s.sim);
  out.csv_file("routes.csv", routes);
  const auto rows = target_rows(s.pairs, inputs, outputs);
  out.summary["iterations"] = cfg.iterations_used;
  out.summary["total_weight"] = cfg.total_weight;
  json targets = json::array();
  for (std::size_t j = 0; j < outputs.size(); ++j) targets.push_back(m.db[rows[j]][j]);
  out.summary["target_power_db"] = targets;
  out.summary["crosstalk"] = crosstalk_json(crosstalk_report(m, rows));
}

void run_switch_sweep(const Scenario& s, const MeshGraph& g, Output& out) {
  Clock clock;
  const auto report = feasibility_sweep(g, s.inputs, s.outputs, s.max_iter, s.algorithm, s.threads);
  out.timing["sweep_ms"] = clock.lap_ms();
  CsvTable feas;
  feas.header = {"permutation", "solved", "iterations", "total_weight"};
  for (const auto& e : report.entries) {
    feas.rows.push_back({join(e.permutation, '-'), e.solved ? "1" : "0", std::to_string(e.iterations),
                         e.solved ? format_fixed3(e.total_weight) : ""});
  }
  out.csv_file("feasibility.csv", feas);

  CsvTable xt;
  xt.header = {"index", "permutation", "worst_db", "typical_db", "best_db", "target_min_db", "target_max_db"};
  std::vector<double> columns, targets;
  int sampled = 0, best_index = -1;
  double best_typical = -std::numeric_limits<double>::infinity();
  MeshGraph local = g;
  char name[32];
  for (std::size_t i = 0; i < report.entries.size(); i += static_cast<std::size_t>(s.sample_every)) {
    const auto& e = report.entries[i];
    if (!e.solved) continue;
    const auto pairs = permutation_pairs(s.inputs, s.outputs, e.permutation);
    const auto cfg = auto_switch(local, {pairs, s.max_iter, s.algorithm});
    const auto m = switch_matrix(g.topology(), cfg, s.inputs, s.outputs, s.sim);
    std::snprintf(name, sizeof name, "matrix_%03zu.csv", i);
    out.csv_file(fs::path("matrices") / name, matrix_table(m));
    const auto rows = target_rows(pairs, s.inputs, s.outputs);
    const auto r = crosstalk_report(m, rows);
    double tmin = 0.0, tmax = -std::numeric_limits<double>::infinity();
    tmin = -tmax;
    for (std::size_t j = 0; j < s.outputs.size(); ++j) {
      const double t = m.db[rows[j]][j];
      targets.push_back(t);
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
    columns.insert(columns.end(), r.per_output.begin(), r.per_output.end());
    if (r.typical > best_typical) {
      best_typical = r.typical;
      best_index = static_cast<int>(i);
    }
    xt.rows.push_back({std::to_string(i), join(e.permutation, '-'), format_fixed3(r.worst), format_fixed3(r.typical),
                       format_fixed3(r.best), format_fixed3(tmin), format_fixed3(tmax)});
    ++sampled;
  }
  out.timing["matrices_ms"] = clock.lap_ms();
  out.csv_file("crosstalk.csv", xt);

  json hist = json::object();
  int max_iterations = 0;
  for (const auto& [it, count] : report.iteration_histogram) {
    hist[std::to_string(it)] = count;
    max_iterations = std::max(max_iterations, it);
  }
  out.summary["permutations"] = report.entries.size();
  out.summary["solved"] = report.solved;
  out.summary["solve_rate"] = report.solve_rate();
  out.summary["iteration_histogram"] = hist;
  out.summary["max_iterations"] = max_iterations;
  out.summary["sampled_matrices"] = sampled;
  if (!targets.empty()) {
    const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
    out.summary["target_power_db"] = {{"min", *lo}, {"max", *hi}, {"spread", *hi - *lo}};
  }
  if (!columns.empty()) {
    const auto [lo, hi] = std::minmax_element(columns.begin(), columns.end());
    out.summary["crosstalk_db"] = {{"median", finite_or_string(median(columns))},
                                   {"worst", finite_or_string(*lo)},
                                   {"best", finite_or_string(*hi)},
                                   {"best_typical_index", best_index}};
  }
}

void run_multicast(const Scenario& s, const MeshGraph& g, Output& out) {
  MulticastRequest req{s.input, s.outputs, s.proportion, s.il_source};
  const auto cfg = auto_multicast(g, req);
  const auto rep = multicast_power_report(g.topology(), cfg, s.sim);
  CsvTable ports;
  ports.header = {"port", "share", "power_db", "normalized_db"};
  const double n = static_cast<double>(cfg.output_ports.size());
  for (std::size_t i = 0; i < cfg.output_ports.size(); ++i) {
    char share[32];
    std::snprintf(share, sizeof share, "%.6f", cfg.shares[i]);
    ports.rows.push_back({std::to_string(cfg.output_ports[i]), share, format_fixed3(rep.port_db[i]),
                          format_fixed3(rep.port_db[i] - 10.0 * std::log10(n * cfg.shares[i]))});
  }
  out.csv_file("ports.csv", ports);
  CsvTable cp;
  cp.header = {"puc", "depth", "k_target", "k", "il_bar_db", "il_cross_db"};
  for (const auto& c : cfg.couplers) {
    char kt[32], k[32];
    std::snprintf(kt, sizeof kt, "%.6f", c.k_target);
    std::snprintf(k, sizeof k, "%.6f", c.k);
    cp.rows.push_back({std::to_string(c.puc), std::to_string(c.depth), kt, k, format_fixed3(c.il_bar_db),
                       format_fixed3(c.il_cross_db)});
  }
  out.csv_file("couplers.csv", cp);
  out.summary["couplers"] = cfg.couplers.size();
  out.summary["mean_power_db"] = rep.mean_db;
  out.summary["min_power_db"] = rep.min_db;
  out.summary["max_deviation_db"] = rep.max_deviation_db;
}

void run_multicast_sweep(const Scenario& s, const MeshGraph&, Output& out) {
  DeviationStudy study;
  study.input = s.input;
  study.outputs = s.outputs;
  study.min_n = s.min_n;
  study.max_n = s.max_n;
  study.sigma_db = s.sigma_db;
  study.seeds = s.seeds;
  study.base_seed = *s.seed;
  const auto curve = deviation_curve(s.topology, study);
  CsvTable funnel;
  funnel.header.push_back("port");
  for (const auto& p : curve.points) funnel.header.push_back(std::to_string(p.n));
  for (int i = 0; i < s.max_n; ++i) {
    auto& row = funnel.rows.emplace_back();
    row.push_back(std::to_string(curve.outputs[i]));
    for (std::size_t k = 0; k < curve.points.size(); ++k) {
      const auto& ports = curve.nominal_port_db[k];
      row.push_back(i < static_cast<int>(ports.size()) ? format_fixed3(ports[i]) : "");
    }
  }
  out.csv_file("funnel.csv", funnel);
  CsvTable dev;
  dev.header = {"n", "mean_deviation_db", "mean_port_db", "min_port_db", "nominal_min_db"};
  std::vector<double> ns, devs;
  for (std::size_t k = 0; k < curve.points.size(); ++k) {
    const auto& p = curve.points[k];
    const auto& nom = curve.nominal_port_db[k];
    const double nominal_min = *std::min_element(nom.begin(), nom.end());
    dev.rows.push_back({std::to_string(p.n), format_fixed3(p.mean_deviation_db), format_fixed3(p.mean_port_db),
                        format_fixed3(p.min_port_db), format_fixed3(nominal_min)});
    if (p.n >= 2) {
      ns.push_back(p.n);
      devs.push_back(p.mean_deviation_db);
    }
  }
  out.csv_file("deviation.csv", dev);
  const auto& first = curve.points.front();
  const auto& last = curve.points.back();
  const auto& nom_last = curve.nominal_port_db.back();
  out.summary["outputs"] = curve.outputs;
  out.summary["deviation_db"] = {{"n_min", first.n}, {"at_n_min", first.mean_deviation_db},
                                 {"n_max", last.n},  {"at_n_max", last.mean_deviation_db}};
  if (ns.size() >= 2) out.summary["deviation_trend_spearman"] = spearman(ns, devs);
  out.summary["min_port_db_at_n_max"] = {{"nominal", *std::min_element(nom_last.begin(), nom_last.end())},
                                         {"perturbed_mean", last.min_port_db}};
}

void run_bench(const Scenario& s, const MeshGraph&, Output& out) {
  const auto b = bench_paths(s.topology, s.n_paths, *s.seed, s.weights);
  CsvTable t;
  t.header = {"input", "output", "weight"};
  for (std::size_t i = 0; i < b.pairs.size(); ++i) {
    t.rows.push_back({std::to_string(b.pairs[i].first), std::to_string(b.pairs[i].second),
                      std::isnan(b.weights[i]) ? "" : format_fixed3(b.weights[i])});
  }
  out.csv_file("pairs.csv", t);
  out.summary["n_paths"] = b.n_paths;
  out.summary["routed"] = b.routed;
  out.timing["graph_build_us"] = b.graph_build_us;
  out.timing["per_path_us"] = {{"mean", b.mean_us}, {"median", b.median_us}, {"p99", b.p99_us}};
}

bool solver_failure(const std::exception& e) {
  return dynamic_cast<const NoRoute*>(&e) || dynamic_cast<const Unsolved*>(&e) ||
         dynamic_cast<const TreeConflict*>(&e) || dynamic_cast<const LitCycle*>(&e) ||
         dynamic_cast<const EvaluationOrderError*>(&e);
}

void require_ports(const MeshTopology& t, const std::vector<int>& ports, const char* what) {
  const auto& u = t.usable_ports();
  for (int p : ports) {
    if (std::find(u.begin(), u.end(), p) == u.end()) {
      throw std::invalid_argument(std::string(what) + ": port " + std::to_string(p) + " is not a usable port");
    }
  }
}

void require_distinct(const std::vector<int>& v, const char* what) {
  std::set<int> seen(v.begin(), v.end());
  if (seen.size() != v.size()) throw std::invalid_argument(std::string(what) + ": repeated port");
}

}  // namespace

std::string_view to_string(Command c) {
  for (const auto& [cmd, name] : kCommands) {
    if (cmd == c) return name;
  }
  return "?";
}

Command parse_command(std::string_view text) {
  for (const auto& [cmd, name] : kCommands) {
    if (name == text) return cmd;
  }
  throw std::invalid_argument("unknown command \"" + std::string(text) + "\"");
}

MeshTopology load_topology_ref(std::string_view ref, const fs::path& base_dir, std::string* resolved) {
  const std::string r(ref);
  if (r == "mesh72") {
    if (resolved) *resolved = r;
    return mesh72();
  }
  static const std::regex gen(R"(generator:(\d+)x(\d+))");
  std::smatch m;
  if (std::regex_match(r, m, gen)) {
    json g = {{"rows", std::stoi(m[1])}, {"cols", std::stoi(m[2])}};
    return generator_topology(g, resolved);
  }
  fs::path p(r);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  if (!fs::exists(p)) throw std::invalid_argument("topology file not found: " + p.string());
  if (resolved) *resolved = fs::weakly_canonical(p).string();
  return load_topology(p);
}

Scenario parse_scenario(std::string_view text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  check_keys(root, {"name", "command", "topology", "weights", "sim", "seed", "args"}, "scenario");
  Scenario s;
  if (!root.contains("command")) throw ParseError("scenario.command: missing field");
  try {
    s.command = parse_command(as_string(root["command"], "scenario.command"));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("scenario.command: ") + e.what());
  }
  if (root.contains("name")) s.name = as_string(root["name"], "scenario.name");
  if (!s.name.empty() && !std::regex_match(s.name, std::regex(R"([A-Za-z0-9_.-]+)"))) {
    throw ParseError("scenario.name: only letters, digits, '_', '.' and '-' are allowed");
  }

  const json topo = root.value("topology", json("mesh72"));
  if (topo.is_string()) {
    s.topology = load_topology_ref(topo.get<std::string>(), base_dir, &s.topology_source);
  } else {
    check_keys(topo, {"generator"}, "scenario.topology");
    if (!topo.contains("generator")) throw ParseError("scenario.topology: expected a reference or a generator");
    s.topology = generator_topology(topo["generator"], &s.topology_source);
  }

  if (root.contains("weights")) {
    const json& w = root["weights"];
    check_keys(w, {"c_il", "c_bul", "c_pc"}, "scenario.weights");
    read_opt(w, "c_il", s.weights.c_il, "scenario.weights");
    read_opt(w, "c_bul", s.weights.c_bul, "scenario.weights");
    read_opt(w, "c_pc", s.weights.c_pc, "scenario.weights");
  }
  if (root.contains("sim")) {
    const json& p = root["sim"];
    check_keys(p, {"facet_loss_db", "crosstalk_enabled", "crosstalk_db", "source_power_dbm"}, "scenario.sim");
    read_opt(p, "facet_loss_db", s.sim.facet_loss_db, "scenario.sim");
    read_opt(p, "crosstalk_enabled", s.sim.crosstalk_enabled, "scenario.sim");
    if (p.contains("crosstalk_db")) s.sim.crosstalk_db = as_double(p["crosstalk_db"], "scenario.sim.crosstalk_db");
    read_opt(p, "source_power_dbm", s.sim.source_power_dbm, "scenario.sim");
  }
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) throw ParseError("scenario.seed: expected a non-negative integer");
    s.seed = root["seed"].get<std::uint64_t>();
  }

  const json args = root.value("args", json::object());
  check_keys(args, kArgKeys.at(s.command), "scenario.args");
  const std::string where = "scenario.args";
  if (args.contains("pairs")) s.pairs = pair_list(args["pairs"], where + ".pairs");
  if (args.contains("in_port") || args.contains("out_port")) {
    if (!args.contains("in_port") || !args.contains("out_port") || args.contains("pairs")) {
      throw ParseError(where + ": give either pairs or both in_port and out_port");
    }
    s.pairs = {{as_int(args["in_port"], where + ".in_port"), as_int(args["out_port"], where + ".out_port")}};
  }
  if (args.contains("failed_pucs")) {
    const auto f = int_list(args["failed_pucs"], where + ".failed_pucs");
    s.failed_pucs = {f.begin(), f.end()};
  }
  read_opt(args, "inputs", s.inputs, where);
  read_opt(args, "outputs", s.outputs, where);
  read_opt(args, "permutation", s.permutation, where);
  read_opt(args, "input", s.input, where);
  read_opt(args, "proportion", s.proportion, where);
  try {
    if (args.contains("il_source")) s.il_source = parse_il_source(as_string(args["il_source"], where + ".il_source"));
    if (args.contains("algorithm")) {
      s.algorithm = parse_switch_algorithm(as_string(args["algorithm"], where + ".algorithm"));
    }
  } catch (const std::invalid_argument& e) {
    throw ParseError(where + ": " + e.what());
  }
  read_opt(args, "max_iter", s.max_iter, where);
  read_opt(args, "sample_every", s.sample_every, where);
  read_opt(args, "threads", s.threads, where);
  read_opt(args, "min_n", s.min_n, where);
  read_opt(args, "max_n", s.max_n, where);
  read_opt(args, "sigma_db", s.sigma_db, where);
  read_opt(args, "seeds", s.seeds, where);
  read_opt(args, "n_paths", s.n_paths, where);

  // Command defaults that depend on nothing but the command.
  switch (s.command) {
    case Command::InterconnectSweep:
      if (s.inputs.empty()) s.inputs = kDefaultSweepInputs;
      break;
    case Command::Switch:
      if (s.pairs.empty()) {
        if (s.inputs.empty()) s.inputs = kDefaultSwitchInputs;
        if (s.outputs.empty()) s.outputs = kDefaultSwitchOutputs;
      }
      break;
    case Command::SwitchSweep:
      if (s.inputs.empty()) s.inputs = kDefaultSwitchInputs;
      if (s.outputs.empty()) s.outputs = kDefaultSwitchOutputs;
      break;
    case Command::MulticastSweep:
      if (s.input < 0) s.input = kDefaultStudyInput;
      break;
    default:
      break;
  }
  return s;
}

Scenario load_scenario(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read scenario file " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Scenario s = parse_scenario(ss.str(), file.parent_path());
  if (s.name.empty()) s.name = file.stem().string();
  return s;
}

void validate_scenario(const Scenario& s) {
  s.weights.validate();
  s.sim.validate();
  const auto& t = s.topology;
  const auto& u = t.usable_ports();
  switch (s.command) {
    case Command::Interconnect: {
      if (s.pairs.empty()) throw std::invalid_argument("interconnect: at least one pair is required");
      for (const auto& [a, b] : s.pairs) {
        require_ports(t, {a, b}, "interconnect");
        if (a == b) throw std::invalid_argument("interconnect: input and output must differ");
      }
      for (int p : s.failed_pucs) {
        if (p < 0 || p >= static_cast<int>(t.puc_count())) {
          throw std::invalid_argument("interconnect: failed PUC " + std::to_string(p) + " does not exist");
        }
      }
      break;
    }
    case Command::InterconnectSweep:
      require_ports(t, s.inputs, "interconnect-sweep");
      require_distinct(s.inputs, "interconnect-sweep");
      break;
    case Command::Switch:
    case Command::SwitchSweep: {
      const char* what = s.command == Command::Switch ? "switch" : "switch-sweep";
      if (s.max_iter < 1) throw std::invalid_argument(std::string(what) + ": max_iter must be >= 1");
      if (s.command == Command::Switch && !s.pairs.empty()) {
        if (!s.permutation.empty() || !s.inputs.empty() || !s.outputs.empty()) {
          throw std::invalid_argument("switch: give either pairs or inputs/outputs/permutation");
        }
        SwitchRequest{s.pairs, s.max_iter, s.algorithm}.validate();
        for (const auto& [a, b] : s.pairs) require_ports(t, {a, b}, what);
        break;
      }
      require_ports(t, s.inputs, what);
      require_ports(t, s.outputs, what);
      require_distinct(s.inputs, what);
      require_distinct(s.outputs, what);
      if (s.inputs.empty() || s.inputs.size() != s.outputs.size()) {
        throw std::invalid_argument(std::string(what) + ": inputs and outputs must be non-empty and equally long");
      }
      for (int i : s.inputs) {
        if (std::find(s.outputs.begin(), s.outputs.end(), i) != s.outputs.end()) {
          throw std::invalid_argument(std::string(what) + ": a port cannot be both input and output");
        }
      }
      if (s.command == Command::Switch) {
        auto sorted = s.permutation;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) {
          if (sorted[i] != static_cast<int>(i) || sorted.size() != s.inputs.size()) {
            throw std::invalid_argument("switch: permutation must reorder 0..N-1 for N inputs");
          }
        }
        if (s.permutation.empty()) throw std::invalid_argument("switch: permutation or pairs is required");
      } else {
        if (s.inputs.size() > 8) throw std::invalid_argument("switch-sweep: at most 8 ports per side");
        if (s.sample_every < 1) throw std::invalid_argument("switch-sweep: sample_every must be >= 1");
        if (s.threads < 1) throw std::invalid_argument("switch-sweep: threads must be >= 1");
      }
      break;
    }
    case Command::Multicast:
      require_ports(t, {s.input}, "multicast");
      require_ports(t, s.outputs, "multicast");
      MulticastRequest{s.input, s.outputs, s.proportion, s.il_source}.validate();
      break;
    case Command::MulticastSweep: {
      if (!s.seed) throw std::invalid_argument("multicast-sweep: a seed is required");
      require_ports(t, {s.input}, "multicast-sweep");
      require_ports(t, s.outputs, "multicast-sweep");
      require_distinct(s.outputs, "multicast-sweep");
      if (std::find(s.outputs.begin(), s.outputs.end(), s.input) != s.outputs.end()) {
        throw std::invalid_argument("multicast-sweep: the input cannot be an output");
      }
      const int available = s.outputs.empty() ? static_cast<int>(u.size()) - 1 : static_cast<int>(s.outputs.size());
      if (s.min_n < 1 || s.max_n < s.min_n || s.max_n > available) {
        throw std::invalid_argument("multicast-sweep: need 1 <= min_n <= max_n <= number of outputs");
      }
      if (!(s.sigma_db >= 0.0) || !std::isfinite(s.sigma_db)) {
        throw std::invalid_argument("multicast-sweep: sigma_db must be finite and >= 0");
      }
      if (s.seeds < 1) throw std::invalid_argument("multicast-sweep: seeds must be >= 1");
      break;
    }
    case Command::BenchPaths:
      if (!s.seed) throw std::invalid_argument("bench-paths: a seed is required");
      if (s.n_paths < 1) throw std::invalid_argument("bench-paths: n_paths must be >= 1");
      if (u.size() < 2) throw std::invalid_argument("bench-paths: the topology needs two usable ports");
      break;
  }
}

std::string dump_scenario(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["command"] = std::string(to_string(s.command));
  j["topology"] = {{"source", s.topology_source},
                   {"pucs", s.topology.puc_count()},
                   {"usable_ports", s.topology.usable_ports()}};
  j["weights"] = {{"c_il", s.weights.c_il}, {"c_bul", s.weights.c_bul}, {"c_pc", s.weights.c_pc}};
  j["sim"] = {{"facet_loss_db", s.sim.facet_loss_db},
              {"crosstalk_enabled", s.sim.crosstalk_enabled},
              {"crosstalk_db", s.sim.crosstalk_db ? json(*s.sim.crosstalk_db) : json("per_puc")},
              {"source_power_dbm", s.sim.source_power_dbm}};
  j["seed"] = s.seed ? json(*s.seed) : json(nullptr);
  json a = json::object();
  auto pairs = [&] {
    json p = json::array();
    for (const auto& [x, y] : s.pairs) p.push_back({x, y});
    return p;
  };
  switch (s.command) {
    case Command::Interconnect:
      a["pairs"] = pairs();
      a["failed_pucs"] = s.failed_pucs;
      break;
    case Command::InterconnectSweep:
      a["inputs"] = s.inputs;
      break;
    case Command::Switch:
    case Command::SwitchSweep:
      if (s.command == Command::Switch) a["pairs"] = pairs();
      a["inputs"] = s.inputs;
      a["outputs"] = s.outputs;
      a["algorithm"] = std::string(to_string(s.algorithm));
      a["max_iter"] = s.max_iter;
      if (s.command == Command::Switch) a["permutation"] = s.permutation;
      if (s.command == Command::SwitchSweep) a["sample_every"] = s.sample_every;
      break;
    case Command::Multicast:
      a["input"] = s.input;
      a["outputs"] = s.outputs;
      a["proportion"] = s.proportion;
      a["il_source"] = std::string(to_string(s.il_source));
      break;
    case Command::MulticastSweep:
      a["input"] = s.input;
      a["outputs"] = s.outputs;
      a["min_n"] = s.min_n;
      a["max_n"] = s.max_n;
      a["sigma_db"] = s.sigma_db;
      a["seeds"] = s.seeds;
      break;
    case Command::BenchPaths:
      a["n_paths"] = s.n_paths;
      break;
  }
  j["args"] = a;
  return j.dump(2) + "\n";
}

fs::path resolve_out_dir(const RunOptions& options, const std::string& scenario_name) {
  fs::path base = options.out_dir;
  if (base.empty()) {
    const char* env = std::getenv("PMESH_OUT_DIR");
    base = env && *env ? fs::path(env) : fs::path("results");
  }
  return base / (scenario_name.empty() ? "scenario" : scenario_name);
}

RunResult run_scenario(const fs::path& file, const RunOptions& options) {
  try {
    return run_scenario(load_scenario(file), options);
  } catch (const std::exception& e) {
    return {1, std::string("input error: ") + e.what(), {}, {}};
  }
}

RunResult run_scenario(Scenario s, const RunOptions& options) {
  RunResult result;
  Output out;
  Clock total, clock;
  try {
    if (options.seed) s.seed = options.seed;
    if (options.threads) s.threads = *options.threads;
    validate_scenario(s);
    if (s.command == Command::Switch && s.pairs.empty()) s.pairs = permutation_pairs(s.inputs, s.outputs, s.permutation);
    result.out_dir = out.dir = resolve_out_dir(options, s.name);
    fs::create_directories(out.dir);
  } catch (const std::exception& e) {
    result.exit_code = 1;
    result.message = std::string("input error: ") + e.what();
    return result;
  }

  json summary;
  summary["scenario"] = s.name;
  summary["command"] = std::string(to_string(s.command));
  try {
    auto graph = build_graph(s.topology, s.weights);
    out.timing["graph_build_ms"] = clock.lap_ms();
    if (s.command == Command::MulticastSweep && s.outputs.empty()) s.outputs = farthest_first_outputs(graph, s.input);
    write_text(out.dir / "config.json", dump_scenario(s));
    using Runner = std::function<void(const Scenario&, MeshGraph&, Output&)>;
    const std::map<Command, Runner> runners = {
        {Command::Interconnect, run_interconnect},       {Command::InterconnectSweep, run_interconnect_sweep},
        {Command::Switch, run_switch},                   {Command::SwitchSweep, run_switch_sweep},
        {Command::Multicast, run_multicast},             {Command::MulticastSweep, run_multicast_sweep},
        {Command::BenchPaths, run_bench},
    };
    runners.at(s.command)(s, graph, out);
    out.timing["command_ms"] = clock.lap_ms();
    summary["status"] = "ok";
    summary["results"] = out.summary;
  } catch (const std::exception& e) {
    result.exit_code = solver_failure(e) ? 2 : 1;
    result.message = (result.exit_code == 2 ? "solver failure: " : "input error: ") + std::string(e.what());
    summary["status"] = result.exit_code == 2 ? "solver_failure" : "input_error";
    summary["error"] = e.what();
  }
  summary["exit_code"] = result.exit_code;
  std::sort(out.csv.begin(), out.csv.end());
  json files = json::array();
  for (const auto& f : out.csv) files.push_back(f.generic_string());
  summary["csv_files"] = files;
  out.timing["total_ms"] = total.lap_ms();
  try {
    write_text(out.dir / "summary.json", summary.dump(2) + "\n");
    write_text(out.dir / "timing.json", out.timing.dump(2) + "\n");
  } catch (const std::exception& e) {
    if (result.exit_code == 0) {
      result.exit_code = 1;
      result.message = std::string("input error: ") + e.what();
    }
  }
  result.csv_files = out.csv;
  if (result.exit_code == 0) result.message = "ok";
  return result;
}

std::vector<IoPair> random_pairs(const MeshTopology& topology, int n, std::uint64_t seed) {
  const auto& u = topology.usable_ports();
  if (u.size() < 2) throw std::invalid_argument("need at least two usable ports");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> first(0, u.size() - 1), second(0, u.size() - 2);
  std::vector<IoPair> pairs;
  for (int i = 0; i < n; ++i) {
    const std::size_t a = first(rng);
    std::size_t b = second(rng);
    if (b >= a) ++b;
    pairs.emplace_back(u[a], u[b]);
  }
  return pairs;
}

BenchReport bench_paths(const MeshTopology& topology, int n_paths, std::uint64_t seed, const WeightCoeffs& weights) {
  if (n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
  BenchReport r;
  r.n_paths = n_paths;
  r.seed = seed;
  r.pairs = random_pairs(topology, n_paths, seed);
  const auto t0 = std::chrono::steady_clock::now();
  const auto graph = build_graph(topology, weights);
  r.graph_build_us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
  const auto batch = route_batch(graph, r.pairs);
  for (const auto& p : batch.paths) {
    r.weights.push_back(p ? p->total_weight : std::numeric_limits<double>::quiet_NaN());
    r.routed += p ? 1 : 0;
  }
  r.mean_us = batch.mean_us;
  r.median_us = batch.median_us;
  r.p99_us = batch.p99_us;
  return r;
}

}  // namespace pmesh
