#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pmesh/errors.hpp"
#include "pmesh/graph.hpp"
#include "pmesh/interconnect.hpp"
#include "pmesh/multicast.hpp"
#include "pmesh/powersim.hpp"
#include "pmesh/scenario.hpp"
#include "pmesh/study.hpp"
#include "pmesh/switching.hpp"
#include "pmesh/topology.hpp"

namespace py = pybind11;
using namespace pmesh;

namespace {

std::map<int, std::string> state_names(const std::map<int, ArcTag>& tags) {
  std::map<int, std::string> out;
  for (const auto& [puc, tag] : tags) out[puc] = std::string(to_string(tag));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Graph-based control plane for programmable hexagonal photonic meshes";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", error);
  py::register_exception<InvariantViolation>(m, "InvariantViolation", error);
  py::register_exception<NoRoute>(m, "NoRoute", error);
  py::register_exception<Unsolved>(m, "Unsolved", error);
  py::register_exception<TreeConflict>(m, "TreeConflict", error);
  py::register_exception<LitCycle>(m, "LitCycle", error);
  py::register_exception<EvaluationOrderError>(m, "EvaluationOrderError", error);

  py::class_<PucState>(m, "PucState")
      .def_static("bar", &PucState::bar)
      .def_static("cross", &PucState::cross)
      .def_static("off", &PucState::off)
      .def_static("tunable", &PucState::tunable, py::arg("k"))
      .def_property_readonly("cross_fraction", &PucState::cross_fraction)
      .def_property_readonly("is_off", &PucState::is_off)
      .def("__eq__", [](const PucState& a, const PucState& b) { return a == b; })
      .def("__repr__", [](const PucState& s) { return "PucState(" + to_string(s) + ")"; });

  py::class_<Puc>(m, "Puc")
      .def_readonly("id", &Puc::id)
      .def_readonly("il_db", &Puc::il_db)
      .def_readonly("bul", &Puc::bul)
      .def_readonly("power_mw", &Puc::power_mw)
      .def_readonly("crosstalk_db", &Puc::crosstalk_db);

  py::class_<MeshTopology>(m, "MeshTopology")
      .def_property_readonly("puc_count", &MeshTopology::puc_count)
      .def_property_readonly("usable_ports", &MeshTopology::usable_ports)
      .def_property_readonly("pucs", &MeshTopology::pucs)
      .def("serialize", [](const MeshTopology& t) { return serialize_topology(t); })
      .def("with_il", [](const MeshTopology& t, const std::vector<double>& il) {
        auto pucs = t.pucs();
        if (il.size() != pucs.size()) throw std::invalid_argument("one loss value per PUC is required");
        for (std::size_t i = 0; i < pucs.size(); ++i) pucs[i].il_db = il[i];
        return t.with_pucs(std::move(pucs));
      }, py::arg("il_db"));

  m.def("mesh72", &mesh72);
  m.def("generate_hex_mesh", [](int rows, int cols) { return generate_hex_mesh(rows, cols); }, py::arg("rows"),
        py::arg("cols"));
  m.def("parse_topology", &parse_topology, py::arg("text"));
  m.def("load_topology", &load_topology, py::arg("path"));
  m.def("validate_topology", [](const MeshTopology& t) {
    std::vector<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& v : validate_topology(t)) out.emplace_back(v.entity, v.rule, v.message);
    return out;
  });

  py::class_<WeightCoeffs>(m, "WeightCoeffs")
      .def(py::init([](double c_il, double c_bul, double c_pc) { return WeightCoeffs{c_il, c_bul, c_pc}; }),
           py::arg("c_il") = 1.0, py::arg("c_bul") = 0.0, py::arg("c_pc") = 0.0)
      .def_readwrite("c_il", &WeightCoeffs::c_il)
      .def_readwrite("c_bul", &WeightCoeffs::c_bul)
      .def_readwrite("c_pc", &WeightCoeffs::c_pc);

  py::class_<MeshGraph>(m, "MeshGraph")
      .def_property_readonly("node_count", &MeshGraph::node_count)
      .def_property_readonly("puc_count", &MeshGraph::puc_count)
      .def_property_readonly("topology", &MeshGraph::topology, py::return_value_policy::reference_internal);
  m.def("build_graph", [](const MeshTopology& t, const WeightCoeffs& w) { return build_graph(t, w); },
        py::arg("topology"), py::arg("weights") = WeightCoeffs{});

  py::class_<LightPath>(m, "LightPath")
      .def_readonly("in_port", &LightPath::in_port)
      .def_readonly("out_port", &LightPath::out_port)
      .def_readonly("nodes", &LightPath::nodes)
      .def_readonly("total_weight", &LightPath::total_weight)
      .def_readonly("puc_count", &LightPath::puc_count)
      .def_property_readonly("required_states", [](const LightPath& p) { return state_names(p.required_states); })
      .def_property_readonly("pucs", &LightPath::pucs);

  m.def("shortest_path", py::overload_cast<const MeshGraph&, int, int>(&shortest_path), py::arg("graph"),
        py::arg("in_port"), py::arg("out_port"));
  m.def("self_heal", &self_heal, py::arg("graph"), py::arg("in_port"), py::arg("out_port"), py::arg("failed_pucs"));
  m.def("enumerate_paths", &enumerate_paths, py::arg("graph"), py::arg("in_port"), py::arg("out_port"),
        py::arg("max_pucs"));

  py::class_<SwitchConfig>(m, "SwitchConfig")
      .def_readonly("paths", &SwitchConfig::paths)
      .def_readonly("states", &SwitchConfig::states)
      .def_readonly("iterations_used", &SwitchConfig::iterations_used)
      .def_readonly("total_weight", &SwitchConfig::total_weight);
  m.def("auto_switch",
        [](const MeshGraph& g, const std::vector<IoPair>& pairs, int max_iter, const std::string& algorithm) {
          MeshGraph local = g;
          return auto_switch(local, {pairs, max_iter, parse_switch_algorithm(algorithm)});
        },
        py::arg("graph"), py::arg("pairs"), py::arg("max_iter") = kDefaultMaxIter,
        py::arg("algorithm") = "edge_penalty");
  m.def("get_conflict_edges", [](const std::vector<LightPath>& paths) {
    const auto c = get_conflict_edges(paths);
    return py::make_tuple(c.pucs, c.pairs);
  });
  m.def("permutation_pairs", &permutation_pairs, py::arg("inputs"), py::arg("outputs"), py::arg("permutation"));

  py::class_<SweepEntry>(m, "SweepEntry")
      .def_readonly("permutation", &SweepEntry::permutation)
      .def_readonly("solved", &SweepEntry::solved)
      .def_readonly("iterations", &SweepEntry::iterations)
      .def_readonly("total_weight", &SweepEntry::total_weight);
  py::class_<SweepReport>(m, "SweepReport")
      .def_readonly("entries", &SweepReport::entries)
      .def_readonly("solved", &SweepReport::solved)
      .def_readonly("iteration_histogram", &SweepReport::iteration_histogram)
      .def_property_readonly("solve_rate", &SweepReport::solve_rate);
  m.def("feasibility_sweep",
        [](const MeshGraph& g, const std::vector<int>& in, const std::vector<int>& out, int max_iter,
           const std::string& algorithm, int threads) {
          py::gil_scoped_release release;
          return feasibility_sweep(g, in, out, max_iter, parse_switch_algorithm(algorithm), threads);
        },
        py::arg("graph"), py::arg("inputs"), py::arg("outputs"), py::arg("max_iter") = kDefaultMaxIter,
        py::arg("algorithm") = "edge_penalty", py::arg("threads") = 1);

  m.def("splitting_ratio", &splitting_ratio, py::arg("k_target"), py::arg("il_bar_db"), py::arg("il_cross_db"));
  py::class_<TunableCoupler>(m, "TunableCoupler")
      .def_readonly("puc", &TunableCoupler::puc)
      .def_readonly("depth", &TunableCoupler::depth)
      .def_readonly("bar_outputs", &TunableCoupler::bar_outputs)
      .def_readonly("cross_outputs", &TunableCoupler::cross_outputs)
      .def_readonly("k_target", &TunableCoupler::k_target)
      .def_readonly("k", &TunableCoupler::k)
      .def_readonly("il_bar_db", &TunableCoupler::il_bar_db)
      .def_readonly("il_cross_db", &TunableCoupler::il_cross_db);
  py::class_<MulticastConfig>(m, "MulticastConfig")
      .def_readonly("input_port", &MulticastConfig::input_port)
      .def_readonly("output_ports", &MulticastConfig::output_ports)
      .def_readonly("shares", &MulticastConfig::shares)
      .def_readonly("paths", &MulticastConfig::paths)
      .def_readonly("couplers", &MulticastConfig::couplers)
      .def_readonly("states", &MulticastConfig::states);
  m.def("auto_multicast",
        [](const MeshGraph& g, int input, const std::vector<int>& outputs, const std::vector<double>& proportion,
           const std::string& il_source) {
          return auto_multicast(g, {input, outputs, proportion, parse_il_source(il_source)});
        },
        py::arg("graph"), py::arg("input_port"), py::arg("output_ports"),
        py::arg("proportion") = std::vector<double>{}, py::arg("il_source") = "per_puc");

  py::class_<SimParams>(m, "SimParams")
      .def(py::init([](double facet, bool xt, std::optional<double> xt_db, double power) {
             SimParams p{facet, xt, xt_db, power};
             p.validate();
             return p;
           }),
           py::arg("facet_loss_db") = kDefaultFacetLossDb, py::arg("crosstalk_enabled") = false,
           py::arg("crosstalk_db") = std::nullopt, py::arg("source_power_dbm") = kDefaultSourcePowerDbm)
      .def_readwrite("facet_loss_db", &SimParams::facet_loss_db)
      .def_readwrite("crosstalk_enabled", &SimParams::crosstalk_enabled)
      .def_readwrite("crosstalk_db", &SimParams::crosstalk_db)
      .def_readwrite("source_power_dbm", &SimParams::source_power_dbm);
  py::class_<PowerMap>(m, "PowerMap")
      .def_readonly("port_db", &PowerMap::port_db)
      .def_readonly("port_lin", &PowerMap::port_lin)
      .def_readonly("dissipated", &PowerMap::dissipated)
      .def_readonly("residual", &PowerMap::residual);
  m.def("propagate", &propagate, py::arg("topology"), py::arg("states"), py::arg("input_port"),
        py::arg("params") = SimParams{});
  py::class_<PowerMatrix>(m, "PowerMatrix")
      .def_readonly("inputs", &PowerMatrix::inputs)
      .def_readonly("outputs", &PowerMatrix::outputs)
      .def_readonly("db", &PowerMatrix::db);
  m.def("switch_matrix",
        py::overload_cast<const MeshTopology&, const SwitchConfig&, const std::vector<int>&, const std::vector<int>&,
                          const SimParams&>(&switch_matrix),
        py::arg("topology"), py::arg("config"), py::arg("inputs"), py::arg("outputs"), py::arg("params") = SimParams{});
  py::class_<CrosstalkReport>(m, "CrosstalkReport")
      .def_readonly("per_output", &CrosstalkReport::per_output)
      .def_readonly("worst", &CrosstalkReport::worst)
      .def_readonly("typical", &CrosstalkReport::typical)
      .def_readonly("best", &CrosstalkReport::best);
  m.def("crosstalk_report", &crosstalk_report, py::arg("matrix"), py::arg("target_row"));
  py::class_<MulticastPowerReport>(m, "MulticastPowerReport")
      .def_readonly("outputs", &MulticastPowerReport::outputs)
      .def_readonly("port_db", &MulticastPowerReport::port_db)
      .def_readonly("mean_db", &MulticastPowerReport::mean_db)
      .def_readonly("min_db", &MulticastPowerReport::min_db)
      .def_readonly("max_deviation_db", &MulticastPowerReport::max_deviation_db);
  m.def("multicast_power_report", &multicast_power_report, py::arg("topology"), py::arg("config"),
        py::arg("params") = SimParams{});

  py::class_<DeviationPoint>(m, "DeviationPoint")
      .def_readonly("n", &DeviationPoint::n)
      .def_readonly("mean_deviation_db", &DeviationPoint::mean_deviation_db)
      .def_readonly("mean_port_db", &DeviationPoint::mean_port_db)
      .def_readonly("min_port_db", &DeviationPoint::min_port_db);
  m.def("deviation_curve",
        [](const MeshTopology& t, int input, int min_n, int max_n, double sigma_db, int seeds, std::uint64_t base_seed) {
          DeviationStudy s;
          s.input = input;
          s.min_n = min_n;
          s.max_n = max_n;
          s.sigma_db = sigma_db;
          s.seeds = seeds;
          s.base_seed = base_seed;
          const auto c = deviation_curve(t, s);
          return py::make_tuple(c.outputs, c.points);
        },
        py::arg("topology"), py::arg("input_port") = kDefaultStudyInput, py::arg("min_n") = 1, py::arg("max_n") = 26,
        py::arg("sigma_db") = kDefaultIlSigmaDb, py::arg("seeds") = kDefaultStudySeeds,
        py::arg("base_seed") = kDefaultStudyBaseSeed);
  m.attr("DEFAULT_IL_SIGMA_DB") = kDefaultIlSigmaDb;

  py::class_<BenchReport>(m, "BenchReport")
      .def_readonly("n_paths", &BenchReport::n_paths)
      .def_readonly("seed", &BenchReport::seed)
      .def_readonly("pairs", &BenchReport::pairs)
      .def_readonly("routed", &BenchReport::routed)
      .def_readonly("graph_build_us", &BenchReport::graph_build_us)
      .def_readonly("mean_us", &BenchReport::mean_us)
      .def_readonly("median_us", &BenchReport::median_us)
      .def_readonly("p99_us", &BenchReport::p99_us);
  m.def("bench_paths", [](const MeshTopology& t, int n, std::uint64_t seed) { return bench_paths(t, n, seed); },
        py::arg("topology"), py::arg("n_paths"), py::arg("seed"));

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("exit_code", &RunResult::exit_code)
      .def_readonly("message", &RunResult::message)
      .def_readonly("out_dir", &RunResult::out_dir)
      .def_readonly("csv_files", &RunResult::csv_files);
  m.def("run_scenario",
        [](const std::filesystem::path& file, const std::filesystem::path& out, std::optional<std::uint64_t> seed,
           std::optional<int> threads) {
          py::gil_scoped_release release;
          return run_scenario(file, {out, seed, threads});
        },
        py::arg("scenario"), py::arg("out_dir") = std::filesystem::path{}, py::arg("seed") = std::nullopt,
        py::arg("threads") = std::nullopt);
}
