#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "pmesh/scenario.hpp"

namespace {

int run(const std::string& file, const std::string& out, std::optional<std::uint64_t> seed,
        std::optional<int> threads) {
  pmesh::RunOptions opts;
  opts.out_dir = out;
  opts.seed = seed;
  opts.threads = threads;
  const auto r = pmesh::run_scenario(file, opts);
  if (r.exit_code == 0) {
    std::cout << "wrote " << r.csv_files.size() << " csv files to " << r.out_dir.string() << "\n";
  } else {
    std::cerr << r.message << "\n";
  }
  return r.exit_code;
}

int bench(const std::string& topology, int n, std::uint64_t seed, bool as_json) {
  try {
    const auto t = pmesh::load_topology_ref(topology);
    const auto b = pmesh::bench_paths(t, n, seed);
    if (as_json) {
      nlohmann::json j = {{"topology", topology}, {"n_paths", b.n_paths},   {"seed", b.seed},
                          {"routed", b.routed},   {"graph_build_us", b.graph_build_us},
                          {"mean_us", b.mean_us}, {"median_us", b.median_us}, {"p99_us", b.p99_us}};
      std::cout << j.dump(2) << "\n";
    } else {
      std::printf("paths %d (routed %d), seed %llu\n", b.n_paths, b.routed, static_cast<unsigned long long>(b.seed));
      std::printf("graph build  %10.3f us\n", b.graph_build_us);
      std::printf("per path     mean %.3f us  median %.3f us  p99 %.3f us\n", b.mean_us, b.median_us, b.p99_us);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Control plane for programmable hexagonal photonic meshes"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Run one scenario file");
  std::string file, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  run_cmd->add_option("scenario", file, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out, "Results directory (default: $PMESH_OUT_DIR, else ./results)");
  run_cmd->add_option("--seed", seed, "Override the scenario seed");
  run_cmd->add_option("--threads", threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);

  auto* bench_cmd = app.add_subcommand("bench-paths", "Time random point-to-point routes");
  std::string topology = "mesh72";
  int n = pmesh::kDefaultBenchPaths;
  std::uint64_t bench_seed = 1;
  bool as_json = false;
  bench_cmd->add_option("--topology", topology, "mesh72, generator:<rows>x<cols> or a topology file");
  bench_cmd->add_option("--n", n, "Number of paths")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench_seed, "Pair selection seed")->required();
  bench_cmd->add_flag("--json", as_json, "Print the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (*run_cmd) return run(file, out, seed, threads);
  return bench(topology, n, bench_seed, as_json);
}
