#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pmesh/graph.hpp"
#include "pmesh/multicast.hpp"
#include "pmesh/powersim.hpp"
#include "pmesh/study.hpp"
#include "pmesh/switching.hpp"
#include "pmesh/topology.hpp"

namespace pmesh {

enum class Command { Interconnect, InterconnectSweep, Switch, SwitchSweep, Multicast, MulticastSweep, BenchPaths };

std::string_view to_string(Command c);
/// Accepts the dashed names, e.g. "switch-sweep". Throws std::invalid_argument.
Command parse_command(std::string_view text);

/// Default 6x6 port sets of the reference mesh.
inline const std::vector<int> kDefaultSwitchInputs{4, 5, 6, 7, 8, 9};
inline const std::vector<int> kDefaultSwitchOutputs{22, 23, 24, 25, 26, 27};
inline const std::vector<int> kDefaultSweepInputs{4, 7, 10, 13};
inline constexpr int kDefaultSampleEvery = 20;
inline constexpr int kDefaultBenchPaths = 400;

/// A fully resolved experiment. Fields a command does not use keep their defaults.
struct Scenario {
  std::string name;
  Command command = Command::Interconnect;
  std::string topology_source;  ///< "mesh72", "generator:5x3" or the resolved file path
  MeshTopology topology;
  WeightCoeffs weights;
  SimParams sim;
  std::optional<std::uint64_t> seed;

  std::vector<IoPair> pairs;             ///< interconnect, switch
  std::set<int> failed_pucs;             ///< interconnect
  std::vector<int> inputs;               ///< interconnect-sweep, switch, switch-sweep
  std::vector<int> outputs;              ///< switch, switch-sweep, multicast, multicast-sweep
  std::vector<int> permutation;          ///< switch
  int input = -1;                        ///< multicast, multicast-sweep
  std::vector<double> proportion;        ///< multicast
  IlSource il_source = IlSource::PerPuc;  ///< multicast
  SwitchAlgorithm algorithm = SwitchAlgorithm::EdgePenalty;
  int max_iter = kDefaultMaxIter;
  int sample_every = kDefaultSampleEvery;  ///< switch-sweep matrix sampling stride
  int min_n = 1;                           ///< multicast-sweep
  int max_n = 26;
  double sigma_db = kDefaultIlSigmaDb;
  int seeds = kDefaultStudySeeds;
  int n_paths = kDefaultBenchPaths;        ///< bench-paths
  int threads = 1;
};

/// Topology by reference: "mesh72", "generator:<rows>x<cols>" or a topology file
/// (relative paths resolve against `base_dir`). Throws ParseError, std::invalid_argument
/// or InvariantViolation.
MeshTopology load_topology_ref(std::string_view ref, const std::filesystem::path& base_dir = {},
                               std::string* resolved = nullptr);

/// Parses scenario JSON. Relative topology files resolve against `base_dir`.
/// Throws ParseError for malformed text, unknown keys or missing fields, and
/// std::invalid_argument for ports or arguments the topology cannot satisfy.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& file);

/// Checks the command arguments against the topology. Throws std::invalid_argument.
void validate_scenario(const Scenario& s);

/// Resolved parameters as deterministic JSON text.
std::string dump_scenario(const Scenario& s);

struct RunOptions {
  std::filesystem::path out_dir;  ///< empty: $PMESH_OUT_DIR, else ./results
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

struct RunResult {
  int exit_code = 0;  ///< 0 success, 1 input error, 2 solver failure
  std::string message;
  std::filesystem::path out_dir;
  std::vector<std::filesystem::path> csv_files;  ///< relative to out_dir, sorted
};

/// Output directory a run writes to: options.out_dir, $PMESH_OUT_DIR, or
/// ./results, followed by the scenario name.
std::filesystem::path resolve_out_dir(const RunOptions& options, const std::string& scenario_name);

/// Runs one scenario and writes config.json, summary.json, timing.json and the
/// command's CSV files. Never throws; failures are reported through the exit code,
/// the message and, where possible, summary.json.
RunResult run_scenario(const std::filesystem::path& file, const RunOptions& options = {});
RunResult run_scenario(Scenario scenario, const RunOptions& options = {});

struct BenchReport {
  int n_paths = 0;
  std::uint64_t seed = 0;
  std::vector<IoPair> pairs;
  std::vector<double> weights;  ///< route weight per pair, NaN when unroutable
  int routed = 0;
  double graph_build_us = 0.0;
  double mean_us = 0.0;
  double median_us = 0.0;
  double p99_us = 0.0;
};

/// Ordered pairs of distinct usable ports drawn uniformly with replacement.
std::vector<IoPair> random_pairs(const MeshTopology& topology, int n, std::uint64_t seed);

/// Builds the graph (timed separately), then routes `n_paths` random pairs with one
/// router and times every query. Throws std::invalid_argument for n_paths < 1.
BenchReport bench_paths(const MeshTopology& topology, int n_paths, std::uint64_t seed,
                        const WeightCoeffs& weights = {});

}  // namespace pmesh
