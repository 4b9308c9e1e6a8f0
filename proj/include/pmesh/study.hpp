#pragma once

#include <cstdint>
#include <vector>

#include "pmesh/graph.hpp"
#include "pmesh/topology.hpp"

namespace pmesh {

/// Copy of `topology` whose PUC losses are il_db + N(0, sigma^2), clipped at 0 dB so
/// no cell amplifies. Deterministic in `seed`.
MeshTopology perturb_il(const MeshTopology& topology, double sigma, std::uint64_t seed);

/// Copy of `topology` with every PUC loss set to the mean of its PUC losses.
MeshTopology average_il(const MeshTopology& topology);

/// Usable ports other than `input`, farthest first by nominal route weight (ties
/// by port number).
std::vector<int> farthest_first_outputs(const MeshGraph& graph, int input);

/// Frozen standard deviation (dB) of per-PUC loss variation, fitted so that the
/// seed-averaged 1x2 deviation of the default study equals kDeviationAnchorDb.
inline constexpr double kDefaultIlSigmaDb = 0.2571;
inline constexpr double kDeviationAnchorDb = 0.663;
inline constexpr int kDefaultStudyInput = 7;
inline constexpr int kDefaultStudySeeds = 40;
inline constexpr std::uint64_t kDefaultStudyBaseSeed = 1000;

/// Multicast fan-out study: the algorithm plans on the global-average loss while
/// the simulator sees perturbed losses. Outputs are taken as prefixes of `outputs`.
struct DeviationStudy {
  int input = kDefaultStudyInput;
  std::vector<int> outputs;  ///< empty means farthest_first_outputs
  int min_n = 1;
  int max_n = 26;
  double sigma_db = kDefaultIlSigmaDb;
  int seeds = kDefaultStudySeeds;
  std::uint64_t base_seed = kDefaultStudyBaseSeed;  ///< seed s uses base_seed + s
};

struct DeviationPoint {
  int n = 0;
  double mean_deviation_db = 0.0;  ///< seed average of max - min normalized power
  double mean_port_db = 0.0;       ///< seed average of the mean output power
  double min_port_db = 0.0;        ///< seed average of the weakest output power
};

struct DeviationCurve {
  std::vector<int> outputs;  ///< resolved order
  std::vector<DeviationPoint> points;  ///< n = min_n .. max_n
  /// Port powers of the unperturbed topology, per n: row i holds outputs[0..n).
  std::vector<std::vector<double>> nominal_port_db;
};

/// Throws std::invalid_argument for an empty range, a range beyond the outputs or
/// a negative sigma, plus everything auto_multicast throws.
DeviationCurve deviation_curve(const MeshTopology& topology, const DeviationStudy& study);

/// Bisects sigma in [0, hi] until the seed-averaged deviation at n = 2 matches
/// `anchor_db` within `tolerance_db`. Throws Unsolved when the anchor lies outside
/// the bracket.
double fit_sigma(const MeshTopology& topology, DeviationStudy study, double anchor_db,
                 double hi = 1.0, double tolerance_db = 1e-4);

/// Spearman rank correlation of two equal-length samples (average ranks for ties).
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pmesh
