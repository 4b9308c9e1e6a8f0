#pragma once

#include <map>
#include <optional>
#include <vector>

#include "pmesh/topology.hpp"

namespace pmesh {

struct MulticastConfig;
struct SwitchConfig;

/// Power level reported for ports that receive no light, dB.
inline constexpr double kFloorDb = -120.0;
inline constexpr double kDefaultSourcePowerDbm = 5.0;

struct SimParams {
  double facet_loss_db = kDefaultFacetLossDb;  ///< per fiber-chip crossing
  bool crosstalk_enabled = false;
  /// Leakage suppression of every PUC in the bar or cross state. Unset uses each
  /// PUC's own crosstalk_db attribute.
  std::optional<double> crosstalk_db;
  double source_power_dbm = kDefaultSourcePowerDbm;

  /// Throws std::invalid_argument for a negative facet loss or a non-positive
  /// crosstalk suppression.
  void validate() const;
};

/// Output of one propagation, relative to the laser power.
struct PowerMap {
  std::map<int, double> port_db;   ///< every external port, floored at kFloorDb
  std::map<int, double> port_lin;  ///< same, as a linear fraction
  double dissipated = 0.0;         ///< fraction lost in PUCs, facets and Off cells
  double residual = 0.0;           ///< fraction still in flight when propagation stopped

  double db(int port) const { return port_db.at(port); }
  double dbm(int port, const SimParams& p) const { return port_db.at(port) + p.source_power_dbm; }
};

double db_to_lin(double db);
/// Linear power to dB, floored at kFloorDb.
double lin_to_db(double lin);

/// Incoherent power propagation from one input port. A PUC with cross fraction k
/// and transmission t sends k*t of the arriving power to its cross exit and
/// (1-k)*t to its bar exit. With crosstalk on, a bar or cross PUC leaks the
/// fraction 10^(-xt/10) of its transmitted power into the dark exit instead of the
/// lit one, so leakage never creates energy. Off PUCs absorb. Light leaving an
/// external port is counted there after one facet loss; the input suffers one
/// facet loss too. Throws LitCycle when power keeps circulating without decaying
/// and std::invalid_argument for a state map that misses a lit PUC.
PowerMap propagate(const MeshTopology& topology, const std::map<int, PucState>& states,
                   int input_port, const SimParams& params);

/// Row i holds the power (dB) each listed output receives from inputs[i].
struct PowerMatrix {
  std::vector<int> inputs;
  std::vector<int> outputs;
  std::vector<std::vector<double>> db;
};

PowerMatrix switch_matrix(const MeshTopology& topology, const std::map<int, PucState>& states,
                          const std::vector<int>& inputs, const std::vector<int>& outputs,
                          const SimParams& params);
/// Uses the configuration's states. Inputs and outputs are the ports of its pairs.
PowerMatrix switch_matrix(const MeshTopology& topology, const SwitchConfig& config,
                          const std::vector<int>& inputs, const std::vector<int>& outputs,
                          const SimParams& params);

struct CrosstalkReport {
  /// Per output column: the target entry minus the strongest other entry, dB.
  /// Infinite when every other entry sits at the floor.
  std::vector<double> per_output;
  double worst = 0.0;    ///< smallest column value
  double typical = 0.0;  ///< median column value
  double best = 0.0;     ///< largest column value
};

/// `target_row[j]` is the row whose power is wanted at column j.
CrosstalkReport crosstalk_report(const PowerMatrix& matrix, const std::vector<int>& target_row);

struct MulticastPowerReport {
  std::vector<int> outputs;
  std::vector<double> port_db;  ///< request order
  double mean_db = 0.0;
  double min_db = 0.0;
  /// Largest difference between two outputs after removing their target shares:
  /// max - min of port_db[i] - 10 log10(N * share[i]).
  double max_deviation_db = 0.0;
};

MulticastPowerReport multicast_power_report(const MeshTopology& topology, const MulticastConfig& config,
                                            const SimParams& params);

}  // namespace pmesh
