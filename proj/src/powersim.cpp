#include "pmesh/powersim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "pmesh/errors.hpp"
#include "pmesh/graph.hpp"
#include "pmesh/multicast.hpp"
#include "pmesh/switching.hpp"

namespace pmesh {

namespace {

// Propagation stops once less than this fraction of the source is still moving.
constexpr double kResidual = 1e-15;
// Power that does not shrink by this factor over one block of rounds is trapped.
constexpr double kMinDecay = 0.5;
constexpr long kMaxRounds = 1'000'000;

}  // namespace

void SimParams::validate() const {
  if (!(facet_loss_db >= 0.0) || !std::isfinite(facet_loss_db)) {
    throw std::invalid_argument("facet loss must be a finite value >= 0 dB");
  }
  if (crosstalk_db && (!(*crosstalk_db > 0.0) || !std::isfinite(*crosstalk_db))) {
    throw std::invalid_argument("crosstalk suppression must be a finite value > 0 dB");
  }
  if (!std::isfinite(source_power_dbm)) throw std::invalid_argument("source power must be finite");
}

double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }

double lin_to_db(double lin) {
  if (!(lin > 0.0)) return kFloorDb;
  return std::max(kFloorDb, 10.0 * std::log10(lin));
}

PowerMap propagate(const MeshTopology& topology, const std::map<int, PucState>& states, int input_port,
                   const SimParams& params) {
  params.validate();
  const int pucs = static_cast<int>(topology.puc_count());
  const int nodes = 8 * pucs;
  // Per port (node >> 1): the inbound node across its waveguide, or the external
  // port number encoded as -2 - index.
  std::vector<int> next(static_cast<std::size_t>(nodes / 2), -1);
  for (int n = 0; n < nodes; n += 2) {
    const PortRef r = port_of_node(n);
    if (auto l = topology.linked_port(r)) {
      next[n >> 1] = in_node(*l);
    } else if (auto e = topology.external_index(r)) {
      next[n >> 1] = -2 - *e;
    }
  }

  const double facet = db_to_lin(-params.facet_loss_db);
  PowerMap out;
  for (const auto& e : topology.external_ports()) out.port_lin[e.index] = 0.0;
  const NodeId source = in_node(topology.external_port(input_port).port);

  std::vector<double> pending(static_cast<std::size_t>(nodes), 0.0), arriving(pending.size(), 0.0);
  pending[source] = facet;
  out.dissipated = 1.0 - facet;

  auto deliver = [&](NodeId out_node_id, double p) {
    const int to = next[out_node_id >> 1];
    if (to >= 0) {
      arriving[to] += p;
    } else if (to <= -2) {
      out.port_lin[-2 - to] += p * facet;
      out.dissipated += p * (1.0 - facet);
    } else {
      out.dissipated += p;  // unterminated boundary port
    }
  };

  const long block = std::max(10, 10 * pucs);
  double block_start = facet;
  for (long round = 0;; ++round) {
    double moving = 0.0;
    for (double p : pending) moving += p;
    out.residual = moving;
    if (moving <= kResidual) break;
    if (round > 0 && round % block == 0) {
      if (moving > kMinDecay * block_start || round >= kMaxRounds) {
        throw LitCycle("light circulates without decaying from port " + std::to_string(input_port));
      }
      block_start = moving;
    }
    std::fill(arriving.begin(), arriving.end(), 0.0);
    for (NodeId u = 0; u < nodes; u += 2) {
      const double p = pending[u];
      if (p == 0.0) continue;
      const int id = puc_of_node(u);
      const auto st = states.find(id);
      if (st == states.end()) {
        throw std::invalid_argument("no state given for lit PUC " + std::to_string(id));
      }
      const PucState& s = st->second;
      if (s.is_off()) {
        out.dissipated += p;
        continue;
      }
      const Puc& puc = topology.puc(id);
      const double t = db_to_lin(puc.il_db);
      double k = s.cross_fraction();
      if (params.crosstalk_enabled && s.kind() != PucState::Kind::TunableCoupler) {
        const double leak = db_to_lin(-params.crosstalk_db.value_or(puc.crosstalk_db));
        k = s.kind() == PucState::Kind::Cross ? 1.0 - leak : leak;
      }
      out.dissipated += p * (1.0 - t);
      const PortSide side = side_of_node(u);
      if (k < 1.0) deliver(out_node({id, exit_side(side, ArcTag::Bar)}), p * t * (1.0 - k));
      if (k > 0.0) deliver(out_node({id, exit_side(side, ArcTag::Cross)}), p * t * k);
    }
    pending.swap(arriving);
  }
  for (const auto& [port, lin] : out.port_lin) out.port_db[port] = lin_to_db(lin);
  return out;
}

PowerMatrix switch_matrix(const MeshTopology& topology, const std::map<int, PucState>& states,
                          const std::vector<int>& inputs, const std::vector<int>& outputs,
                          const SimParams& params) {
  PowerMatrix m{inputs, outputs, {}};
  for (int in : inputs) {
    const auto pm = propagate(topology, states, in, params);
    auto& row = m.db.emplace_back();
    for (int o : outputs) row.push_back(pm.db(o));
  }
  return m;
}

PowerMatrix switch_matrix(const MeshTopology& topology, const SwitchConfig& config,
                          const std::vector<int>& inputs, const std::vector<int>& outputs,
                          const SimParams& params) {
  return switch_matrix(topology, config.states, inputs, outputs, params);
}

CrosstalkReport crosstalk_report(const PowerMatrix& matrix, const std::vector<int>& target_row) {
  const std::size_t cols = matrix.outputs.size();
  if (target_row.size() != cols) throw std::invalid_argument("one target row per output column is required");
  if (cols == 0) throw std::invalid_argument("the matrix has no output columns");
  CrosstalkReport r;
  for (std::size_t j = 0; j < cols; ++j) {
    const int t = target_row[j];
    if (t < 0 || t >= static_cast<int>(matrix.db.size())) throw std::out_of_range("target row out of range");
    double worst_other = kFloorDb;
    for (std::size_t i = 0; i < matrix.db.size(); ++i) {
      if (static_cast<int>(i) != t) worst_other = std::max(worst_other, matrix.db[i][j]);
    }
    r.per_output.push_back(worst_other <= kFloorDb ? std::numeric_limits<double>::infinity()
                                                   : matrix.db[t][j] - worst_other);
  }
  std::vector<double> sorted = r.per_output;
  std::sort(sorted.begin(), sorted.end());
  r.worst = sorted.front();
  r.best = sorted.back();
  const std::size_t mid = sorted.size() / 2;
  r.typical = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return r;
}

MulticastPowerReport multicast_power_report(const MeshTopology& topology, const MulticastConfig& config,
                                            const SimParams& params) {
  if (config.shares.size() != config.output_ports.size()) {
    throw std::invalid_argument("one share per output is required");
  }
  const auto pm = propagate(topology, config.states, config.input_port, params);
  MulticastPowerReport r;
  r.outputs = config.output_ports;
  const double n = static_cast<double>(config.output_ports.size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
  r.min_db = lo;
  for (std::size_t i = 0; i < config.output_ports.size(); ++i) {
    const double db = pm.db(config.output_ports[i]);
    r.port_db.push_back(db);
    sum += db;
    r.min_db = std::min(r.min_db, db);
    const double normalized = db - 10.0 * std::log10(n * config.shares[i]);
    lo = std::min(lo, normalized);
    hi = std::max(hi, normalized);
  }
  r.mean_db = sum / n;
  r.max_deviation_db = hi - lo;
  return r;
}

}  // namespace pmesh
