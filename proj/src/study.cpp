#include "pmesh/study.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "pmesh/errors.hpp"
#include "pmesh/interconnect.hpp"
#include "pmesh/multicast.hpp"
#include "pmesh/powersim.hpp"

namespace pmesh {

MeshTopology perturb_il(const MeshTopology& topology, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be finite and >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto pucs = topology.pucs();
  for (auto& p : pucs) p.il_db = std::min(0.0, p.il_db + sigma * noise(rng));
  return topology.with_pucs(std::move(pucs));
}

MeshTopology average_il(const MeshTopology& topology) {
  auto pucs = topology.pucs();
  if (pucs.empty()) return topology;
  double sum = 0.0;
  for (const auto& p : pucs) sum += p.il_db;
  const double mean = sum / static_cast<double>(pucs.size());
  for (auto& p : pucs) p.il_db = mean;
  return topology.with_pucs(std::move(pucs));
}

std::vector<int> farthest_first_outputs(const MeshGraph& graph, int input) {
  std::vector<std::pair<double, int>> by_weight;
  for (int o : graph.topology().usable_ports()) {
    if (o != input) by_weight.emplace_back(-shortest_path(graph, input, o).total_weight, o);
  }
  std::sort(by_weight.begin(), by_weight.end());
  std::vector<int> order;
  for (const auto& [w, o] : by_weight) order.push_back(o);
  return order;
}

DeviationCurve deviation_curve(const MeshTopology& topology, const DeviationStudy& study) {
  if (!(study.sigma_db >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  if (study.seeds < 1) throw std::invalid_argument("at least one seed is required");
  DeviationCurve curve;
  const auto nominal_graph = build_graph(topology);
  curve.outputs = study.outputs.empty() ? farthest_first_outputs(nominal_graph, study.input) : study.outputs;
  if (study.min_n < 1 || study.max_n < study.min_n ||
      study.max_n > static_cast<int>(curve.outputs.size())) {
    throw std::invalid_argument("fan-out range must satisfy 1 <= min_n <= max_n <= number of outputs");
  }
  auto request = [&](int n) {
    MulticastRequest r;
    r.input_port = study.input;
    r.output_ports.assign(curve.outputs.begin(), curve.outputs.begin() + n);
    r.il_source = IlSource::GlobalAverage;
    return r;
  };

  for (int n = study.min_n; n <= study.max_n; ++n) {
    const auto cfg = auto_multicast(nominal_graph, request(n));
    curve.nominal_port_db.push_back(multicast_power_report(topology, cfg, {}).port_db);
    curve.points.push_back({n, 0.0, 0.0, 0.0});
  }
  const double w = 1.0 / study.seeds;
  for (int s = 0; s < study.seeds; ++s) {
    const auto real = perturb_il(topology, study.sigma_db, study.base_seed + static_cast<std::uint64_t>(s));
    const auto graph = build_graph(average_il(real));
    for (auto& pt : curve.points) {
      const auto rep = multicast_power_report(real, auto_multicast(graph, request(pt.n)), {});
      pt.mean_deviation_db += w * rep.max_deviation_db;
      pt.mean_port_db += w * rep.mean_db;
      pt.min_port_db += w * rep.min_db;
    }
  }
  return curve;
}

double fit_sigma(const MeshTopology& topology, DeviationStudy study, double anchor_db, double hi,
                 double tolerance_db) {
  study.min_n = study.max_n = 2;
  auto deviation = [&](double sigma) {
    study.sigma_db = sigma;
    return deviation_curve(topology, study).points.front().mean_deviation_db;
  };
  double lo = 0.0;
  if (deviation(lo) > anchor_db || deviation(hi) < anchor_db) {
    throw Unsolved("the deviation anchor lies outside the sigma bracket");
  }
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double d = deviation(mid);
    if (std::abs(d - anchor_db) <= tolerance_db) return mid;
    (d < anchor_db ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("need two samples of equal length >= 2");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace pmesh
