#include "pmesh/topology.hpp"

#include <algorithm>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "pmesh/errors.hpp"

namespace pmesh {

namespace {
constexpr std::string_view kSideNames[] = {"A1", "A2", "B1", "B2"};
}

std::string_view to_string(PortSide side) { return kSideNames[static_cast<int>(side)]; }

std::optional<PortSide> parse_port_side(std::string_view text) {
  for (int i = 0; i < 4; ++i) {
    if (kSideNames[i] == text) return static_cast<PortSide>(i);
  }
  return std::nullopt;
}

std::string to_string(const PortRef& port) {
  return std::to_string(port.puc) + ":" + std::string(to_string(port.side));
}

PucState PucState::tunable(double k) {
  if (!(k >= 0.0 && k <= 1.0)) {
    throw std::invalid_argument("tunable coupler k must lie in [0, 1], got " + std::to_string(k));
  }
  return PucState(Kind::TunableCoupler, k);
}

std::string to_string(const PucState& state) {
  switch (state.kind()) {
    case PucState::Kind::Bar:
      return "bar";
    case PucState::Kind::Cross:
      return "cross";
    case PucState::Kind::Off:
      return "off";
    case PucState::Kind::TunableCoupler: {
      std::ostringstream os;
      os << "tc(" << state.cross_fraction() << ")";
      return os.str();
    }
  }
  return "?";
}

MeshTopology::MeshTopology(std::vector<Puc> pucs, std::vector<Link> links,
                           std::vector<ExternalPort> external_ports, std::vector<int> usable_ports)
    : pucs_(std::move(pucs)),
      links_(std::move(links)),
      external_ports_(std::move(external_ports)),
      usable_ports_(std::move(usable_ports)) {
  for (std::size_t i = 0; i < pucs_.size(); ++i) puc_by_id_.try_emplace(pucs_[i].id, i);
  // First occurrence wins; duplicates are reported by validate_topology.
  for (const auto& link : links_) {
    partner_.try_emplace(link.a, link.b);
    partner_.try_emplace(link.b, link.a);
  }
  for (std::size_t i = 0; i < external_ports_.size(); ++i) {
    external_by_index_.try_emplace(external_ports_[i].index, i);
    external_of_port_.try_emplace(external_ports_[i].port, external_ports_[i].index);
  }
  usable_set_.insert(usable_ports_.begin(), usable_ports_.end());
}

const Puc& MeshTopology::puc(int id) const {
  auto it = puc_by_id_.find(id);
  if (it == puc_by_id_.end()) throw std::out_of_range("unknown PUC id " + std::to_string(id));
  return pucs_[it->second];
}

std::optional<PortRef> MeshTopology::linked_port(const PortRef& port) const {
  auto it = partner_.find(port);
  if (it == partner_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> MeshTopology::external_index(const PortRef& port) const {
  auto it = external_of_port_.find(port);
  if (it == external_of_port_.end()) return std::nullopt;
  return it->second;
}

const ExternalPort& MeshTopology::external_port(int index) const {
  auto it = external_by_index_.find(index);
  if (it == external_by_index_.end()) {
    throw std::out_of_range("unknown external port " + std::to_string(index));
  }
  return external_ports_[it->second];
}

MeshTopology MeshTopology::with_pucs(std::vector<Puc> pucs) const {
  if (pucs.size() != pucs_.size()) {
    throw std::invalid_argument("with_pucs: PUC count mismatch");
  }
  for (std::size_t i = 0; i < pucs.size(); ++i) {
    if (pucs[i].id != pucs_[i].id) throw std::invalid_argument("with_pucs: PUC ids must match");
  }
  return MeshTopology(std::move(pucs), links_, external_ports_, usable_ports_);
}

bool MeshTopology::operator==(const MeshTopology& other) const {
  return pucs_ == other.pucs_ && links_ == other.links_ &&
         external_ports_ == other.external_ports_ && usable_ports_ == other.usable_ports_;
}

std::vector<Violation> validate_topology(const MeshTopology& topology) {
  std::vector<Violation> out;
  const auto& pucs = topology.pucs();
  auto add = [&](std::string entity, std::string rule, std::string msg) {
    out.push_back({std::move(entity), std::move(rule), std::move(msg)});
  };

  for (std::size_t i = 0; i < pucs.size(); ++i) {
    const Puc& p = pucs[i];
    const std::string name = "puc " + std::to_string(p.id);
    if (p.id != static_cast<int>(i)) {
      add(name, "puc-ids-dense", "PUC ids must be 0..n-1 in order; found id " +
                                     std::to_string(p.id) + " at position " + std::to_string(i));
    }
    if (!(p.il_db <= 0.0)) add(name, "il-nonpositive", "il_db must be <= 0");
    if (!(p.crosstalk_db > 0.0)) add(name, "crosstalk-positive", "crosstalk_db must be > 0");
    if (!(p.bul > 0.0)) add(name, "bul-positive", "bul must be > 0");
    if (!(p.power_mw >= 0.0)) add(name, "power-nonnegative", "power_mw must be >= 0");
  }

  const int n = static_cast<int>(pucs.size());
  auto known = [&](const PortRef& r) { return r.puc >= 0 && r.puc < n; };

  // Port-exclusivity: each PUC port takes part in at most one link or external port.
  std::map<PortRef, std::string> owner;
  auto claim = [&](const PortRef& r, const std::string& who) {
    if (!known(r)) {
      add(who, "unknown-puc", "references unknown PUC " + std::to_string(r.puc));
      return;
    }
    auto [it, inserted] = owner.try_emplace(r, who);
    if (!inserted) {
      add("port " + to_string(r), "port-exclusivity",
          "used by both " + it->second + " and " + who);
    }
  };
  for (std::size_t i = 0; i < topology.links().size(); ++i) {
    const Link& l = topology.links()[i];
    const std::string who = "link " + std::to_string(i);
    if (l.a.puc == l.b.puc && known(l.a)) {
      add(who, "no-self-link", "link joins two ports of the same PUC");
    }
    claim(l.a, who);
    claim(l.b, who);
  }
  std::set<int> indices;
  for (const auto& ext : topology.external_ports()) {
    const std::string who = "external port " + std::to_string(ext.index);
    if (!indices.insert(ext.index).second) {
      add(who, "external-index-unique", "external port number used twice");
    }
    claim(ext.port, who);
  }
  for (int u : topology.usable_ports()) {
    if (!indices.contains(u)) {
      add("usable port " + std::to_string(u), "usable-subset",
          "usable port is not an external port");
    }
  }

  // Connectivity over links.
  if (n > 0) {
    std::vector<std::vector<int>> adj(n);
    for (const auto& l : topology.links()) {
      if (known(l.a) && known(l.b)) {
        adj[l.a.puc].push_back(l.b.puc);
        adj[l.b.puc].push_back(l.a.puc);
      }
    }
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v : adj[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          q.push(v);
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      if (!seen[i]) {
        add("puc " + std::to_string(i), "connected", "PUC is not linked to the rest of the mesh");
      }
    }
  }
  return out;
}

void require_valid(const MeshTopology& topology) {
  auto v = validate_topology(topology);
  if (!v.empty()) {
    throw InvariantViolation(v.front().rule + ": " + v.front().entity + ": " + v.front().message);
  }
}

MeshTopology remove_pucs(const MeshTopology& topology, const std::set<int>& puc_ids) {
  std::map<int, int> renumber;
  std::vector<Puc> pucs;
  for (const auto& p : topology.pucs()) {
    if (puc_ids.contains(p.id)) continue;
    Puc q = p;
    q.id = static_cast<int>(pucs.size());
    renumber[p.id] = q.id;
    pucs.push_back(q);
  }
  auto remap = [&](PortRef r) {
    r.puc = renumber.at(r.puc);
    return r;
  };
  std::vector<Link> links;
  std::vector<PortRef> orphaned;
  for (const auto& l : topology.links()) {
    const bool keep_a = !puc_ids.contains(l.a.puc);
    const bool keep_b = !puc_ids.contains(l.b.puc);
    if (keep_a && keep_b) {
      links.push_back({remap(l.a), remap(l.b)});
    } else if (keep_a) {
      orphaned.push_back(remap(l.a));
    } else if (keep_b) {
      orphaned.push_back(remap(l.b));
    }
  }
  std::vector<ExternalPort> ext;
  std::vector<int> usable;
  int next_index = 0;
  for (const auto& e : topology.external_ports()) next_index = std::max(next_index, e.index + 1);
  for (const auto& e : topology.external_ports()) {
    if (puc_ids.contains(e.port.puc)) continue;
    ExternalPort f = e;
    f.port = remap(e.port);
    ext.push_back(f);
    if (topology.is_usable(e.index)) usable.push_back(e.index);
  }
  std::sort(orphaned.begin(), orphaned.end());
  for (const auto& r : orphaned) {
    ext.push_back({next_index, r, 0.0, 0.0});
    usable.push_back(next_index);
    ++next_index;
  }
  return MeshTopology(std::move(pucs), std::move(links), std::move(ext), std::move(usable));
}

}  // namespace pmesh
