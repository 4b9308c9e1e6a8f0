#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pmesh/errors.hpp"
#include "pmesh/topology.hpp"

namespace pmesh {

namespace {

using nlohmann::json;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string quoted(const PortRef& r) { return "\"" + to_string(r) + "\""; }

std::pair<int, int> line_col(std::string_view text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + "." + key + ": missing field");
  return *it;
}

double number(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) throw ParseError(where + "." + key + ": expected a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ParseError(where + ": expected an integer");
  return v.get<int>();
}

PortRef port_ref(const json& v, const std::string& where) {
  if (!v.is_string()) throw ParseError(where + ": expected a port string like \"12:A1\"");
  const auto s = v.get<std::string>();
  const auto colon = s.find(':');
  std::optional<PortSide> side;
  int puc = -1;
  if (colon != std::string::npos) {
    side = parse_port_side(std::string_view(s).substr(colon + 1));
    try {
      std::size_t used = 0;
      puc = std::stoi(s.substr(0, colon), &used);
      if (used != colon) side.reset();
    } catch (const std::exception&) {
      side.reset();
    }
  }
  if (!side) throw ParseError(where + ": malformed port \"" + s + "\"");
  return {puc, *side};
}

const json& array(const json& root, const char* key) {
  const json& v = field(root, key, "topology");
  if (!v.is_array()) throw ParseError(std::string(key) + ": expected an array");
  return v;
}

}  // namespace

std::string serialize_topology(const MeshTopology& t) {
  std::ostringstream os;
  os << "{\n  \"external_ports\": [";
  for (std::size_t i = 0; i < t.external_ports().size(); ++i) {
    const auto& e = t.external_ports()[i];
    os << (i ? ",\n" : "\n") << "    {\"index\": " << e.index << ", \"port\": " << quoted(e.port)
       << ", \"x\": " << fixed6(e.x) << ", \"y\": " << fixed6(e.y) << "}";
  }
  os << (t.external_ports().empty() ? "" : "\n  ") << "],\n  \"links\": [";
  for (std::size_t i = 0; i < t.links().size(); ++i) {
    const auto& l = t.links()[i];
    os << (i ? ",\n" : "\n") << "    [" << quoted(l.a) << ", " << quoted(l.b) << "]";
  }
  os << (t.links().empty() ? "" : "\n  ") << "],\n  \"pucs\": [";
  for (std::size_t i = 0; i < t.pucs().size(); ++i) {
    const auto& p = t.pucs()[i];
    os << (i ? ",\n" : "\n") << "    {\"bul\": " << fixed6(p.bul)
       << ", \"crosstalk_db\": " << fixed6(p.crosstalk_db) << ", \"id\": " << p.id
       << ", \"il_db\": " << fixed6(p.il_db) << ", \"power_mw\": " << fixed6(p.power_mw) << "}";
  }
  os << (t.pucs().empty() ? "" : "\n  ") << "],\n  \"topology_version\": " << kTopologyVersion
     << ",\n  \"usable_ports\": [";
  for (std::size_t i = 0; i < t.usable_ports().size(); ++i) {
    os << (i ? ", " : "") << t.usable_ports()[i];
  }
  os << "]\n}\n";
  return os.str();
}

MeshTopology parse_topology(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                     e.what());
  }
  const int version = integer(field(root, "topology_version", "topology"), "topology_version");
  if (version != kTopologyVersion) {
    throw ParseError("topology_version: unsupported version " + std::to_string(version));
  }

  std::vector<Puc> pucs;
  const json& jp = array(root, "pucs");
  for (std::size_t i = 0; i < jp.size(); ++i) {
    const std::string where = "pucs[" + std::to_string(i) + "]";
    Puc p;
    p.id = integer(field(jp[i], "id", where), where + ".id");
    p.il_db = number(jp[i], "il_db", where);
    p.bul = number(jp[i], "bul", where);
    p.power_mw = number(jp[i], "power_mw", where);
    p.crosstalk_db = number(jp[i], "crosstalk_db", where);
    pucs.push_back(p);
  }

  std::vector<Link> links;
  const json& jl = array(root, "links");
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const std::string where = "links[" + std::to_string(i) + "]";
    if (!jl[i].is_array() || jl[i].size() != 2) {
      throw ParseError(where + ": expected a pair of ports");
    }
    PortRef a = port_ref(jl[i][0], where + "[0]");
    PortRef b = port_ref(jl[i][1], where + "[1]");
    if (b < a) std::swap(a, b);
    links.push_back({a, b});
  }

  std::vector<ExternalPort> ext;
  const json& je = array(root, "external_ports");
  for (std::size_t i = 0; i < je.size(); ++i) {
    const std::string where = "external_ports[" + std::to_string(i) + "]";
    ExternalPort e;
    e.index = integer(field(je[i], "index", where), where + ".index");
    e.port = port_ref(field(je[i], "port", where), where + ".port");
    e.x = number(je[i], "x", where);
    e.y = number(je[i], "y", where);
    ext.push_back(e);
  }

  std::vector<int> usable;
  const json& ju = array(root, "usable_ports");
  for (std::size_t i = 0; i < ju.size(); ++i) {
    usable.push_back(integer(ju[i], "usable_ports[" + std::to_string(i) + "]"));
  }

  MeshTopology topo(std::move(pucs), std::move(links), std::move(ext), std::move(usable));
  require_valid(topo);
  return topo;
}

MeshTopology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_topology(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_topology(const MeshTopology& topology, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << serialize_topology(topology);
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace pmesh
