#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "pmesh/topology.hpp"

namespace pmesh {

namespace {

// Lattice vertex in integer units: x counts half cell widths (sqrt(3)/2), y counts
// half circumradii (1/2). Cells are pointy-top with circumradius 1.
struct Vertex {
  int x = 0;
  int y = 0;
  auto operator<=>(const Vertex&) const = default;
};

double real_x(const Vertex& v) { return v.x * std::numbers::sqrt3 / 2.0; }
double real_y(const Vertex& v) { return v.y / 2.0; }

// Port positions are stored at the serialization precision so save/load round-trips.
double six_decimals(double v) { return std::round(v * 1e6) / 1e6; }

constexpr Vertex kCorner[6] = {{0, 2}, {1, 1}, {1, -1}, {0, -2}, {-1, -1}, {-1, 1}};

std::vector<Vertex> cell_centers(int rows, int cols) {
  std::vector<int> width(rows);
  for (int r = 0; r < rows; ++r) width[r] = cols + std::min(r, rows - 1 - r);
  std::vector<Vertex> centers;
  int x0 = 0;
  for (int r = 0; r < rows; ++r) {
    if (r > 0) x0 += width[r] > width[r - 1] ? -1 : 1;
    for (int i = 0; i < width[r]; ++i) centers.push_back({x0 + 2 * i, -3 * r});
  }
  return centers;
}

struct EdgeInfo {
  Vertex a;  // lexicographically smaller end
  Vertex b;
  std::vector<Vertex> cells;
};

std::map<std::pair<Vertex, Vertex>, EdgeInfo> collect_edges(const std::vector<Vertex>& centers) {
  std::map<std::pair<Vertex, Vertex>, EdgeInfo> edges;
  for (const auto& c : centers) {
    for (int k = 0; k < 6; ++k) {
      Vertex p{c.x + kCorner[k].x, c.y + kCorner[k].y};
      Vertex q{c.x + kCorner[(k + 1) % 6].x, c.y + kCorner[(k + 1) % 6].y};
      if (q < p) std::swap(p, q);
      auto& e = edges[{p, q}];
      e.a = p;
      e.b = q;
      e.cells.push_back(c);
    }
  }
  return edges;
}

void check_shape(int rows, int cols) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("generate_hex_mesh: rows and cols must be >= 1");
  }
}

}  // namespace

int hex_mesh_puc_count(int rows, int cols) {
  check_shape(rows, cols);
  return static_cast<int>(collect_edges(cell_centers(rows, cols)).size());
}

MeshTopology generate_hex_mesh(int rows, int cols, const PucAttributes& defaults) {
  check_shape(rows, cols);
  const auto edge_map = collect_edges(cell_centers(rows, cols));

  // PUC ids run top to bottom, then left to right, by edge midpoint.
  std::vector<const EdgeInfo*> edges;
  for (const auto& [key, info] : edge_map) edges.push_back(&info);
  std::sort(edges.begin(), edges.end(), [](const EdgeInfo* l, const EdgeInfo* r) {
    const int ly = l->a.y + l->b.y, ry = r->a.y + r->b.y;
    if (ly != ry) return ly > ry;
    return l->a.x + l->b.x < r->a.x + r->b.x;
  });

  struct Incidence {
    int puc;
    bool at_a;
    double angle;
  };
  std::map<Vertex, std::vector<Incidence>> incident;
  std::vector<Puc> pucs;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = *edges[i];
    const int id = static_cast<int>(i);
    pucs.push_back({id, defaults.il_db, defaults.bul, defaults.power_mw, defaults.crosstalk_db});
    const double dx = real_x(e.b) - real_x(e.a);
    const double dy = real_y(e.b) - real_y(e.a);
    incident[e.a].push_back({id, true, std::atan2(dy, dx)});
    incident[e.b].push_back({id, false, std::atan2(-dy, -dx)});
  }

  // Around a vertex, the port of an edge facing the counter-clockwise neighbour sector
  // is its lane-1 port at an A end and its lane-2 port at a B end; the clockwise-facing
  // port is the other one.
  auto ccw_port = [](const Incidence& in) {
    return PortRef{in.puc, in.at_a ? PortSide::A1 : PortSide::B2};
  };
  auto cw_port = [](const Incidence& in) {
    return PortRef{in.puc, in.at_a ? PortSide::A2 : PortSide::B1};
  };

  std::vector<Link> links;
  std::map<Vertex, std::vector<PortRef>> open_ports;  // in counter-clockwise order
  for (auto& [v, list] : incident) {
    std::sort(list.begin(), list.end(),
              [](const Incidence& l, const Incidence& r) { return l.angle < r.angle; });
    const std::size_t deg = list.size();
    for (std::size_t i = 0; i < deg; ++i) {
      const auto& from = list[i];
      const auto& to = list[(i + 1) % deg];
      double gap = to.angle - from.angle;
      if (gap <= 0) gap += 2 * std::numbers::pi;
      if (gap < 2 * std::numbers::pi / 3 + 1e-6) {
        PortRef p = ccw_port(from), q = cw_port(to);
        if (q < p) std::swap(p, q);
        links.push_back({p, q});
      } else {
        open_ports[v].push_back(ccw_port(from));
        open_ports[v].push_back(cw_port(to));
      }
    }
  }
  std::sort(links.begin(), links.end(), [](const Link& l, const Link& r) {
    return std::tie(l.a, l.b) < std::tie(r.a, r.b);
  });

  // Walk the outer boundary counter-clockwise (interior on the left) from the
  // top-left corner to number the external ports.
  std::map<Vertex, Vertex> next;
  for (const auto* e : edges) {
    if (e->cells.size() != 1) continue;
    const Vertex& c = e->cells.front();
    const double ux = real_x(e->b) - real_x(e->a), uy = real_y(e->b) - real_y(e->a);
    const double cx = real_x(c) - real_x(e->a), cy = real_y(c) - real_y(e->a);
    if (ux * cy - uy * cx > 0) {
      next[e->a] = e->b;
    } else {
      next[e->b] = e->a;
    }
  }
  Vertex start = next.begin()->first;
  for (const auto& [v, w] : next) {
    if (v.y > start.y || (v.y == start.y && v.x < start.x)) start = v;
  }
  int min_y = start.y;
  for (const auto& [v, w] : next) min_y = std::min(min_y, v.y);

  std::vector<ExternalPort> external;
  std::vector<int> usable;
  Vertex v = start;
  do {
    if (auto it = open_ports.find(v); it != open_ports.end()) {
      for (const auto& port : it->second) {
        const int index = static_cast<int>(external.size());
        external.push_back({index, port, six_decimals(real_x(v)), six_decimals(real_y(v))});
        if (v.y != min_y) usable.push_back(index);
      }
    }
    v = next.at(v);
  } while (!(v == start));

  return MeshTopology(std::move(pucs), std::move(links), std::move(external), std::move(usable));
}

MeshTopology mesh72() { return generate_hex_mesh(kMesh72Rows, kMesh72Cols); }

}  // namespace pmesh
