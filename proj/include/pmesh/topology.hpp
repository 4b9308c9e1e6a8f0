#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace pmesh {

// Calibrated defaults: a linear fit through 7.7 dB @ 2 PUCs and 10.5 dB @ 15 PUCs.
inline constexpr double kDefaultIlDb = -0.215;
inline constexpr double kDefaultFacetLossDb = 3.64;
inline constexpr double kDefaultCrosstalkDb = 25.0;
inline constexpr int kTopologyVersion = 1;

/// The four optical ports of a PUC. A1/A2 sit at the A end, B1/B2 at the B end.
/// Ports with the same digit lie on the same side of the waveguide pair, so the
/// bar state joins A1-B1 and A2-B2 while the cross state joins A1-B2 and A2-B1.
enum class PortSide : std::uint8_t { A1 = 0, A2 = 1, B1 = 2, B2 = 3 };

inline constexpr bool is_a_end(PortSide s) { return s == PortSide::A1 || s == PortSide::A2; }
inline constexpr int lane_of(PortSide s) { return static_cast<int>(s) & 1; }

std::string_view to_string(PortSide side);
std::optional<PortSide> parse_port_side(std::string_view text);

struct PortRef {
  int puc = -1;
  PortSide side = PortSide::A1;

  auto operator<=>(const PortRef&) const = default;
};

std::string to_string(const PortRef& port);

/// Operating state of a PUC. The coupling factor k is the fraction of power
/// that leaves through the cross output, so Bar behaves as k = 0 and Cross as k = 1.
class PucState {
 public:
  enum class Kind : std::uint8_t { Bar, Cross, TunableCoupler, Off };

  constexpr PucState() = default;

  static constexpr PucState bar() { return PucState(Kind::Bar, 0.0); }
  static constexpr PucState cross() { return PucState(Kind::Cross, 1.0); }
  static constexpr PucState off() { return PucState(Kind::Off, 0.0); }
  /// Throws std::invalid_argument unless 0 <= k <= 1.
  static PucState tunable(double k);

  constexpr Kind kind() const { return kind_; }
  /// Cross-port power fraction; Off reports 0.
  constexpr double cross_fraction() const { return k_; }
  constexpr bool is_off() const { return kind_ == Kind::Off; }

  bool operator==(const PucState&) const = default;

 private:
  constexpr PucState(Kind kind, double k) : kind_(kind), k_(k) {}

  Kind kind_ = Kind::Off;
  double k_ = 0.0;
};

std::string to_string(const PucState& state);

struct PucAttributes {
  double il_db = kDefaultIlDb;  ///< per-traversal transmission, dB (<= 0)
  double bul = 1.0;             ///< basic unit length, normalized
  double power_mw = 1.0;        ///< actuation power
  double crosstalk_db = kDefaultCrosstalkDb;
};

struct Puc {
  int id = 0;
  double il_db = kDefaultIlDb;
  double bul = 1.0;
  double power_mw = 1.0;
  double crosstalk_db = kDefaultCrosstalkDb;

  bool operator==(const Puc&) const = default;
};

/// Undirected waveguide joining two PUC ports. Stored with a < b.
struct Link {
  PortRef a;
  PortRef b;

  bool operator==(const Link&) const = default;
};

/// A PUC port exposed at the mesh boundary. (x, y) is the lattice vertex the port
/// sits on, in hexagon-circumradius units; it is informational only.
struct ExternalPort {
  int index = 0;
  PortRef port;
  double x = 0.0;
  double y = 0.0;

  bool operator==(const ExternalPort&) const = default;
};

struct Violation {
  std::string entity;  ///< e.g. "puc 3", "port 12", "link 7"
  std::string rule;    ///< short rule identifier, e.g. "port-exclusivity"
  std::string message;
};

/// Hardware model of a programmable hexagonal mesh. Immutable once constructed;
/// construction never validates (see validate_topology) so broken meshes can be
/// represented and diagnosed.
class MeshTopology {
 public:
  MeshTopology() = default;
  MeshTopology(std::vector<Puc> pucs, std::vector<Link> links,
               std::vector<ExternalPort> external_ports, std::vector<int> usable_ports);

  const std::vector<Puc>& pucs() const { return pucs_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<ExternalPort>& external_ports() const { return external_ports_; }
  const std::vector<int>& usable_ports() const { return usable_ports_; }

  std::size_t puc_count() const { return pucs_.size(); }
  const Puc& puc(int id) const;

  /// Port on the other end of the waveguide attached to `port`, if any.
  std::optional<PortRef> linked_port(const PortRef& port) const;
  /// External port number attached to `port`, if any.
  std::optional<int> external_index(const PortRef& port) const;
  /// Throws std::out_of_range for unknown port numbers.
  const ExternalPort& external_port(int index) const;
  bool has_external_port(int index) const { return external_by_index_.contains(index); }
  bool is_usable(int index) const { return usable_set_.contains(index); }

  /// Copy with the per-PUC attributes replaced; ids and connectivity are unchanged.
  MeshTopology with_pucs(std::vector<Puc> pucs) const;

  bool operator==(const MeshTopology& other) const;

 private:
  std::vector<Puc> pucs_;
  std::vector<Link> links_;
  std::vector<ExternalPort> external_ports_;
  std::vector<int> usable_ports_;

  std::map<int, std::size_t> puc_by_id_;
  std::map<PortRef, PortRef> partner_;
  std::map<PortRef, int> external_of_port_;
  std::map<int, std::size_t> external_by_index_;
  std::set<int> usable_set_;
};

/// Hexagonal lattice of hexagonal cells; every cell edge is one PUC and adjacent
/// cells share edge PUCs. Rows are laid out top to bottom; the first row holds
/// `cols` cells and each following row grows by one cell until the middle row,
/// then shrinks again, giving a hexagon-like outline. External ports are numbered
/// counter-clockwise along the boundary starting at the top-left corner. Ports on
/// the bottom-most vertices are not usable as I/O.
MeshTopology generate_hex_mesh(int rows, int cols, const PucAttributes& defaults = {});

/// PUC count produced by generate_hex_mesh(rows, cols) without building the mesh.
int hex_mesh_puc_count(int rows, int cols);

/// The shipped 72-PUC reference mesh: generate_hex_mesh(5, 3).
MeshTopology mesh72();
inline constexpr int kMesh72Rows = 5;
inline constexpr int kMesh72Cols = 3;

std::vector<Violation> validate_topology(const MeshTopology& topology);

/// Throws InvariantViolation naming the first violated rule.
void require_valid(const MeshTopology& topology);

/// Deterministic text form (JSON, sorted keys, 6-decimal floats).
std::string serialize_topology(const MeshTopology& topology);
/// Parses and validates. Throws ParseError or InvariantViolation.
MeshTopology parse_topology(std::string_view text);

MeshTopology load_topology(const std::filesystem::path& path);
void save_topology(const MeshTopology& topology, const std::filesystem::path& path);

/// Drops the given PUCs. Ports that lose their link partner become new external
/// ports (numbered after the existing ones, usable). Remaining PUCs are renumbered
/// densely in their original order.
MeshTopology remove_pucs(const MeshTopology& topology, const std::set<int>& puc_ids);

}  // namespace pmesh
