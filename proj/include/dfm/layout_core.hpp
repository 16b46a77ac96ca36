#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dfm {

/// Database coordinate in integer nanometres (GDSII 4-byte range).
using Coord = std::int32_t;
/// Exact area in nm^2. Exact as long as no single rect extent exceeds ~3e9 nm.
using Area = std::int64_t;

inline constexpr std::int64_t kCoordMax = 2147483647;
inline constexpr std::int64_t kCoordMin = -2147483648LL;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Axis-aligned, strictly non-degenerate rectangle. Half-open semantics are
/// irrelevant for area math; edges are shared when rects abut.
class Rect {
 public:
  Rect(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1);

  Coord x0() const { return x0_; }
  Coord y0() const { return y0_; }
  Coord x1() const { return x1_; }
  Coord y1() const { return y1_; }
  std::int64_t width() const { return std::int64_t{x1_} - x0_; }
  std::int64_t height() const { return std::int64_t{y1_} - y0_; }

  bool contains(const Rect& o) const {
    return x0_ <= o.x0_ && y0_ <= o.y0_ && o.x1_ <= x1_ && o.y1_ <= y1_;
  }
  /// Positive-area overlap.
  bool overlaps(const Rect& o) const {
    return x0_ < o.x1_ && o.x0_ < x1_ && y0_ < o.y1_ && o.y0_ < y1_;
  }
  Rect translated(std::int64_t dx, std::int64_t dy) const {
    return Rect(std::int64_t{x0_} + dx, std::int64_t{y0_} + dy, std::int64_t{x1_} + dx,
                std::int64_t{y1_} + dy);
  }
  Rect expanded(std::int64_t d) const {
    return Rect(std::int64_t{x0_} - d, std::int64_t{y0_} - d, std::int64_t{x1_} + d,
                std::int64_t{y1_} + d);
  }

  friend bool operator==(const Rect&, const Rect&) = default;
  friend auto operator<=>(const Rect&, const Rect&) = default;

 private:
  Coord x0_, y0_, x1_, y1_;
};

/// Intersection with positive area, if any.
std::optional<Rect> intersect(const Rect& a, const Rect& b);

/// Floor of the rect midpoint on each axis.
std::pair<Coord, Coord> center_of(const Rect& r);

/// Square window of side `size` whose lower-left corner is center - size/2
/// (integer floor division).
Rect square_window(std::pair<Coord, Coord> center, std::int64_t size);

Area rect_area(const Rect& r);
Area union_area(std::span<const Rect> rects);
Area clip_area(std::span<const Rect> rects, const Rect& window);
/// Area of union(a) ∩ union(b).
Area intersection_area(std::span<const Rect> a, std::span<const Rect> b);
/// Pairwise positive-area intersections a_i ∩ b_j. Their union is
/// union(a) ∩ union(b); members may overlap each other.
std::vector<Rect> pairwise_intersections(std::span<const Rect> a, std::span<const Rect> b);

enum class LayerName { OD, PO, NP, PP, NW };

inline constexpr std::array<LayerName, 5> kAllLayers = {LayerName::OD, LayerName::PO, LayerName::NP,
                                                        LayerName::PP, LayerName::NW};

std::string_view to_string(LayerName l);
std::optional<LayerName> parse_layer_name(std::string_view s);

struct GdsLayer {
  int layer = 0;
  int datatype = 0;
  friend auto operator<=>(const GdsLayer&, const GdsLayer&) = default;
};

/// Bijective LayerName <-> (layer, datatype) map.
class LayerMap {
 public:
  /// OD=(6,0), PO=(7,0), NP=(11,0), PP=(12,0), NW=(3,0).
  static LayerMap defaults();

  void set(LayerName name, GdsLayer gds);
  /// Applies all entries at once; throws if the result is not bijective.
  LayerMap with_overrides(const std::map<LayerName, GdsLayer>& entries) const;
  GdsLayer gds(LayerName name) const;
  std::optional<LayerName> lookup(GdsLayer gds) const;

  friend bool operator==(const LayerMap&, const LayerMap&) = default;

 private:
  std::map<LayerName, GdsLayer> forward_;
};

/// Text map: one "NAME layer datatype" entry per line, '#' comments.
/// Entries override the defaults.
LayerMap parse_layer_map(std::string_view text);

struct Shape {
  LayerName layer;
  Rect rect;
  friend bool operator==(const Shape&, const Shape&) = default;
  friend auto operator<=>(const Shape&, const Shape&) = default;
};

struct Cell {
  std::string name;
  std::vector<Shape> shapes;
  friend bool operator==(const Cell&, const Cell&) = default;
};

enum class DeviceKind { NMOS, PMOS };
std::string_view to_string(DeviceKind k);
std::optional<DeviceKind> parse_device_kind(std::string_view s);

struct DeviceInstance {
  std::string id;
  DeviceKind kind = DeviceKind::NMOS;
  std::vector<Rect> gate_rects;
  Rect active_rect{0, 0, 1, 1};
  int fingers = 1;
  friend bool operator==(const DeviceInstance&, const DeviceInstance&) = default;
};

/// Flat layout: named cells of layered rects plus device annotations.
/// Shapes of every cell live in one coordinate space (no transforms).
class LayoutDb {
 public:
  LayoutDb() = default;

  double db_unit() const { return db_unit_; }
  void set_db_unit(double meters);

  const LayerMap& layer_map() const { return layer_map_; }
  void set_layer_map(LayerMap m) { layer_map_ = std::move(m); }

  const std::vector<Cell>& cells() const { return cells_; }
  Cell& add_cell(std::string name);
  const Cell* find_cell(std::string_view name) const;
  void add_shape(std::string_view cell, LayerName layer, const Rect& r);

  const std::vector<DeviceInstance>& devices() const { return devices_; }
  void add_device(DeviceInstance d);

  /// All rects on `layer` across every cell, in insertion order.
  std::vector<Rect> rects_on(LayerName layer) const;
  std::optional<Rect> bbox() const;
  LayoutDb translated(std::int64_t dx, std::int64_t dy) const;

  friend bool operator==(const LayoutDb&, const LayoutDb&) = default;

 private:
  double db_unit_ = 1e-9;
  LayerMap layer_map_ = LayerMap::defaults();
  std::vector<Cell> cells_;
  std::vector<DeviceInstance> devices_;
};

/// Cell names and per-cell sorted shape multisets match.
bool same_geometry(const LayoutDb& a, const LayoutDb& b);

}  // namespace dfm
