#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfm/layout_core.hpp"

namespace dfm {

enum class Implant { Nplus, Pplus };
std::string_view to_string(Implant i);

/// Which OD shapes a density query counts.
enum class ImplantFilter { Nplus, Pplus, Any };

enum class RingClass { None, Single, Double };
std::string_view to_string(RingClass c);

inline constexpr std::int64_t kDefaultWindowNm = 100000;
inline constexpr std::int64_t kDefaultMapStepNm = 10000;
/// Minimum NP/PP coverage of a ring frame for it to take that implant.
inline constexpr double kImplantCoverage = 0.99;

class ExtractionError : public Error {
 public:
  enum class Kind { AmbiguousImplant, NonUniformWidth, Overlap, MoreThanTwoRings, NoDevices, UnknownDevice };
  ExtractionError(Kind kind, std::string device_id, const std::string& what)
      : Error(device_id.empty() ? what : "device '" + device_id + "': " + what),
        kind_(kind),
        device_id_(std::move(device_id)) {}
  Kind kind() const { return kind_; }
  const std::string& device_id() const { return device_id_; }

 private:
  Kind kind_;
  std::string device_id_;
};

struct GuardRingInfo {
  Implant implant = Implant::Pplus;
  Rect inner{0, 0, 1, 1};
  Rect outer{0, 0, 1, 1};
  std::int64_t od_width = 0;
  friend bool operator==(const GuardRingInfo&, const GuardRingInfo&) = default;
};

struct DeviceContext {
  std::string device_id;
  DeviceKind kind = DeviceKind::NMOS;
  std::vector<GuardRingInfo> rings;  // innermost first
  RingClass ring_class = RingClass::None;
  std::int64_t sti_width = 0;        // 0 when no ring
  double d_nod = 0.0;
  double d_pod = 0.0;
};

/// OD annuli around the device, each made of four OD rects with uniform
/// frame width, ordered by inner opening area.
std::vector<GuardRingInfo> detect_guard_rings(const LayoutDb& db, const DeviceInstance& device);

/// Minimum of the four gaps between the active rect and the ring opening.
std::int64_t extract_sti_width(const DeviceInstance& device, const GuardRingInfo& ring);

/// OD covered by the filter's implant, clipped to a square window, over the
/// window area.
double window_density(const LayoutDb& db, ImplantFilter implant, std::pair<Coord, Coord> center,
                      std::int64_t window = kDefaultWindowNm);

/// Window-density samples on a grid of centres covering a region.
struct DensityMap {
  std::pair<Coord, Coord> origin;  // first (lower-left) sample centre
  std::int64_t step = 0;
  std::int64_t window = 0;
  std::size_t nx = 0, ny = 0;
  std::vector<double> values;  // row-major, row 0 at origin.y

  double at(std::size_t ix, std::size_t iy) const { return values[iy * nx + ix]; }
};

/// floor(extent/step)+1 centres per axis, centred within the region.
DensityMap density_map(const LayoutDb& db, ImplantFilter implant, const Rect& region,
                       std::int64_t step = kDefaultMapStepNm, std::int64_t window = kDefaultWindowNm);

std::string density_map_csv(const DensityMap& m);
/// ASCII "P2" greyscale, value = round(density*255), top row = highest y.
std::string density_map_pgm(const DensityMap& m);

DeviceContext extract_device_context(const LayoutDb& db, const DeviceInstance& device,
                                     std::int64_t window = kDefaultWindowNm);

}  // namespace dfm
