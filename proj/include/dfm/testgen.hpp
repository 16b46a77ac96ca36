#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dfm/extraction.hpp"
#include "dfm/measurements.hpp"

namespace dfm {

class ConfigError : public Error {
 public:
  enum class Kind { Invalid, Infeasible };
  ConfigError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Current-mirror test structure. Lengths in nm.
struct TestStructureConfig {
  DeviceKind kind = DeviceKind::NMOS;
  RingConfig ring = RingConfig::Double;
  DummyConfig dummy = DummyConfig::NplusOD;
  std::int64_t finger_w = 1000;
  std::int64_t finger_l = 30;
  int fingers = 8;
  std::int64_t ring_gap = 1000;
  std::int64_t ring_odw_1x = 140;
  std::int64_t ring_odw_2x = 280;
  std::int64_t double_ring_gap = 400;
  double fill_target_density = 0.55;
  std::int64_t window = 100000;

  std::string name() const { return fixture_name(kind, ring, dummy); }
  /// Throws ConfigError::Invalid.
  void validate() const;
};

// Fixed layout rules of the generator.
inline constexpr std::int64_t kSourceDrainLength = 200;
inline constexpr std::int64_t kGateEndcap = 100;
inline constexpr std::int64_t kLevel1Spacing = 1000;
inline constexpr std::int64_t kTileSize = 2000;
inline constexpr std::int64_t kMinTileSpacing = 200;
inline constexpr std::int64_t kTileClearance = 1000;

/// Implant of the guard ring that protects a device of this kind.
Implant protective_implant(DeviceKind kind);

/// Level-2 fill layout decided for a config.
struct FillPlan {
  std::int64_t pitch = 0;
  std::size_t capacity = 0;     // candidate tile sites at `pitch`
  std::size_t tiles = 0;        // tiles placed
  Area fixed_od_area = 0;       // device + level-1 OD inside the window
  Area window_area = 0;
};

FillPlan plan_fill(const TestStructureConfig& cfg);

/// Mirror (ABBA fingers) + guard ring(s) + level-1 replicas + level-2 tiles,
/// annotated with devices "MA" and "MB". Throws ConfigError.
LayoutDb generate_test_structure(const TestStructureConfig& cfg);

/// Guard ring(s) of `cfg` alone: OD frame rects plus their implant cover.
LayoutDb generate_guard_ring_fixture(const TestStructureConfig& cfg);

/// The ten Table configurations (five PMOS, five NMOS) in table order.
std::vector<TestStructureConfig> paper_fixture_configs();

enum class SweepAxis { RingOdw, RingGap, FillDensity };

/// One fixture per value with every other parameter held. Lengths in nm.
std::vector<std::pair<double, LayoutDb>> sweep(const TestStructureConfig& base, SweepAxis axis,
                                               const std::vector<double>& values);

/// JSON config: {kind, ring, dummy, finger_w, ...}; absent fields keep defaults.
TestStructureConfig parse_config_json(std::string_view text);
std::string write_config_json(const TestStructureConfig& cfg);

}  // namespace dfm
