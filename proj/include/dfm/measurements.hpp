#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfm/layout_core.hpp"

namespace dfm {

enum class RingConfig { Double, Single1X, Single2X };
enum class DummyConfig { NplusOD, PplusOD, Mixed };

std::string_view to_string(RingConfig r);
std::string_view to_string(DummyConfig d);
std::optional<RingConfig> parse_ring_config(std::string_view s);
std::optional<DummyConfig> parse_dummy_config(std::string_view s);

/// Canonical lower-case fixture name, e.g. "nmos_single2x_npod".
std::string fixture_name(DeviceKind kind, RingConfig ring, DummyConfig dummy);

struct MeasurementRow {
  DeviceKind kind = DeviceKind::NMOS;
  RingConfig ring = RingConfig::Double;
  DummyConfig dummy = DummyConfig::NplusOD;
  double simulated_ratio = 1.0;
  double measured_ratio = 1.0;

  std::string key() const { return fixture_name(kind, ring, dummy); }
};

class CsvError : public Error {
 public:
  enum class Kind { BadHeader, BadEnum, BadNumber, DuplicateKey, BadRow };
  CsvError(Kind kind, int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), kind_(kind), line_(line) {}
  Kind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  Kind kind_;
  int line_;
};

/// Header `kind,ring,dummy,simulated_ratio,measured_ratio`; '#' lines and blank
/// lines are skipped.
std::vector<MeasurementRow> parse_measurements_csv(std::string_view text);

}  // namespace dfm
