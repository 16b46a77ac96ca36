#include "dfm/measurements.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace dfm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double ratio(std::string_view field, int line, const char* name) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw CsvError(CsvError::Kind::BadNumber, line, std::string(name) + " '" + std::string(field) + "' is not a number");
  }
  if (!(v > 0)) throw CsvError(CsvError::Kind::BadNumber, line, std::string(name) + " must be positive");
  return v;
}

}  // namespace

std::string_view to_string(RingConfig r) {
  switch (r) {
    case RingConfig::Double: return "Double";
    case RingConfig::Single1X: return "Single1X";
    case RingConfig::Single2X: return "Single2X";
  }
  return "?";
}

std::string_view to_string(DummyConfig d) {
  switch (d) {
    case DummyConfig::NplusOD: return "NplusOD";
    case DummyConfig::PplusOD: return "PplusOD";
    case DummyConfig::Mixed: return "Mixed";
  }
  return "?";
}

std::optional<RingConfig> parse_ring_config(std::string_view s) {
  for (auto r : {RingConfig::Double, RingConfig::Single1X, RingConfig::Single2X}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

std::optional<DummyConfig> parse_dummy_config(std::string_view s) {
  for (auto d : {DummyConfig::NplusOD, DummyConfig::PplusOD, DummyConfig::Mixed}) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

std::string fixture_name(DeviceKind kind, RingConfig ring, DummyConfig dummy) {
  std::string out = kind == DeviceKind::NMOS ? "nmos_" : "pmos_";
  switch (ring) {
    case RingConfig::Double: out += "double_"; break;
    case RingConfig::Single1X: out += "single1x_"; break;
    case RingConfig::Single2X: out += "single2x_"; break;
  }
  switch (dummy) {
    case DummyConfig::NplusOD: out += "npod"; break;
    case DummyConfig::PplusOD: out += "ppod"; break;
    case DummyConfig::Mixed: out += "mixed"; break;
  }
  return out;
}

std::vector<MeasurementRow> parse_measurements_csv(std::string_view text) {
  std::vector<MeasurementRow> rows;
  std::set<std::string> keys;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++line;
    auto l = trim(raw);
    if (l.empty() || l.front() == '#') continue;
    auto fields = split(l);
    if (!header_seen) {
      static const std::vector<std::string_view> expected = {"kind", "ring", "dummy", "simulated_ratio",
                                                             "measured_ratio"};
      if (fields != expected) {
        throw CsvError(CsvError::Kind::BadHeader, line,
                       "expected header 'kind,ring,dummy,simulated_ratio,measured_ratio'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 5) {
      throw CsvError(CsvError::Kind::BadRow, line, "expected 5 fields, got " + std::to_string(fields.size()));
    }
    MeasurementRow row;
    auto kind = parse_device_kind(fields[0]);
    if (!kind) throw CsvError(CsvError::Kind::BadEnum, line, "kind '" + std::string(fields[0]) + "' not NMOS/PMOS");
    auto ring = parse_ring_config(fields[1]);
    if (!ring) {
      throw CsvError(CsvError::Kind::BadEnum, line,
                     "ring '" + std::string(fields[1]) + "' not Double/Single1X/Single2X");
    }
    auto dummy = parse_dummy_config(fields[2]);
    if (!dummy) {
      throw CsvError(CsvError::Kind::BadEnum, line,
                     "dummy '" + std::string(fields[2]) + "' not NplusOD/PplusOD/Mixed");
    }
    row.kind = *kind;
    row.ring = *ring;
    row.dummy = *dummy;
    row.simulated_ratio = ratio(fields[3], line, "simulated_ratio");
    row.measured_ratio = ratio(fields[4], line, "measured_ratio");
    if (!keys.insert(row.key()).second) {
      throw CsvError(CsvError::Kind::DuplicateKey, line, "duplicate row " + row.key());
    }
    rows.push_back(row);
  }
  if (!header_seen) throw CsvError(CsvError::Kind::BadHeader, line, "missing header row");
  return rows;
}

}  // namespace dfm
