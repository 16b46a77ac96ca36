#include "dfm/testgen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>


namespace dfm {

namespace {

using CK = ConfigError::Kind;

struct Frame {
  Implant implant;
  std::vector<Rect> pieces;
};

// Placement shared by the full structure and the fill planner.
struct Floorplan {
  Rect active{0, 0, 1, 1};
  std::vector<Rect> gates;
  std::vector<Frame> rings;
  std::vector<Rect> replicas;        // level-1 OD footprints
  std::vector<Rect> replica_gates;
  Rect keepout{0, 0, 1, 1};
  Rect window{0, 0, 1, 1};
};

LayerName implant_layer(Implant i) { return i == Implant::Nplus ? LayerName::NP : LayerName::PP; }

Implant opposite(Implant i) { return i == Implant::Nplus ? Implant::Pplus : Implant::Nplus; }

// Four frame rects: full-width bottom and top, sides in between.
std::vector<Rect> frame_pieces(const Rect& inner, std::int64_t w) {
  Rect outer = inner.expanded(w);
  return {Rect(outer.x0(), outer.y0(), outer.x1(), inner.y0()), Rect(outer.x0(), inner.y1(), outer.x1(), outer.y1()),
          Rect(outer.x0(), inner.y0(), inner.x0(), inner.y1()), Rect(inner.x1(), inner.y0(), outer.x1(), inner.y1())};
}

std::vector<Frame> ring_frames(const TestStructureConfig& cfg, const Rect& active) {
  Rect inner = active.expanded(cfg.ring_gap);
  Implant prot = protective_implant(cfg.kind);
  switch (cfg.ring) {
    case RingConfig::Single1X: return {{prot, frame_pieces(inner, cfg.ring_odw_1x)}};
    case RingConfig::Single2X: return {{prot, frame_pieces(inner, cfg.ring_odw_2x)}};
    case RingConfig::Double: {
      Rect second = inner.expanded(cfg.ring_odw_2x + cfg.double_ring_gap);
      return {{prot, frame_pieces(inner, cfg.ring_odw_2x)}, {opposite(prot), frame_pieces(second, cfg.ring_odw_2x)}};
    }
  }
  return {};
}

std::vector<Rect> finger_gates(const Rect& active, const TestStructureConfig& cfg) {
  std::vector<Rect> gates;
  for (int i = 0; i < cfg.fingers; ++i) {
    std::int64_t gx = std::int64_t{active.x0()} + kSourceDrainLength + i * (cfg.finger_l + kSourceDrainLength);
    gates.emplace_back(gx, std::int64_t{active.y0()} - kGateEndcap, gx + cfg.finger_l,
                       std::int64_t{active.y1()} + kGateEndcap);
  }
  return gates;
}

Floorplan floorplan(const TestStructureConfig& cfg) {
  Floorplan fp;
  std::int64_t width = cfg.fingers * (cfg.finger_l + kSourceDrainLength) + kSourceDrainLength;
  std::int64_t x0 = -width / 2, y0 = -cfg.finger_w / 2;
  fp.active = Rect(x0, y0, x0 + width, y0 + cfg.finger_w);
  fp.gates = finger_gates(fp.active, cfg);
  fp.rings = ring_frames(cfg, fp.active);

  // Level-1 replicas sit beyond the widest ring any RingConfig could draw,
  // so ring choice never moves them.
  std::int64_t envelope =
      cfg.ring_gap + std::max({cfg.ring_odw_1x, cfg.ring_odw_2x, 2 * cfg.ring_odw_2x + cfg.double_ring_gap});
  for (int side : {-1, +1}) {
    for (int k = 1; k <= 2; ++k) {
      // Near edge sits envelope + spacing beyond the active edge.
      std::int64_t dx = side * (width + envelope + kLevel1Spacing + (k - 1) * (width + kLevel1Spacing));
      Rect rep = fp.active.translated(dx, 0);
      fp.replicas.push_back(rep);
      for (const auto& g : fp.gates) fp.replica_gates.push_back(g.translated(dx, 0));
    }
  }

  Rect ring_env = fp.active.expanded(envelope);
  std::int64_t kx0 = ring_env.x0(), kx1 = ring_env.x1();
  for (const auto& r : fp.replicas) {
    kx0 = std::min<std::int64_t>(kx0, r.x0());
    kx1 = std::max<std::int64_t>(kx1, r.x1());
  }
  fp.keepout = Rect(kx0, ring_env.y0(), kx1, ring_env.y1()).expanded(kTileClearance);
  fp.window = square_window(center_of(fp.active), cfg.window);
  return fp;
}

struct TileSites {
  std::int64_t pitch = 0;
  std::vector<Rect> sites;
};

TileSites tile_sites(const Floorplan& fp, std::int64_t pitch) {
  TileSites out{pitch, {}};
  const Rect& w = fp.window;
  std::int64_t per_axis = w.width() / pitch;
  if (per_axis == 0) return out;
  std::int64_t offset = (w.width() - per_axis * pitch) / 2 + (pitch - kTileSize) / 2;
  for (std::int64_t j = 0; j < per_axis; ++j) {
    for (std::int64_t i = 0; i < per_axis; ++i) {
      std::int64_t x = w.x0() + offset + i * pitch;
      std::int64_t y = w.y0() + offset + j * pitch;
      Rect t(x, y, x + kTileSize, y + kTileSize);
      if (!t.overlaps(fp.keepout)) out.sites.push_back(t);
    }
  }
  return out;
}

struct Fill {
  FillPlan plan;
  std::vector<Rect> tiles;
};

Fill solve_fill(const TestStructureConfig& cfg, const Floorplan& fp) {
  Fill f;
  FillPlan& plan = f.plan;
  plan.window_area = rect_area(fp.window);
  std::vector<Rect> fixed{fp.active};
  fixed.insert(fixed.end(), fp.replicas.begin(), fp.replicas.end());
  plan.fixed_od_area = clip_area(fixed, fp.window);

  double needed = cfg.fill_target_density * static_cast<double>(plan.window_area) - static_cast<double>(plan.fixed_od_area);
  auto tile_area = static_cast<double>(kTileSize * kTileSize);
  std::size_t n = needed > 0 ? static_cast<std::size_t>(std::llround(needed / tile_area)) : 0;
  plan.tiles = n;

  const std::int64_t min_pitch = kTileSize + kMinTileSpacing;
  if (n == 0) {
    plan.pitch = min_pitch;
    return f;
  }
  Area blocked = 0;
  if (auto k = intersect(fp.keepout, fp.window)) blocked = rect_area(*k);
  double avail = static_cast<double>(plan.window_area - blocked);
  auto pitch = std::max<std::int64_t>(min_pitch, static_cast<std::int64_t>(std::floor(std::sqrt(avail / n))));
  TileSites sites = tile_sites(fp, pitch);
  while (sites.sites.size() < n && pitch > min_pitch) {
    pitch = std::max(min_pitch, pitch - 10);
    sites = tile_sites(fp, pitch);
  }
  plan.pitch = pitch;
  plan.capacity = sites.sites.size();
  if (sites.sites.size() < n) {
    double max_density = (static_cast<double>(plan.fixed_od_area) + plan.capacity * tile_area) / plan.window_area;
    std::ostringstream os;
    os << "fill_target_density " << cfg.fill_target_density << " unreachable with " << kTileSize
       << " nm tiles at minimum pitch " << min_pitch << " nm; max achievable " << max_density;
    throw ConfigError(CK::Infeasible, os.str());
  }
  // Spread n picks evenly across the candidate sites.
  for (std::size_t i = 0; i < n; ++i) f.tiles.push_back(sites.sites[i * sites.sites.size() / n]);
  return f;
}

void add_frames(LayoutDb& db, const std::string& cell, const std::vector<Frame>& frames) {
  for (const auto& fr : frames) {
    for (const auto& p : fr.pieces) db.add_shape(cell, LayerName::OD, p);
    for (const auto& p : fr.pieces) db.add_shape(cell, implant_layer(fr.implant), p);
  }
}

}  // namespace

void TestStructureConfig::validate() const {
  auto positive = [](std::int64_t v, const char* name) {
    if (v <= 0) throw ConfigError(CK::Invalid, std::string(name) + " must be > 0");
  };
  positive(finger_w, "finger_w");
  positive(finger_l, "finger_l");
  positive(ring_gap, "ring_gap");
  positive(ring_odw_1x, "ring_odw_1x");
  positive(ring_odw_2x, "ring_odw_2x");
  positive(double_ring_gap, "double_ring_gap");
  positive(window, "window");
  if (fingers < 2 || fingers % 2) throw ConfigError(CK::Invalid, "fingers must be even and >= 2");
  if (!(fill_target_density > 0.5) || fill_target_density > 1.0) {
    std::ostringstream os;
    os << "fill_target_density " << fill_target_density << " invalid: total OD fill density must be over 50%";
    throw ConfigError(CK::Invalid, os.str());
  }
}

Implant protective_implant(DeviceKind kind) { return kind == DeviceKind::NMOS ? Implant::Pplus : Implant::Nplus; }

FillPlan plan_fill(const TestStructureConfig& cfg) {
  cfg.validate();
  auto fp = floorplan(cfg);
  return solve_fill(cfg, fp).plan;
}

LayoutDb generate_test_structure(const TestStructureConfig& cfg) {
  cfg.validate();
  auto fp = floorplan(cfg);
  auto fill = solve_fill(cfg, fp);
  const std::string cell = cfg.name();
  const LayerName dev_implant = cfg.kind == DeviceKind::NMOS ? LayerName::NP : LayerName::PP;

  LayoutDb db;
  db.add_cell(cell);
  db.add_shape(cell, LayerName::OD, fp.active);
  db.add_shape(cell, dev_implant, fp.active);
  for (const auto& g : fp.gates) db.add_shape(cell, LayerName::PO, g);
  if (cfg.kind == DeviceKind::PMOS) db.add_shape(cell, LayerName::NW, fp.active.expanded(cfg.ring_gap / 2));

  add_frames(db, cell, fp.rings);

  for (const auto& r : fp.replicas) {
    db.add_shape(cell, LayerName::OD, r);
    db.add_shape(cell, dev_implant, r);
  }
  for (const auto& g : fp.replica_gates) db.add_shape(cell, LayerName::PO, g);

  for (std::size_t i = 0; i < fill.tiles.size(); ++i) {
    const auto& t = fill.tiles[i];
    db.add_shape(cell, LayerName::OD, t);
    LayerName imp = LayerName::NP;
    if (cfg.dummy == DummyConfig::PplusOD || (cfg.dummy == DummyConfig::Mixed && i % 2 == 1)) imp = LayerName::PP;
    db.add_shape(cell, imp, t);
  }

  // Common-centroid ABBA order, repeated.
  DeviceInstance ma{"MA", cfg.kind, {}, fp.active, cfg.fingers / 2};
  DeviceInstance mb{"MB", cfg.kind, {}, fp.active, cfg.fingers / 2};
  for (int i = 0; i < cfg.fingers; ++i) {
    bool is_a = (i % 4 == 0) || (i % 4 == 3);
    (is_a ? ma : mb).gate_rects.push_back(fp.gates[static_cast<std::size_t>(i)]);
  }
  db.add_device(std::move(ma));
  db.add_device(std::move(mb));
  return db;
}

LayoutDb generate_guard_ring_fixture(const TestStructureConfig& cfg) {
  cfg.validate();
  auto fp = floorplan(cfg);
  LayoutDb db;
  std::string cell = cfg.name() + "_ring";
  db.add_cell(cell);
  add_frames(db, cell, fp.rings);
  return db;
}

std::vector<TestStructureConfig> paper_fixture_configs() {
  using R = RingConfig;
  using D = DummyConfig;
  const std::pair<R, D> pmos[] = {{R::Double, D::PplusOD}, {R::Single1X, D::PplusOD}, {R::Single2X, D::PplusOD},
                                  {R::Double, D::NplusOD}, {R::Double, D::Mixed}};
  const std::pair<R, D> nmos[] = {{R::Double, D::NplusOD}, {R::Single1X, D::NplusOD}, {R::Single2X, D::NplusOD},
                                  {R::Double, D::PplusOD}, {R::Double, D::Mixed}};
  std::vector<TestStructureConfig> out;
  for (auto [r, d] : pmos) {
    TestStructureConfig c;
    c.kind = DeviceKind::PMOS;
    c.ring = r;
    c.dummy = d;
    out.push_back(c);
  }
  for (auto [r, d] : nmos) {
    TestStructureConfig c;
    c.kind = DeviceKind::NMOS;
    c.ring = r;
    c.dummy = d;
    out.push_back(c);
  }
  return out;
}

std::vector<std::pair<double, LayoutDb>> sweep(const TestStructureConfig& base, SweepAxis axis,
                                               const std::vector<double>& values) {
  if (values.empty()) throw ConfigError(CK::Invalid, "sweep needs at least one value");
  std::vector<std::pair<double, LayoutDb>> out;
  for (double v : values) {
    TestStructureConfig cfg = base;
    auto as_length = [v](const char* what) {
      if (!(v > 0) || v != std::floor(v)) {
        throw ConfigError(CK::Invalid, std::string(what) + " sweep value must be a positive integer nm");
      }
      return static_cast<std::int64_t>(v);
    };
    switch (axis) {
      case SweepAxis::RingOdw:
        (cfg.ring == RingConfig::Single1X ? cfg.ring_odw_1x : cfg.ring_odw_2x) = as_length("ring_odw");
        break;
      case SweepAxis::RingGap: cfg.ring_gap = as_length("ring_gap"); break;
      case SweepAxis::FillDensity: cfg.fill_target_density = v; break;
    }
    out.emplace_back(v, generate_test_structure(cfg));
  }
  return out;
}

TestStructureConfig parse_config_json(std::string_view text) {
  using json = nlohmann::json;
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(CK::Invalid, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError(CK::Invalid, "config must be a JSON object");
  TestStructureConfig c;
  auto str = [&](const char* key) -> std::string {
    if (!j[key].is_string()) throw ConfigError(CK::Invalid, std::string("config field '") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  auto integer = [&](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) throw ConfigError(CK::Invalid, std::string("config field '") + key + "' must be an integer");
    dst = j[key].get<std::remove_reference_t<decltype(dst)>>();
  };
  static const char* known[] = {"kind", "ring", "dummy", "finger_w", "finger_l", "fingers", "ring_gap", "ring_odw_1x",
                                "ring_odw_2x", "double_ring_gap", "fill_target_density", "window"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
      throw ConfigError(CK::Invalid, "unknown config field '" + key + "'");
    }
  }
  if (j.contains("kind")) {
    auto k = parse_device_kind(str("kind"));
    if (!k) throw ConfigError(CK::Invalid, "config kind must be NMOS or PMOS");
    c.kind = *k;
  }
  if (j.contains("ring")) {
    auto r = parse_ring_config(str("ring"));
    if (!r) throw ConfigError(CK::Invalid, "config ring must be Double, Single1X or Single2X");
    c.ring = *r;
  }
  if (j.contains("dummy")) {
    auto d = parse_dummy_config(str("dummy"));
    if (!d) throw ConfigError(CK::Invalid, "config dummy must be NplusOD, PplusOD or Mixed");
    c.dummy = *d;
  }
  integer("finger_w", c.finger_w);
  integer("finger_l", c.finger_l);
  integer("fingers", c.fingers);
  integer("ring_gap", c.ring_gap);
  integer("ring_odw_1x", c.ring_odw_1x);
  integer("ring_odw_2x", c.ring_odw_2x);
  integer("double_ring_gap", c.double_ring_gap);
  integer("window", c.window);
  if (j.contains("fill_target_density")) {
    if (!j["fill_target_density"].is_number()) throw ConfigError(CK::Invalid, "fill_target_density must be a number");
    c.fill_target_density = j["fill_target_density"].get<double>();
  }
  c.validate();
  return c;
}

std::string write_config_json(const TestStructureConfig& c) {
  nlohmann::ordered_json j{{"kind", std::string(to_string(c.kind))},
                           {"ring", std::string(to_string(c.ring))},
                           {"dummy", std::string(to_string(c.dummy))},
                           {"finger_w", c.finger_w},
                           {"finger_l", c.finger_l},
                           {"fingers", c.fingers},
                           {"ring_gap", c.ring_gap},
                           {"ring_odw_1x", c.ring_odw_1x},
                           {"ring_odw_2x", c.ring_odw_2x},
                           {"double_ring_gap", c.double_ring_gap},
                           {"fill_target_density", c.fill_target_density},
                           {"window", c.window}};
  return j.dump(2) + "\n";
}

}  // namespace dfm
