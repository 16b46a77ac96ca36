#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dfm/extraction.hpp"
#include "dfm/testgen.hpp"
#include "oracle.hpp"

using namespace dfm;

namespace {

// Four-piece frame around `opening`: full-width bottom/top, sides between.
std::vector<Rect> frame(const Rect& opening, std::int64_t w) {
  std::int64_t x0 = opening.x0(), y0 = opening.y0(), x1 = opening.x1(), y1 = opening.y1();
  return {Rect(x0 - w, y0 - w, x1 + w, y0), Rect(x0 - w, y1, x1 + w, y1 + w), Rect(x0 - w, y0, x0, y1),
          Rect(x1, y0, x1 + w, y1)};
}

void add_ring(LayoutDb& db, const Rect& opening, std::int64_t w, LayerName implant) {
  for (const auto& r : frame(opening, w)) {
    db.add_shape("TOP", LayerName::OD, r);
    db.add_shape("TOP", implant, r);
  }
}

LayoutDb bare_device(DeviceKind kind = DeviceKind::NMOS) {
  LayoutDb db;
  db.add_cell("TOP");
  Rect active(0, 0, 1000, 1000);
  db.add_shape("TOP", LayerName::OD, active);
  db.add_shape("TOP", kind == DeviceKind::NMOS ? LayerName::NP : LayerName::PP, active);
  db.add_shape("TOP", LayerName::PO, Rect(480, -100, 520, 1100));
  db.add_device({"M1", kind, {Rect(480, -100, 520, 1100)}, active, 1});
  return db;
}

const DeviceInstance& dev(const LayoutDb& db, const std::string& id = "MA") {
  for (const auto& d : db.devices())
    if (d.id == id) return d;
  FAIL("no device " << id);
  return db.devices().front();
}

template <class F>
ExtractionError::Kind extraction_kind(F&& f) {
  try {
    f();
  } catch (const ExtractionError& e) {
    return e.kind();
  }
  FAIL("expected ExtractionError");
  return ExtractionError::Kind::NoDevices;
}

TestStructureConfig config(DeviceKind k, RingConfig r, DummyConfig d) {
  TestStructureConfig c;
  c.kind = k;
  c.ring = r;
  c.dummy = d;
  return c;
}

}  // namespace

TEST_CASE("single 2X ring around NMOS") {
  auto db = generate_test_structure(config(DeviceKind::NMOS, RingConfig::Single2X, DummyConfig::NplusOD));
  auto rings = detect_guard_rings(db, dev(db));
  REQUIRE(rings.size() == 1);
  CHECK(rings[0].implant == Implant::Pplus);
  CHECK(rings[0].od_width == 280);
  CHECK(extract_sti_width(dev(db), rings[0]) == 1000);
}

TEST_CASE("double ring: protective implant inside, 400 nm between rings") {
  for (auto kind : {DeviceKind::NMOS, DeviceKind::PMOS}) {
    auto db = generate_test_structure(config(kind, RingConfig::Double, DummyConfig::Mixed));
    auto rings = detect_guard_rings(db, dev(db));
    REQUIRE(rings.size() == 2);
    CHECK(rings[0].implant == (kind == DeviceKind::NMOS ? Implant::Pplus : Implant::Nplus));
    CHECK(rings[1].implant == (kind == DeviceKind::NMOS ? Implant::Nplus : Implant::Pplus));
    CHECK(rings[0].od_width == 280);
    CHECK(rings[1].od_width == 280);
    CHECK(rings[0].outer.x0() - rings[1].inner.x0() == 400);
    CHECK(rings[1].inner.x1() - rings[0].outer.x1() == 400);
    CHECK(rings[0].outer.y0() - rings[1].inner.y0() == 400);
    CHECK(rings[1].inner.y1() - rings[0].outer.y1() == 400);
  }
}

TEST_CASE("no frame, no ring") {
  auto db = bare_device();
  CHECK(detect_guard_rings(db, db.devices()[0]).empty());
  auto ctx = extract_device_context(db, db.devices()[0]);
  CHECK(ctx.ring_class == RingClass::None);
  CHECK(ctx.sti_width == 0);
  CHECK(ctx.d_nod == doctest::Approx(1e6 / 1e10));
  CHECK(ctx.d_pod == 0.0);
}

TEST_CASE("ring detection corner cases") {
  SUBCASE("open frame is not a ring") {
    auto db = bare_device();
    auto pieces = frame(Rect(-1000, -1000, 2000, 2000), 200);
    for (std::size_t i = 0; i < 3; ++i) {
      db.add_shape("TOP", LayerName::OD, pieces[i]);
      db.add_shape("TOP", LayerName::PP, pieces[i]);
    }
    CHECK(detect_guard_rings(db, db.devices()[0]).empty());
  }
  SUBCASE("frame that does not enclose the device") {
    auto db = bare_device();
    add_ring(db, Rect(5000, 5000, 6000, 6000), 200, LayerName::PP);
    CHECK(detect_guard_rings(db, db.devices()[0]).empty());
  }
  SUBCASE("mixed implant is ambiguous") {
    auto db = bare_device();
    auto pieces = frame(Rect(-1000, -1000, 2000, 2000), 200);
    for (std::size_t i = 0; i < 4; ++i) {
      db.add_shape("TOP", LayerName::OD, pieces[i]);
      db.add_shape("TOP", i < 2 ? LayerName::PP : LayerName::NP, pieces[i]);
    }
    CHECK(extraction_kind([&] { detect_guard_rings(db, db.devices()[0]); }) ==
          ExtractionError::Kind::AmbiguousImplant);
  }
  SUBCASE("99% coverage is enough") {
    auto db = bare_device();
    auto pieces = frame(Rect(-1000, -1000, 2000, 2000), 200);
    for (const auto& p : pieces) db.add_shape("TOP", LayerName::OD, p);
    // PP misses a 1 nm sliver along the outer edge.
    db.add_shape("TOP", LayerName::PP, Rect(-1199, -1199, 2199, 2199));
    auto rings = detect_guard_rings(db, db.devices()[0]);
    REQUIRE(rings.size() == 1);
    CHECK(rings[0].implant == Implant::Pplus);
  }
  SUBCASE("side widths differing by 1 nm are tolerated, 2 nm are not") {
    auto db = bare_device();
    Rect o(-1000, -1000, 2000, 2000);
    std::vector<Rect> p{Rect(-1200, -1200, 2201, -1000), Rect(-1200, 2000, 2201, 2200), Rect(-1200, -1000, -1000, 2000),
                        Rect(2000, -1000, 2201, 2000)};
    for (const auto& r : p) {
      db.add_shape("TOP", LayerName::OD, r);
      db.add_shape("TOP", LayerName::PP, r);
    }
    auto rings = detect_guard_rings(db, db.devices()[0]);
    REQUIRE(rings.size() == 1);
    CHECK(rings[0].od_width == 200);
    CHECK(rings[0].inner == o);

    auto db2 = bare_device();
    std::vector<Rect> q{Rect(-1200, -1200, 2202, -1000), Rect(-1200, 2000, 2202, 2200), Rect(-1200, -1000, -1000, 2000),
                        Rect(2000, -1000, 2202, 2000)};
    for (const auto& r : q) {
      db2.add_shape("TOP", LayerName::OD, r);
      db2.add_shape("TOP", LayerName::PP, r);
    }
    CHECK(extraction_kind([&] { detect_guard_rings(db2, db2.devices()[0]); }) ==
          ExtractionError::Kind::NonUniformWidth);
  }
  SUBCASE("three rings are outside the taxonomy") {
    auto db = bare_device();
    add_ring(db, Rect(-1000, -1000, 2000, 2000), 200, LayerName::PP);
    add_ring(db, Rect(-1600, -1600, 2600, 2600), 200, LayerName::NP);
    add_ring(db, Rect(-2200, -2200, 3200, 3200), 200, LayerName::PP);
    CHECK(detect_guard_rings(db, db.devices()[0]).size() == 3);
    CHECK(extraction_kind([&] { extract_device_context(db, db.devices()[0]); }) ==
          ExtractionError::Kind::MoreThanTwoRings);
  }
}

TEST_CASE("extract_sti_width") {
  DeviceInstance d{"M", DeviceKind::NMOS, {}, Rect(0, 0, 100, 100), 1};
  GuardRingInfo ring{Implant::Pplus, Rect(-200, -300, 300, 400), Rect(-300, -400, 400, 500), 100};
  CHECK(extract_sti_width(d, ring) == 200);
  GuardRingInfo sym{Implant::Pplus, Rect(-50, -50, 150, 150), Rect(-60, -60, 160, 160), 10};
  CHECK(extract_sti_width(d, sym) == 50);
  GuardRingInfo tight{Implant::Pplus, Rect(0, -50, 150, 150), Rect(-10, -60, 160, 160), 10};
  CHECK(extraction_kind([&] { extract_sti_width(d, tight); }) == ExtractionError::Kind::Overlap);
  GuardRingInfo cross{Implant::Pplus, Rect(20, -50, 150, 150), Rect(10, -60, 160, 160), 10};
  CHECK(extraction_kind([&] { extract_sti_width(d, cross); }) == ExtractionError::Kind::Overlap);

  // Brute force over random openings.
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int64_t> g(1, 5000);
  for (int rep = 0; rep < 200; ++rep) {
    std::int64_t l = g(rng), b = g(rng), r = g(rng), t = g(rng);
    GuardRingInfo ri{Implant::Nplus, Rect(-l, -b, 100 + r, 100 + t), Rect(-l - 5, -b - 5, 105 + r, 105 + t), 5};
    CHECK(extract_sti_width(d, ri) == std::min({l, b, r, t}));
  }
}

TEST_CASE("window density basics") {
  LayoutDb db;
  db.add_cell("TOP");
  CHECK(window_density(db, ImplantFilter::Nplus, {0, 0}, 1000) == 0.0);
  db.add_shape("TOP", LayerName::OD, Rect(-1000, -1000, 1000, 1000));
  db.add_shape("TOP", LayerName::NP, Rect(-1000, -1000, 1000, 1000));
  CHECK(window_density(db, ImplantFilter::Nplus, {0, 0}, 1000) == 1.0);
  CHECK(window_density(db, ImplantFilter::Pplus, {0, 0}, 1000) == 0.0);
  CHECK(window_density(db, ImplantFilter::Nplus, {500, 0}, 1000) == 1.0);
  CHECK(window_density(db, ImplantFilter::Nplus, {1000, 0}, 1000) == 0.5);
  // Implant without OD counts nothing.
  db.add_shape("TOP", LayerName::PP, Rect(2000, 2000, 3000, 3000));
  CHECK(window_density(db, ImplantFilter::Pplus, {2500, 2500}, 1000) == 0.0);
}

TEST_CASE("window density equals the grid oracle on random layouts") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::int64_t> c(0, 200), w(1, 100);
  for (int rep = 0; rep < 100; ++rep) {
    auto db = oracle::random_layout(rng);
    std::pair<Coord, Coord> center{static_cast<Coord>(c(rng) * 10), static_cast<Coord>(c(rng) * 10)};
    std::int64_t win = w(rng) * 20;
    Rect wr = square_window(center, win);
    for (auto f : {ImplantFilter::Nplus, ImplantFilter::Pplus, ImplantFilter::Any}) {
      double expect = static_cast<double>(oracle::covered_od_area(db, f, wr, 10)) / static_cast<double>(win * win);
      CHECK(window_density(db, f, center, win) == expect);
    }
  }
}

TEST_CASE("window density properties") {
  std::mt19937_64 rng(23);
  std::bernoulli_distribution coin(0.5);
  for (int rep = 0; rep < 100; ++rep) {
    auto db = oracle::random_layout(rng);
    std::pair<Coord, Coord> center{1000, 1000};
    double before = window_density(db, ImplantFilter::Nplus, center, 1500);
    CHECK(before >= 0.0);
    CHECK(before <= 1.0);
    db.add_shape("TOP", coin(rng) ? LayerName::OD : LayerName::NP, oracle::random_rect(rng, 0, 2000, 10));
    CHECK(window_density(db, ImplantFilter::Nplus, center, 1500) >= before);
    double np = window_density(db, ImplantFilter::Nplus, center, 1500);
    double pp = window_density(db, ImplantFilter::Pplus, center, 1500);
    double any = window_density(db, ImplantFilter::Any, center, 1500);
    CHECK(np <= any);
    CHECK(pp <= any);
  }
}

TEST_CASE("own OD changes density by at most its area") {
  for (const auto& cfg : paper_fixture_configs()) {
    auto db = generate_test_structure(cfg);
    const auto& d = dev(db);
    auto center = center_of(d.active_rect);
    LayoutDb without;
    without.add_cell("TOP");
    for (const auto& cell : db.cells())
      for (const auto& s : cell.shapes)
        if (!(s.layer == LayerName::OD && s.rect == d.active_rect)) without.add_shape("TOP", s.layer, s.rect);
    double bound = static_cast<double>(rect_area(d.active_rect)) / 1e10;
    for (auto f : {ImplantFilter::Nplus, ImplantFilter::Pplus}) {
      double a = window_density(db, f, center);
      double b = window_density(without, f, center);
      CHECK(a >= b);
      CHECK(a - b <= bound + 1e-15);
    }
  }
}

TEST_CASE("density map") {
  SUBCASE("empty layout is all zero") {
    LayoutDb db;
    auto m = density_map(db, ImplantFilter::Nplus, Rect(0, 0, 50000, 30000));
    CHECK(m.nx == 6);
    CHECK(m.ny == 4);
    for (double v : m.values) CHECK(v == 0.0);
  }
  SUBCASE("region smaller than one step") {
    auto db = generate_test_structure(TestStructureConfig{});
    Rect region(100, 200, 5100, 3200);
    auto m = density_map(db, ImplantFilter::Nplus, region, 10000, 100000);
    REQUIRE(m.nx == 1);
    REQUIRE(m.ny == 1);
    CHECK(m.values[0] == window_density(db, ImplantFilter::Nplus, center_of(region), 100000));
  }
  SUBCASE("50% checkerboard") {
    LayoutDb db;
    db.add_cell("TOP");
    // 1 um squares on a 2 um lattice, every other one: exact 50% per period.
    for (int i = -60; i < 60; ++i)
      for (int j = -60; j < 60; ++j)
        if ((i + j) % 2 == 0) {
          Rect r(i * 1000, j * 1000, i * 1000 + 1000, j * 1000 + 1000);
          db.add_shape("TOP", LayerName::OD, r);
          db.add_shape("TOP", LayerName::NP, r);
        }
    auto m = density_map(db, ImplantFilter::Nplus, Rect(-10000, -10000, 10000, 10000), 2500, 50000);
    CHECK(m.nx == 9);
    for (double v : m.values) CHECK(v == doctest::Approx(0.5).epsilon(0.02));
    for (double v : m.values) CHECK(std::abs(v - 0.5) <= 0.01);
  }
  SUBCASE("values match pointwise queries regardless of evaluation order") {
    std::mt19937_64 rng(31);
    auto db = oracle::random_layout(rng, 20000, 10);
    auto m = density_map(db, ImplantFilter::Any, Rect(0, 0, 20000, 20000), 1500, 3000);
    CHECK(m.nx == 14);
    for (std::size_t iy = 0; iy < m.ny; ++iy)
      for (std::size_t ix = 0; ix < m.nx; ++ix) {
        std::pair<Coord, Coord> c{static_cast<Coord>(m.origin.first + static_cast<std::int64_t>(ix) * m.step),
                                  static_cast<Coord>(m.origin.second + static_cast<std::int64_t>(iy) * m.step)};
        CHECK(m.at(ix, iy) == window_density(db, ImplantFilter::Any, c, 3000));
      }
    auto again = density_map(db, ImplantFilter::Any, Rect(0, 0, 20000, 20000), 1500, 3000);
    CHECK(again.values == m.values);
  }
  SUBCASE("csv and pgm") {
    LayoutDb db;
    db.add_cell("TOP");
    db.add_shape("TOP", LayerName::OD, Rect(0, 10000, 20000, 20000));
    db.add_shape("TOP", LayerName::NP, Rect(0, 10000, 20000, 20000));
    auto m = density_map(db, ImplantFilter::Nplus, Rect(0, 0, 20000, 20000), 10000, 10000);
    REQUIRE(m.nx == 3);
    std::string csv = density_map_csv(m);
    CHECK(csv.substr(0, csv.find('\n')) == "0.000000,0.000000,0.000000");
    std::string pgm = density_map_pgm(m);
    CHECK(pgm.rfind("P2\n3 3\n255\n", 0) == 0);
    // Top row is the highest y.
    CHECK(pgm.substr(11, pgm.find('\n', 11) - 11) == "64 128 64");
    CHECK(pgm.substr(pgm.rfind('\n', pgm.size() - 2) + 1) == "0 0 0\n");
  }
}

TEST_CASE("mixed dummy splits density evenly") {
  for (auto kind : {DeviceKind::NMOS, DeviceKind::PMOS}) {
    auto db = generate_test_structure(config(kind, RingConfig::Double, DummyConfig::Mixed));
    auto ctx = extract_device_context(db, dev(db));
    CHECK(std::abs(ctx.d_nod - ctx.d_pod) <= 0.02);
    double total = ctx.d_nod + ctx.d_pod;
    CHECK(ctx.d_nod == doctest::Approx(total / 2).epsilon(0.05));
  }
}

TEST_CASE("NMOS double ring with P+OD fill") {
  auto db = generate_test_structure(config(DeviceKind::NMOS, RingConfig::Double, DummyConfig::PplusOD));
  auto ctx = extract_device_context(db, dev(db));
  CHECK(ctx.ring_class == RingClass::Double);
  CHECK(ctx.d_pod > 0.5);
  CHECK(ctx.d_nod < 0.01);
  CHECK(ctx.d_nod > 0.0);
}

TEST_CASE("translation invariance") {
  for (const auto& cfg : paper_fixture_configs()) {
    auto db = generate_test_structure(cfg);
    auto a = extract_device_context(db, dev(db));
    auto moved = db.translated(123457, -98765);
    auto b = extract_device_context(moved, dev(moved));
    REQUIRE(a.rings.size() == b.rings.size());
    for (std::size_t i = 0; i < a.rings.size(); ++i) {
      CHECK(b.rings[i].inner == a.rings[i].inner.translated(123457, -98765));
      CHECK(b.rings[i].outer == a.rings[i].outer.translated(123457, -98765));
      CHECK(b.rings[i].od_width == a.rings[i].od_width);
      CHECK(b.rings[i].implant == a.rings[i].implant);
    }
    CHECK(b.sti_width == a.sti_width);
    CHECK(b.d_nod == a.d_nod);
    CHECK(b.d_pod == a.d_pod);
  }
}

TEST_CASE("all ten fixtures match their labels") {
  for (const auto& cfg : paper_fixture_configs()) {
    auto db = generate_test_structure(cfg);
    for (const auto& d : db.devices()) {
      auto ctx = extract_device_context(db, d);
      CHECK(ctx.kind == cfg.kind);
      CHECK(ctx.sti_width == 1000);
      CHECK(ctx.ring_class == (cfg.ring == RingConfig::Double ? RingClass::Double : RingClass::Single));
      if (cfg.ring != RingConfig::Double) {
        CHECK(ctx.rings[0].od_width == (cfg.ring == RingConfig::Single1X ? 140 : 280));
      }
      double total = ctx.d_nod + ctx.d_pod;
      CHECK(std::abs(total - 0.55) <= 0.01);
      if (cfg.dummy == DummyConfig::NplusOD) CHECK(ctx.d_nod > 0.5);
      if (cfg.dummy == DummyConfig::PplusOD) CHECK(ctx.d_pod > 0.5);
    }
  }
}
