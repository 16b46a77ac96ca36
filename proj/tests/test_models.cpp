#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dfm/layout_json.hpp"
#include "dfm/models.hpp"

using namespace dfm;

namespace {

OseParams ose(double k, double c_mu = 50.0, double odw_th = 280.0) { return {k, odw_th, c_mu, ThresholdMode::AsWritten}; }

DeviceContext single(DeviceKind kind, Implant implant, std::int64_t stiw, std::int64_t odw) {
  DeviceContext c;
  c.device_id = "M";
  c.kind = kind;
  c.ring_class = RingClass::Single;
  c.sti_width = stiw;
  c.rings = {GuardRingInfo{implant, Rect(0, 0, 10, 10), Rect(-odw, -odw, 10 + odw, 10 + odw), odw}};
  return c;
}

DeviceContext double_ring(DeviceKind kind) {
  DeviceContext c = single(kind, Implant::Pplus, 1000, 280);
  c.ring_class = RingClass::Double;
  c.rings.push_back(GuardRingInfo{Implant::Nplus, Rect(-680, -680, 690, 690), Rect(-960, -960, 970, 970), 280});
  return c;
}

// NMOS table as the corpus would produce it.
VtTable nmos_table() {
  VtTable t;
  t.samples = {{0.55, 0.0, 0.0}, {0.0, 0.55, -0.0225}, {0.275, 0.275, -0.025}};
  t.ref_d_nod = 0.55;
  return t;
}

}  // namespace

TEST_CASE("effective_sti_width examples") {
  CHECK(effective_sti_width(1000, 140, ose(0)) == 1000);
  CHECK(effective_sti_width(1000, 10, ose(0)) == 1000);
  CHECK(effective_sti_width(1000, 280, ose(2)) == 1000);
  CHECK(effective_sti_width(1000, 140, ose(2)) == 5000);
  CHECK(effective_sti_width(1000, 560, ose(2)) == 1000);
}

TEST_CASE("effective_sti_width properties") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> k(0.01, 5), s(10, 5000), o(1, 279), lam(0.1, 10);
  for (int rep = 0; rep < 500; ++rep) {
    auto p = ose(k(rng));
    double stiw = s(rng), a = o(rng), b = o(rng);
    if (a > b) std::swap(a, b);
    double ea = effective_sti_width(stiw, a, p), eb = effective_sti_width(stiw, b, p);
    CHECK(ea >= stiw);
    if (a < b) CHECK(ea > eb);
    CHECK(eb > stiw);
    double l = lam(rng);
    CHECK(effective_sti_width(l * stiw, a, p) == doctest::Approx(l * ea).epsilon(1e-14));
    CHECK(effective_sti_width(stiw, 280.0, p) == stiw);
    CHECK(effective_sti_width(stiw, 280.0 + a, p) == stiw);
  }
  // The jump at the threshold: limit from below is stiw (1 + k).
  double below = effective_sti_width(1000, std::nextafter(280.0, 0.0), ose(2));
  CHECK(below == doctest::Approx(3000));
  CHECK(effective_sti_width(1000, 280, ose(2)) == 1000);
}

TEST_CASE("continuous threshold mode") {
  OseParams p = ose(2);
  p.mode = ThresholdMode::Continuous;
  CHECK(effective_sti_width(1000, 280, p) == 1000);
  CHECK(effective_sti_width(1000, 140, p) == 3000);
  CHECK(effective_sti_width(1000, std::nextafter(280.0, 0.0), p) == doctest::Approx(1000));
  CHECK(effective_sti_width(1000, 400, p) == 1000);
}

TEST_CASE("mobility multiplier") {
  PolarityTable pol;
  CHECK(mobility_multiplier(single(DeviceKind::PMOS, Implant::Nplus, 1000, 280), ose(2), pol) == doctest::Approx(1.05));
  CHECK(mobility_multiplier(single(DeviceKind::PMOS, Implant::Nplus, 1000, 140), ose(2), pol) == doctest::Approx(1.01));
  CHECK(mobility_multiplier(single(DeviceKind::NMOS, Implant::Pplus, 1000, 140), ose(2), pol) == doctest::Approx(1.01));
  CHECK(mobility_multiplier(single(DeviceKind::NMOS, Implant::Nplus, 1000, 280), ose(2), pol) == doctest::Approx(0.95));
  CHECK(mobility_multiplier(double_ring(DeviceKind::NMOS), ose(2), pol) == 1.0);
  CHECK(mobility_multiplier(double_ring(DeviceKind::PMOS), ose(5, 500), pol) == 1.0);
  DeviceContext none;
  CHECK(mobility_multiplier(none, ose(2), pol) == 1.0);
}

TEST_CASE("polarity invariants") {
  PolarityTable pol;
  CHECK(pol.sign(DeviceKind::PMOS, Implant::Pplus) == 1);
  CHECK(pol.sign(DeviceKind::NMOS, Implant::Pplus) == 1);
  CHECK(pol.sign(DeviceKind::PMOS, Implant::Nplus) == 1);
}

TEST_CASE("f_interp and vt_effective") {
  VtTable zero;
  zero.samples = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  CHECK(vt_effective(0.4, 0.3, 0.3, zero) == 0.4);

  auto t = nmos_table();
  for (const auto& s : t.samples) {
    CHECK(f_interp(t, s.d_nod, s.d_pod) == s.f);
    CHECK(vt_effective(0.4, s.d_nod, s.d_pod, t) == 0.4 * (1 + s.f));
  }
  CHECK(vt_effective(0.4, 0.0, 0.55, t) - 0.4 == doctest::Approx(-0.009));

  // Between anchors the value stays inside their range.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 200; ++rep) {
    double v = f_interp(t, u(rng) * 0.6, u(rng) * 0.6);
    CHECK(v <= 0.0);
    CHECK(v >= -0.025);
  }

  VtTable empty;
  CHECK_THROWS_AS(f_interp(empty, 0, 0), ModelError);
  // Fewer than three samples still interpolate.
  VtTable two;
  two.samples = {{0, 0, 0}, {1, 0, 0.1}};
  CHECK(f_interp(two, 0.5, 0) == doctest::Approx(0.05));
}

TEST_CASE("dummy current factor") {
  auto t = nmos_table();
  DeviceContext c = double_ring(DeviceKind::NMOS);
  c.d_nod = 0.55;
  c.d_pod = 0.0;
  CHECK(dummy_current_factor(c, t) == 1.0);
  c.d_nod = 0.0;
  c.d_pod = 0.55;
  CHECK(dummy_current_factor(c, t) == doctest::Approx(1.09).epsilon(1e-12));
  c.d_nod = 0.275;
  c.d_pod = 0.275;
  CHECK(dummy_current_factor(c, t) == doctest::Approx(1.10).epsilon(1e-12));

  // Reference point gives 1 for any link constants.
  t.vt_ref = 0.7;
  t.v_ov = 0.05;
  c.d_nod = 0.55;
  c.d_pod = 0.0;
  CHECK(dummy_current_factor(c, t) == 1.0);
}

TEST_CASE("predict_ratio composition") {
  PolarityTable pol;
  auto t = nmos_table();
  auto c = single(DeviceKind::NMOS, Implant::Pplus, 1000, 280);
  c.d_nod = 0.55;
  CHECK(predict_ratio(c, ose(2), pol, t) == doctest::Approx(1.05));
  auto d = double_ring(DeviceKind::NMOS);
  d.d_nod = 0.55;
  CHECK(predict_ratio(d, ose(2), pol, t) == 1.0);
  d.d_nod = 0.0;
  d.d_pod = 0.55;
  CHECK(predict_ratio(d, ose(2), pol, t) == dummy_current_factor(d, t));

  // Ordering below threshold.
  for (double odw : {20.0, 70.0, 140.0, 200.0}) {
    auto a = single(DeviceKind::NMOS, Implant::Pplus, 1000, static_cast<std::int64_t>(odw));
    auto b = single(DeviceKind::NMOS, Implant::Pplus, 1000, static_cast<std::int64_t>(odw) + 50);
    a.d_nod = b.d_nod = 0.55;
    CHECK(predict_ratio(a, ose(2), pol, t) < predict_ratio(b, ose(2), pol, t));
  }

  ModelParams m;
  m.ose[DeviceKind::NMOS] = ose(2);
  m.vt[DeviceKind::NMOS] = t;
  CHECK(predict_ratio(c, m) == predict_ratio(c, ose(2), pol, t));
  auto p = single(DeviceKind::PMOS, Implant::Nplus, 1000, 280);
  CHECK_THROWS_AS(predict_ratio(p, m), ModelError);
}

TEST_CASE("model json round trip") {
  ModelParams m;
  m.ose[DeviceKind::NMOS] = ose(2, 50);
  m.ose[DeviceKind::PMOS] = ose(1.5, 37.25);
  m.vt[DeviceKind::NMOS] = nmos_table();
  VtTable p;
  p.samples = {{0.0, 0.55, 0.0}, {0.55, 0.0, 0.0025}, {0.275, 0.275, 0.0025}};
  p.ref_d_pod = 0.55;
  m.vt[DeviceKind::PMOS] = p;
  m.polarity.nmos_nplus = 1;
  auto back = parse_model_json(write_model_json(m));
  CHECK(back.ose.at(DeviceKind::NMOS).k == 2);
  CHECK(back.ose.at(DeviceKind::PMOS).c_mu == 37.25);
  CHECK(back.ose.at(DeviceKind::PMOS).odw_th == 280);
  CHECK(back.vt.at(DeviceKind::NMOS).samples == m.vt.at(DeviceKind::NMOS).samples);
  CHECK(back.vt.at(DeviceKind::PMOS).ref_d_pod == 0.55);
  CHECK(back.polarity.nmos_nplus == 1);
  CHECK(write_model_json(back) == write_model_json(m));

  SUBCASE("scalar k form") {
    auto j = parse_model_json(R"({"ose":{"k":2,"odw_th_nm":280,"c_mu_nm":{"nmos":50,"pmos":40}},)"
                              R"("vt":{"vt_ref_v":0.4,"v_ov_v":0.2,"samples":{"nmos":[{"d_nod":0,"d_pod":0,"f":0}]}}})");
    CHECK(j.ose.at(DeviceKind::PMOS).k == 2);
    CHECK(j.ose.at(DeviceKind::PMOS).c_mu == 40);
  }
  SUBCASE("continuous flag") {
    auto c = m;
    c.ose[DeviceKind::NMOS].mode = ThresholdMode::Continuous;
    c.ose[DeviceKind::PMOS].mode = ThresholdMode::Continuous;
    CHECK(parse_model_json(write_model_json(c)).ose.at(DeviceKind::NMOS).mode == ThresholdMode::Continuous);
  }
  SUBCASE("schema errors") {
    CHECK_THROWS_AS(parse_model_json("{}"), JsonSchemaError);
    CHECK_THROWS_AS(parse_model_json("not json"), JsonSchemaError);
    CHECK_THROWS_AS(parse_model_json(R"({"ose":{"k":-1,"odw_th_nm":280,"c_mu_nm":{"nmos":50}},)"
                                     R"("vt":{"vt_ref_v":0.4,"v_ov_v":0.2,"samples":{}}})"),
                    JsonSchemaError);
  }
}
