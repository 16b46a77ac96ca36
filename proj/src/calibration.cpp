#include "dfm/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace dfm {

namespace {

using Kind = CalibrationError::Kind;

double model_ratio(const OsePoint& p, double k, double c_mu, double odw_th) {
  OseParams params{k, odw_th, c_mu, ThresholdMode::AsWritten};
  return 1.0 + p.sign * c_mu / effective_sti_width(p.stiw, p.odw, params);
}

OseFit check_positive(OseFit fit) {
  if (!(fit.c_mu > 0) || !(fit.k >= 0) || !std::isfinite(fit.k) || !std::isfinite(fit.c_mu)) {
    std::ostringstream os;
    os.precision(10);
    os << "calibrated OSE parameters out of domain (k=" << fit.k << ", c_mu=" << fit.c_mu
       << " nm); guard-ring rows disagree with the configured polarity";
    throw CalibrationError(Kind::NonPositiveSolution, os.str());
  }
  return fit;
}

}  // namespace

OseFit calibrate_ose(std::span<const OsePoint> points, double odw_th) {
  if (!(odw_th > 0)) throw CalibrationError(Kind::Underdetermined, "odw_th must be positive");
  std::set<double> widths;
  bool below = false;
  for (const auto& p : points) {
    widths.insert(p.odw);
    below = below || p.odw < odw_th;
  }
  if (widths.size() < 2 || !below) {
    throw CalibrationError(Kind::Underdetermined,
                           "need at least two single-ring rows with distinct ring widths, one below odw_th");
  }

  if (points.size() == 2) {
    const OsePoint* at = nullptr;
    const OsePoint* under = nullptr;
    for (const auto& p : points) (p.odw >= odw_th ? at : under) = &p;
    if (at && under) {
      // Above threshold STI_eff = stiw, so the wide ring pins c_mu; the narrow
      // one then pins k through its effective STI width.
      OseFit fit;
      fit.closed_form = true;
      fit.c_mu = at->sign * (at->ratio - 1.0) * at->stiw;
      double eff = under->sign * fit.c_mu / (under->ratio - 1.0);
      fit.k = (eff / under->stiw - 1.0) * under->odw / odw_th;
      return check_positive(fit);
    }
  }

  // Fit (k, c_mu / stiw_mean) for conditioning.
  double stiw_mean = 0.0;
  double c_guess = 0.0;
  for (const auto& p : points) {
    stiw_mean += p.stiw / static_cast<double>(points.size());
    c_guess = std::max(c_guess, std::abs(p.ratio - 1.0) * p.stiw);
  }
  auto objective = [&](std::span<const double> x) {
    double sse = 0.0;
    for (const auto& p : points) {
      double r = model_ratio(p, x[0], x[1] * stiw_mean, odw_th) - p.ratio;
      sse += r * r;
    }
    return sse;
  };
  FitBounds bounds{{0.0, 0.0}, {1e3, 1e3}};
  auto res = fit_nonlinear(objective, {1.0, std::max(c_guess, 1e-6) / stiw_mean}, bounds);
  OseFit fit;
  fit.k = res.x[0];
  fit.c_mu = res.x[1] * stiw_mean;
  fit.iterations = res.iterations;
  if (res.at_bound) {
    std::ostringstream os;
    os.precision(10);
    os << "OSE fit stopped on a bound (k=" << fit.k << ", c_mu=" << fit.c_mu << " nm)";
    throw CalibrationError(Kind::NonPositiveSolution, os.str());
  }
  return check_positive(fit);
}

std::map<DeviceKind, OseFit> calibrate_ose(std::span<const MeasurementRow> rows, const OseGeometry& geometry,
                                           double odw_th) {
  std::map<DeviceKind, std::vector<OsePoint>> by_kind;
  for (const auto& r : rows) {
    if (r.ring == RingConfig::Double) continue;
    double odw = r.ring == RingConfig::Single1X ? geometry.odw_1x : geometry.odw_2x;
    by_kind[r.kind].push_back({geometry.stiw, odw, r.measured_ratio, +1});
  }
  std::map<DeviceKind, OseFit> out;
  for (const auto& [kind, pts] : by_kind) out[kind] = calibrate_ose(pts, odw_th);
  return out;
}

double vt_shift_for_ratio(double measured_ratio, double vt_ref, double v_ov) {
  return (1.0 - measured_ratio) * v_ov / (2.0 * vt_ref);
}

VtTable calibrate_vt_table(std::span<const VtRow> rows, double vt_ref, double v_ov) {
  if (!(vt_ref > 0) || !(v_ov > 0)) throw CalibrationError(Kind::Underdetermined, "vt_ref and v_ov must be positive");
  auto ref = std::find_if(rows.begin(), rows.end(),
                          [](const VtRow& r) { return std::abs(r.measured_ratio - 1.0) <= 1e-9; });
  if (ref == rows.end()) {
    throw CalibrationError(Kind::MissingReferenceRow, "no dummy-fill reference row measured at 1.00");
  }
  VtTable t;
  t.vt_ref = vt_ref;
  t.v_ov = v_ov;
  t.ref_d_nod = ref->d_nod;
  t.ref_d_pod = ref->d_pod;
  for (const auto& r : rows) {
    VtSample s{r.d_nod, r.d_pod, &r == &*ref ? 0.0 : vt_shift_for_ratio(r.measured_ratio, vt_ref, v_ov)};
    for (const auto& e : t.samples) {
      if (e.d_nod == s.d_nod && e.d_pod == s.d_pod) {
        throw CalibrationError(Kind::DuplicateSample, "two dummy rows share the same (d_nod, d_pod)");
      }
    }
    t.samples.push_back(s);
  }
  return t;
}

CalibrationResult calibrate(std::span<const MeasurementRow> rows, const std::map<std::string, DeviceContext>& contexts,
                            const CalibrationOptions& options) {
  auto context_for = [&](const MeasurementRow& r) -> const DeviceContext& {
    auto it = contexts.find(r.key());
    if (it == contexts.end()) throw CalibrationError(Kind::MissingContext, "no extracted context for " + r.key());
    return it->second;
  };

  CalibrationResult result;
  result.params.polarity = options.polarity;
  for (auto kind : {DeviceKind::NMOS, DeviceKind::PMOS}) {
    std::vector<const MeasurementRow*> dummy_rows, ring_rows;
    for (const auto& r : rows) {
      if (r.kind != kind) continue;
      (r.ring == RingConfig::Double ? dummy_rows : ring_rows).push_back(&r);
    }
    if (dummy_rows.empty() && ring_rows.empty()) continue;

    std::vector<VtRow> vt_rows;
    for (const auto* r : dummy_rows) {
      const auto& ctx = context_for(*r);
      vt_rows.push_back({ctx.d_nod, ctx.d_pod, r->measured_ratio});
    }
    if (vt_rows.empty()) {
      throw CalibrationError(Kind::MissingReferenceRow,
                             std::string("no double-ring rows for ") + std::string(to_string(kind)));
    }
    VtTable table = calibrate_vt_table(vt_rows, options.vt_ref, options.v_ov);
    DummyConfig ref_dummy = DummyConfig::NplusOD;
    for (const auto* r : dummy_rows) {
      if (std::abs(r->measured_ratio - 1.0) <= 1e-9) {
        ref_dummy = r->dummy;
        break;
      }
    }

    std::vector<OsePoint> pts;
    for (const auto* r : ring_rows) {
      const auto& ctx = context_for(*r);
      if (ctx.ring_class != RingClass::Single) {
        throw CalibrationError(Kind::MissingContext, r->key() + ": fixture does not contain a single guard ring");
      }
      // Rows sharing the reference fill carry no dummy effect by construction.
      double dummy = r->dummy == ref_dummy ? 1.0 : dummy_current_factor(ctx, table);
      pts.push_back({static_cast<double>(ctx.sti_width), static_cast<double>(ctx.rings.front().od_width),
                     r->measured_ratio / dummy, options.polarity.sign(kind, ctx.rings.front().implant)});
    }
    OseFit fit = calibrate_ose(pts, options.odw_th);
    result.iterations += fit.iterations;
    result.ose_fits[kind] = fit;
    result.params.ose[kind] = OseParams{fit.k, options.odw_th, fit.c_mu, ThresholdMode::AsWritten};
    result.params.vt[kind] = table;
  }

  for (const auto& r : rows) {
    const auto& ctx = context_for(r);
    double predicted = predict_ratio(ctx, result.params);
    Residual res{r.key(), r.measured_ratio, predicted, predicted - r.measured_ratio};
    result.max_abs_residual = std::max(result.max_abs_residual, std::abs(res.residual));
    result.residuals.push_back(res);
  }
  return result;
}

std::string residuals_csv(const CalibrationResult& result) {
  std::string out = "key,measured,predicted,residual\n";
  char buf[160];
  for (const auto& r : result.residuals) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.9f,%.9f\n", r.key.c_str(), r.measured, r.predicted, r.residual);
    out += buf;
  }
  return out;
}

}  // namespace dfm
