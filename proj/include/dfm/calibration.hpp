#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "dfm/fit.hpp"
#include "dfm/measurements.hpp"
#include "dfm/models.hpp"

namespace dfm {

class CalibrationError : public Error {
 public:
  enum class Kind { Underdetermined, NonPositiveSolution, MissingReferenceRow, MissingContext, DuplicateSample };
  CalibrationError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// One single-ring observation. `ratio` is the guard-ring part of the
/// measured ratio; `sign` is the ring polarity.
struct OsePoint {
  double stiw = 0.0;
  double odw = 0.0;
  double ratio = 1.0;
  int sign = +1;
};

struct OseFit {
  double k = 0.0;
  double c_mu = 0.0;
  int iterations = 0;
  bool closed_form = false;
};

/// Least-squares (k, c_mu) with odw_th held fixed. Two points straddling the
/// threshold (one at or above it) are solved in closed form; anything else
/// goes through `fit_nonlinear`.
OseFit calibrate_ose(std::span<const OsePoint> points, double odw_th);

struct OseGeometry {
  double stiw = 1000.0;
  double odw_1x = 140.0;
  double odw_2x = 280.0;
};

/// Per-kind fit from labelled single-ring rows (Double rows are ignored).
std::map<DeviceKind, OseFit> calibrate_ose(std::span<const MeasurementRow> rows, const OseGeometry& geometry,
                                           double odw_th);

/// Inverse of the dummy square-law link: f = (1 - ratio) * v_ov / (2 vt_ref).
double vt_shift_for_ratio(double measured_ratio, double vt_ref, double v_ov);

struct VtRow {
  double d_nod = 0.0;
  double d_pod = 0.0;
  double measured_ratio = 1.0;
};

/// Builds the look-up table from dummy rows. The reference row is the one
/// measured at exactly 1.00 (to 1e-9); its f is pinned to zero.
VtTable calibrate_vt_table(std::span<const VtRow> rows, double vt_ref, double v_ov);

struct CalibrationOptions {
  double odw_th = 280.0;  // nm
  double vt_ref = 0.4;    // V
  double v_ov = 0.2;      // V
  PolarityTable polarity{};
};

struct Residual {
  std::string key;
  double measured = 0.0;
  double predicted = 0.0;
  double residual = 0.0;  // predicted - measured
};

struct CalibrationResult {
  ModelParams params;
  std::map<DeviceKind, OseFit> ose_fits;
  std::vector<Residual> residuals;  // corpus order
  double max_abs_residual = 0.0;
  int iterations = 0;
};

/// Full corpus calibration. `contexts` maps MeasurementRow::key() to the
/// device context extracted from the matching fixture.
CalibrationResult calibrate(std::span<const MeasurementRow> rows, const std::map<std::string, DeviceContext>& contexts,
                            const CalibrationOptions& options = {});

/// "key,measured,predicted,residual" report.
std::string residuals_csv(const CalibrationResult& result);

}  // namespace dfm
