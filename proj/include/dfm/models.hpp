#pragma once

#include <map>
#include <string>
#include <vector>

#include "dfm/extraction.hpp"

namespace dfm {

class ModelError : public Error {
 public:
  using Error::Error;
};

/// How the STI correction behaves at odw == odw_th.
enum class ThresholdMode {
  AsWritten,   // correction applies only for odw < odw_th; jumps at the threshold
  Continuous,  // stiw * (1 + k (odw_th/odw - 1)), vanishing at the threshold
};

/// Guard-ring oxide-spacing parameters for one device kind. Lengths in nm.
struct OseParams {
  double k = 0.0;
  double odw_th = 280.0;
  double c_mu = 0.0;
  ThresholdMode mode = ThresholdMode::AsWritten;
};

struct VtSample {
  double d_nod = 0.0;
  double d_pod = 0.0;
  double f = 0.0;
  friend bool operator==(const VtSample&, const VtSample&) = default;
};

/// Dummy-density look-up table for one device kind.
struct VtTable {
  std::vector<VtSample> samples;
  double ref_d_nod = 0.0;  // f == 0 here
  double ref_d_pod = 0.0;
  double vt_ref = 0.4;     // V
  double v_ov = 0.2;       // V, overdrive for the dVt -> dI/I link
};

/// Stress sign of a single guard ring by (device kind, ring implant).
/// Double rings cancel.
struct PolarityTable {
  int nmos_pplus = +1;
  int nmos_nplus = -1;
  int pmos_nplus = +1;
  int pmos_pplus = +1;

  int sign(DeviceKind kind, Implant implant) const {
    if (kind == DeviceKind::NMOS) return implant == Implant::Pplus ? nmos_pplus : nmos_nplus;
    return implant == Implant::Nplus ? pmos_nplus : pmos_pplus;
  }
};

/// Everything `predict_ratio` needs, per device kind.
struct ModelParams {
  std::map<DeviceKind, OseParams> ose;
  std::map<DeviceKind, VtTable> vt;
  PolarityTable polarity;

  const OseParams& ose_for(DeviceKind k) const;
  const VtTable& vt_for(DeviceKind k) const;
};

/// STI width seen by a device behind a guard ring of OD width `odw`:
/// stiw * (1 + k * odw_th / odw) when odw < odw_th, else stiw.
double effective_sti_width(double stiw, double odw, const OseParams& p);

/// 1 + s * c_mu / STI_eff for a single ring; exactly 1 for none or double.
double mobility_multiplier(const DeviceContext& ctx, const OseParams& p, const PolarityTable& pol);

/// Inverse-distance (power 2) interpolation over the three nearest samples;
/// exact at every sample.
double f_interp(const VtTable& table, double d_nod, double d_pod);

double vt_effective(double vt_ref, double d_nod, double d_pod, const VtTable& table);

/// First-order square law: 1 - 2 * vt_ref * f / v_ov.
double dummy_current_factor(const DeviceContext& ctx, const VtTable& table);

double predict_ratio(const DeviceContext& ctx, const OseParams& p, const PolarityTable& pol, const VtTable& table);
double predict_ratio(const DeviceContext& ctx, const ModelParams& m);

/// Model parameter file:
///   {ose:{k:{nmos,pmos}, odw_th_nm, c_mu_nm:{nmos,pmos}},
///    vt:{vt_ref_v, v_ov_v, reference:{nmos:{d_nod,d_pod},...},
///        samples:{nmos:[{d_nod,d_pod,f}], pmos:[...]}},
///    polarity:{nmos:{pplus,nplus}, pmos:{nplus,pplus}, double_ring:"cancel"}}
std::string write_model_json(const ModelParams& m);
ModelParams parse_model_json(std::string_view text);

}  // namespace dfm
