#include "dfm/models.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "dfm/layout_json.hpp"

namespace dfm {

const OseParams& ModelParams::ose_for(DeviceKind k) const {
  auto it = ose.find(k);
  if (it == ose.end()) throw ModelError("no OSE parameters for " + std::string(to_string(k)));
  return it->second;
}

const VtTable& ModelParams::vt_for(DeviceKind k) const {
  auto it = vt.find(k);
  if (it == vt.end()) throw ModelError("no Vt table for " + std::string(to_string(k)));
  return it->second;
}

double effective_sti_width(double stiw, double odw, const OseParams& p) {
  if (!(odw < p.odw_th)) return stiw;
  if (p.mode == ThresholdMode::Continuous) return stiw * (1.0 + p.k * (p.odw_th / odw - 1.0));
  return stiw * (1.0 + p.k * p.odw_th / odw);
}

double mobility_multiplier(const DeviceContext& ctx, const OseParams& p, const PolarityTable& pol) {
  if (ctx.ring_class != RingClass::Single) return 1.0;
  const auto& ring = ctx.rings.front();
  double eff = effective_sti_width(static_cast<double>(ctx.sti_width), static_cast<double>(ring.od_width), p);
  return 1.0 + pol.sign(ctx.kind, ring.implant) * p.c_mu / eff;
}

double f_interp(const VtTable& table, double d_nod, double d_pod) {
  if (table.samples.empty()) throw ModelError("Vt look-up table is empty");
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(table.samples.size());
  for (std::size_t i = 0; i < table.samples.size(); ++i) {
    double dx = table.samples[i].d_nod - d_nod;
    double dy = table.samples[i].d_pod - d_pod;
    double d2 = dx * dx + dy * dy;
    if (d2 == 0.0) return table.samples[i].f;
    dist.emplace_back(d2, i);
  }
  std::size_t n = std::min<std::size_t>(3, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(n), dist.end());
  double wsum = 0.0, acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double w = 1.0 / dist[j].first;
    wsum += w;
    acc += w * table.samples[dist[j].second].f;
  }
  return acc / wsum;
}

double vt_effective(double vt_ref, double d_nod, double d_pod, const VtTable& table) {
  return vt_ref * (1.0 + f_interp(table, d_nod, d_pod));
}

double dummy_current_factor(const DeviceContext& ctx, const VtTable& table) {
  double f = f_interp(table, ctx.d_nod, ctx.d_pod);
  return 1.0 - 2.0 * table.vt_ref * f / table.v_ov;
}

double predict_ratio(const DeviceContext& ctx, const OseParams& p, const PolarityTable& pol, const VtTable& table) {
  return mobility_multiplier(ctx, p, pol) * dummy_current_factor(ctx, table);
}

double predict_ratio(const DeviceContext& ctx, const ModelParams& m) {
  return predict_ratio(ctx, m.ose_for(ctx.kind), m.polarity, m.vt_for(ctx.kind));
}

namespace {

using json = nlohmann::ordered_json;

const char* kind_key(DeviceKind k) { return k == DeviceKind::NMOS ? "nmos" : "pmos"; }

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw JsonSchemaError(path, "expected number");
  return j.get<double>();
}

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw JsonSchemaError(path + "." + key, "missing required field");
  return j.at(key);
}

// Accepts a bare number (shared by both kinds) or {nmos, pmos}.
double per_kind(const json& j, DeviceKind k, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  return number(field(j, kind_key(k), path), path + "." + kind_key(k));
}

int sign_field(const json& j, const std::string& key, const std::string& path) {
  const auto& v = field(j, key, path);
  if (!v.is_number_integer() || (v.get<int>() != 1 && v.get<int>() != -1)) {
    throw JsonSchemaError(path + "." + key, "expected +1 or -1");
  }
  return v.get<int>();
}

}  // namespace

std::string write_model_json(const ModelParams& m) {
  json root;
  json ose;
  json k = json::object(), c_mu = json::object(), odw_th = json::object();
  bool same_th = true;
  for (const auto& [kind, p] : m.ose) {
    k[kind_key(kind)] = p.k;
    c_mu[kind_key(kind)] = p.c_mu;
    odw_th[kind_key(kind)] = p.odw_th;
    same_th = same_th && p.odw_th == m.ose.begin()->second.odw_th;
  }
  ose["k"] = k;
  ose["odw_th_nm"] = (same_th && !m.ose.empty()) ? json(m.ose.begin()->second.odw_th) : odw_th;
  ose["c_mu_nm"] = c_mu;
  if (!m.ose.empty() && m.ose.begin()->second.mode == ThresholdMode::Continuous) ose["threshold"] = "continuous";
  root["ose"] = ose;

  json vt;
  if (!m.vt.empty()) {
    vt["vt_ref_v"] = m.vt.begin()->second.vt_ref;
    vt["v_ov_v"] = m.vt.begin()->second.v_ov;
  }
  json ref = json::object(), samples = json::object();
  for (const auto& [kind, t] : m.vt) {
    ref[kind_key(kind)] = json{{"d_nod", t.ref_d_nod}, {"d_pod", t.ref_d_pod}};
    json arr = json::array();
    for (const auto& s : t.samples) arr.push_back(json{{"d_nod", s.d_nod}, {"d_pod", s.d_pod}, {"f", s.f}});
    samples[kind_key(kind)] = arr;
  }
  vt["reference"] = ref;
  vt["samples"] = samples;
  root["vt"] = vt;

  root["polarity"] = json{{"nmos", {{"pplus", m.polarity.nmos_pplus}, {"nplus", m.polarity.nmos_nplus}}},
                          {"pmos", {{"nplus", m.polarity.pmos_nplus}, {"pplus", m.polarity.pmos_pplus}}},
                          {"double_ring", "cancel"}};
  return root.dump(2) + "\n";
}

ModelParams parse_model_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw JsonSchemaError("$", std::string("invalid JSON: ") + e.what());
  }
  ModelParams m;
  const auto& ose = field(root, "ose", "$");
  const auto& vt = field(root, "vt", "$");
  const auto& samples = field(vt, "samples", "$.vt");
  for (auto kind : {DeviceKind::NMOS, DeviceKind::PMOS}) {
    std::string kk = kind_key(kind);
    OseParams p;
    p.k = per_kind(field(ose, "k", "$.ose"), kind, "$.ose.k");
    p.odw_th = per_kind(field(ose, "odw_th_nm", "$.ose"), kind, "$.ose.odw_th_nm");
    p.c_mu = per_kind(field(ose, "c_mu_nm", "$.ose"), kind, "$.ose.c_mu_nm");
    if (ose.contains("threshold") && ose["threshold"] == "continuous") p.mode = ThresholdMode::Continuous;
    if (p.k < 0) throw JsonSchemaError("$.ose.k", "must be >= 0");
    if (!(p.odw_th > 0)) throw JsonSchemaError("$.ose.odw_th_nm", "must be > 0");
    if (p.c_mu < 0) throw JsonSchemaError("$.ose.c_mu_nm", "must be >= 0");
    m.ose[kind] = p;

    VtTable t;
    t.vt_ref = number(field(vt, "vt_ref_v", "$.vt"), "$.vt.vt_ref_v");
    t.v_ov = number(field(vt, "v_ov_v", "$.vt"), "$.vt.v_ov_v");
    if (!(t.vt_ref > 0) || !(t.v_ov > 0)) throw JsonSchemaError("$.vt", "vt_ref_v and v_ov_v must be > 0");
    if (vt.contains("reference") && vt["reference"].contains(kk)) {
      const auto& r = vt["reference"][kk];
      t.ref_d_nod = number(field(r, "d_nod", "$.vt.reference." + kk), "$.vt.reference." + kk + ".d_nod");
      t.ref_d_pod = number(field(r, "d_pod", "$.vt.reference." + kk), "$.vt.reference." + kk + ".d_pod");
    }
    // A model may carry a table for one kind only.
    if (!samples.is_object()) throw JsonSchemaError("$.vt.samples", "expected object");
    if (!samples.contains(kk)) continue;
    const auto& arr = samples[kk];
    if (!arr.is_array()) throw JsonSchemaError("$.vt.samples." + kk, "expected array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      std::string p2 = "$.vt.samples." + kk + "[" + std::to_string(i) + "]";
      VtSample s{number(field(arr[i], "d_nod", p2), p2 + ".d_nod"), number(field(arr[i], "d_pod", p2), p2 + ".d_pod"),
                 number(field(arr[i], "f", p2), p2 + ".f")};
      for (const auto& e : t.samples) {
        if (e.d_nod == s.d_nod && e.d_pod == s.d_pod) throw JsonSchemaError(p2, "duplicate sample key");
      }
      t.samples.push_back(s);
    }
    m.vt[kind] = t;
  }
  if (root.contains("polarity")) {
    const auto& pol = root["polarity"];
    m.polarity.nmos_pplus = sign_field(field(pol, "nmos", "$.polarity"), "pplus", "$.polarity.nmos");
    m.polarity.nmos_nplus = sign_field(field(pol, "nmos", "$.polarity"), "nplus", "$.polarity.nmos");
    m.polarity.pmos_nplus = sign_field(field(pol, "pmos", "$.polarity"), "nplus", "$.polarity.pmos");
    m.polarity.pmos_pplus = sign_field(field(pol, "pmos", "$.polarity"), "pplus", "$.polarity.pmos");
  }
  return m;
}

}  // namespace dfm
