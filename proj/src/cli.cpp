#include "dfm/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "dfm/calibration.hpp"
#include "dfm/gds.hpp"
#include "dfm/layout_json.hpp"
#include "dfm/testgen.hpp"

namespace dfm::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Input that could not be read at all; reported as a parse failure.
class InputError : public Error {
 public:
  using Error::Error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw InputError("write failed: " + path.string());
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::int64_t um_to_nm(double um) {
  if (!std::isfinite(um)) throw ConfigError(ConfigError::Kind::Invalid, "length must be finite");
  return std::llround(um * 1000.0);
}

std::int64_t positive_nm(double um, const char* what) {
  auto nm = um_to_nm(um);
  if (nm <= 0) throw ConfigError(ConfigError::Kind::Invalid, std::string(what) + " must be > 0");
  return nm;
}

struct Inputs {
  ojson list = ojson::array();
  void add(const std::string& path, std::string_view bytes) {
    list.push_back({{"path", path}, {"sha256", sha256_hex(bytes)}});
  }
};

bool is_gds(const std::string& path) {
  auto ext = fs::path(path).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".gds" || ext == ".gds2" || ext == ".gdsii";
}

fs::path sidecar_for(const std::string& layout) {
  fs::path p(layout);
  return p.parent_path() / (p.stem().string() + ".devices.json");
}

// JSON fixtures carry their own layer map; GDSII takes --layer-map and the
// device sidecar (explicit or <stem>.devices.json next to the stream).
LayoutDb load_layout(const std::string& path, const std::optional<std::string>& devices,
                     const std::optional<std::string>& layer_map, Inputs& inputs) {
  std::string bytes = read_file(path);
  inputs.add(path, bytes);
  if (!is_gds(path)) return parse_layout_json(bytes);

  LayerMap map = LayerMap::defaults();
  if (layer_map) {
    std::string text = read_file(*layer_map);
    inputs.add(*layer_map, text);
    map = parse_layer_map(text);
  }
  LayoutDb db = gds::parse(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()), map);
  std::optional<std::string> side = devices;
  if (!side && fs::exists(sidecar_for(path))) side = sidecar_for(path).string();
  if (side) {
    std::string text = read_file(*side);
    inputs.add(*side, text);
    for (auto& d : parse_devices_json(text)) db.add_device(std::move(d));
  }
  return db;
}

ojson rect_json(const Rect& r) { return {{"x0", r.x0()}, {"y0", r.y0()}, {"x1", r.x1()}, {"y1", r.y1()}}; }

ojson context_json(const DeviceContext& c) {
  ojson rings = ojson::array();
  for (const auto& r : c.rings) {
    rings.push_back({{"implant", to_string(r.implant)},
                     {"od_width_nm", r.od_width},
                     {"inner", rect_json(r.inner)},
                     {"outer", rect_json(r.outer)}});
  }
  return {{"id", c.device_id},
          {"kind", to_string(c.kind)},
          {"ring_class", to_string(c.ring_class)},
          {"sti_width_nm", c.sti_width},
          {"rings", rings},
          {"d_nod", c.d_nod},
          {"d_pod", c.d_pod}};
}

ojson report_head(const char* command) {
  ojson r;
  r["tool_version"] = kToolVersion;
  r["command"] = command;
  return r;
}

void emit(const ojson& report, const std::optional<std::string>& out_path, std::ostream& out) {
  std::string text = report.dump(2) + "\n";
  if (out_path) {
    write_file(*out_path, text);
  } else {
    out << text;
  }
}

std::vector<DeviceContext> extract_all(const LayoutDb& db, std::int64_t window) {
  if (db.devices().empty()) {
    throw ExtractionError(ExtractionError::Kind::NoDevices, "", "no device annotations");
  }
  std::vector<DeviceContext> out;
  for (const auto& d : db.devices()) out.push_back(extract_device_context(db, d, window));
  return out;
}

// Maps library exceptions onto exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const gds::GdsError& e) {
    err << "parse error at byte " << e.offset() << ": " << e.what() << "\n";
    return kParse;
  } catch (const JsonSchemaError& e) {
    err << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const CsvError& e) {
    err << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kParse;
  } catch (const GeometryError& e) {
    err << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const ExtractionError& e) {
    err << "extraction error: " << e.what() << "\n";
    return kExtraction;
  } catch (const CalibrationError& e) {
    err << "calibration error: " << e.what() << "\n";
    return kCalibration;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << "\n";
    return kCalibration;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kParse;
  }
}

}  // namespace

int cmd_gen(const GenOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.format != "json" && o.format != "gds") {
      throw ConfigError(ConfigError::Kind::Invalid, "--format must be json or gds");
    }
    if (o.all_paper_fixtures == o.config.has_value()) {
      throw ConfigError(ConfigError::Kind::Invalid, "give exactly one of --config or --all-paper-fixtures");
    }
    std::vector<TestStructureConfig> configs;
    if (o.config) {
      configs.push_back(parse_config_json(read_file(*o.config)));
    } else {
      configs = paper_fixture_configs();
    }
    // Generate everything before touching the output directory.
    std::vector<LayoutDb> layouts;
    for (const auto& c : configs) layouts.push_back(generate_test_structure(c));

    fs::create_directories(o.out_dir);
    ojson written = ojson::array();
    for (std::size_t i = 0; i < configs.size(); ++i) {
      fs::path base = fs::path(o.out_dir) / configs[i].name();
      if (o.format == "json") {
        fs::path p = base.string() + ".json";
        write_file(p, write_layout_json(layouts[i]));
        written.push_back(p.string());
      } else {
        fs::path p = base.string() + ".gds";
        auto bytes = gds::write(layouts[i]);
        write_file(p, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
        fs::path side = base.string() + ".devices.json";
        write_file(side, write_devices_json(layouts[i]));
        written.push_back(p.string());
        written.push_back(side.string());
      }
    }
    ojson r = report_head("gen");
    r["files"] = written;
    out << r.dump(2) << "\n";
    return int{kOk};
  });
}

int cmd_extract(const ExtractOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::int64_t window = positive_nm(o.window_um, "--window-um");
    Inputs inputs;
    LayoutDb db = load_layout(o.layout, o.devices, o.layer_map, inputs);
    ojson devices = ojson::array();
    for (const auto& c : extract_all(db, window)) devices.push_back(context_json(c));
    ojson r = report_head("extract");
    r["inputs"] = inputs.list;
    r["settings"] = {{"window_nm", window}};
    r["devices"] = devices;
    r["warnings"] = ojson::array();
    emit(r, o.out, out);
    return int{kOk};
  });
}

int cmd_density(const DensityOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ImplantFilter filter;
    if (o.implant == "np") {
      filter = ImplantFilter::Nplus;
    } else if (o.implant == "pp") {
      filter = ImplantFilter::Pplus;
    } else if (o.implant == "all") {
      filter = ImplantFilter::Any;
    } else {
      throw ConfigError(ConfigError::Kind::Invalid, "--implant must be np, pp or all");
    }
    std::string format = o.format;
    if (o.out && fs::path(*o.out).extension() == ".pgm") format = "pgm";
    if (format != "csv" && format != "pgm") throw ConfigError(ConfigError::Kind::Invalid, "--format must be csv or pgm");
    std::int64_t step = positive_nm(o.step_um, "--step-um");
    std::int64_t window = positive_nm(o.window_um, "--window-um");

    Inputs inputs;
    LayoutDb db = load_layout(o.layout, std::nullopt, o.layer_map, inputs);
    Rect region{0, 0, 1, 1};
    if (o.region_um) {
      double v[4];
      char tail = 0;
      if (std::sscanf(o.region_um->c_str(), "%lf,%lf,%lf,%lf%c", &v[0], &v[1], &v[2], &v[3], &tail) != 4) {
        throw ConfigError(ConfigError::Kind::Invalid, "--region-um expects x0,y0,x1,y1");
      }
      try {
        region = Rect(um_to_nm(v[0]), um_to_nm(v[1]), um_to_nm(v[2]), um_to_nm(v[3]));
      } catch (const GeometryError& e) {
        throw ConfigError(ConfigError::Kind::Invalid, std::string("--region-um: ") + e.what());
      }
    } else if (auto bb = db.bbox()) {
      region = *bb;
    } else {
      // Nothing drawn: one window at the origin.
      region = Rect(-window / 2, -window / 2, window - window / 2, window - window / 2);
    }
    DensityMap m = density_map(db, filter, region, step, window);
    std::string text = format == "pgm" ? density_map_pgm(m) : density_map_csv(m);
    if (o.out) {
      write_file(*o.out, text);
    } else {
      out << text;
    }
    return int{kOk};
  });
}

int cmd_calibrate(const CalibrateOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!(o.odw_th_nm > 0)) throw ConfigError(ConfigError::Kind::Invalid, "--odw-th-nm must be > 0");
    if (!(o.vt_ref > 0) || !(o.vov > 0)) throw ConfigError(ConfigError::Kind::Invalid, "--vt-ref and --vov must be > 0");
    std::int64_t window = positive_nm(o.window_um, "--window-um");

    Inputs inputs;
    std::string csv = read_file(o.measurements);
    inputs.add(o.measurements, csv);
    auto rows = parse_measurements_csv(csv);

    std::map<std::string, DeviceContext> contexts;
    for (const auto& row : rows) {
      fs::path base = fs::path(o.fixtures_dir) / row.key();
      std::string path = base.string() + ".json";
      if (!fs::exists(path)) path = base.string() + ".gds";
      if (!fs::exists(path)) throw InputError("no fixture for " + row.key() + " in " + o.fixtures_dir);
      LayoutDb db = load_layout(path, std::nullopt, std::nullopt, inputs);
      auto ctxs = extract_all(db, window);
      if (ctxs.front().kind != row.kind) {
        throw ExtractionError(ExtractionError::Kind::UnknownDevice, ctxs.front().device_id,
                              "fixture " + path + " does not hold a " + std::string(to_string(row.kind)) + " device");
      }
      contexts[row.key()] = ctxs.front();
    }

    CalibrationOptions opts;
    opts.odw_th = o.odw_th_nm;
    opts.vt_ref = o.vt_ref;
    opts.v_ov = o.vov;
    CalibrationResult res = calibrate(rows, contexts, opts);

    write_file(o.out, write_model_json(res.params));
    fs::path resid = o.residuals ? fs::path(*o.residuals)
                                 : fs::path(o.out).parent_path() / (fs::path(o.out).stem().string() + ".residuals.csv");
    write_file(resid, residuals_csv(res));

    ojson fits = ojson::object();
    for (const auto& [kind, f] : res.ose_fits) {
      fits[std::string(to_string(kind))] = {
          {"k", f.k}, {"c_mu_nm", f.c_mu}, {"closed_form", f.closed_form}, {"iterations", f.iterations}};
    }
    ojson resids = ojson::array();
    for (const auto& r : res.residuals) {
      resids.push_back({{"key", r.key}, {"measured", r.measured}, {"predicted", r.predicted}, {"residual", r.residual}});
    }
    ojson r = report_head("calibrate");
    r["inputs"] = inputs.list;
    r["calibration"] = {{"odw_th_nm", o.odw_th_nm},
                        {"vt_ref_v", o.vt_ref},
                        {"v_ov_v", o.vov},
                        {"ose", fits},
                        {"max_abs_residual", res.max_abs_residual},
                        {"residuals", resids},
                        {"model", o.out},
                        {"residuals_csv", resid.string()}};
    r["warnings"] = ojson::array();
    out << r.dump(2) << "\n";
    if (res.max_abs_residual > 0.01) {
      err << "calibration error: max |residual| " << res.max_abs_residual << " exceeds 0.01\n";
      return int{kCalibration};
    }
    return int{kOk};
  });
}

int cmd_predict(const PredictOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::int64_t window = positive_nm(o.window_um, "--window-um");
    Inputs inputs;
    LayoutDb db = load_layout(o.layout, o.devices, o.layer_map, inputs);
    std::string model_text = read_file(o.model);
    inputs.add(o.model, model_text);
    ModelParams model = parse_model_json(model_text);

    ojson devices = ojson::array();
    ojson warnings = ojson::array();
    for (const auto& c : extract_all(db, window)) {
      ojson d = context_json(c);
      d["predicted_ratio"] = predict_ratio(c, model);
      devices.push_back(d);
      if (c.ring_class == RingClass::None) {
        warnings.push_back("device '" + c.device_id + "': no guard ring found; stress term is 1");
      }
    }
    ojson r = report_head("predict");
    r["inputs"] = inputs.list;
    r["settings"] = {{"window_nm", window}};
    r["devices"] = devices;
    r["warnings"] = warnings;
    emit(r, o.out, out);
    return int{kOk};
  });
}

namespace {

// "--x-um" with an alternative "--x-nm"; the nm flag wins when given.
struct Length {
  double um;
  std::optional<double> nm;
  double resolve() const { return nm ? *nm / 1000.0 : um; }
};

void add_length(CLI::App* app, const std::string& name, Length& len, const std::string& help) {
  app->add_option("--" + name + "-um", len.um, help + " (um)")->capture_default_str();
  app->add_option("--" + name + "-nm", len.nm, help + " (nm)");
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layout-dependent mismatch toolkit"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "generate mirror test structures");
  g->add_option("--config", gen.config, "JSON structure config");
  g->add_flag("--all-paper-fixtures", gen.all_paper_fixtures, "emit the ten table configurations");
  g->add_option("--out-dir", gen.out_dir)->capture_default_str();
  g->add_option("--format", gen.format)->check(CLI::IsMember({"json", "gds"}))->capture_default_str();

  ExtractOptions ex;
  Length ex_window{100.0, {}};
  auto* e = app.add_subcommand("extract", "extract device contexts");
  e->add_option("layout", ex.layout)->required();
  e->add_option("--devices", ex.devices, "device sidecar for GDSII input");
  e->add_option("--layer-map", ex.layer_map);
  add_length(e, "window", ex_window, "density window side");
  e->add_option("--out", ex.out, "report path (default stdout)");

  DensityOptions de;
  Length de_window{100.0, {}};
  Length de_step{10.0, {}};
  auto* d = app.add_subcommand("density", "implant-aware OD density map");
  d->add_option("layout", de.layout)->required();
  d->add_option("--layer-map", de.layer_map);
  d->add_option("--implant", de.implant)->check(CLI::IsMember({"np", "pp", "all"}))->capture_default_str();
  add_length(d, "step", de_step, "grid step");
  add_length(d, "window", de_window, "density window side");
  d->add_option("--region-um", de.region_um, "x0,y0,x1,y1 (default layout bbox)");
  d->add_option("--format", de.format)->check(CLI::IsMember({"csv", "pgm"}))->capture_default_str();
  d->add_option("--out", de.out, "output path; .pgm selects pgm (default stdout)");

  CalibrateOptions ca;
  std::optional<double> odw_th_um;
  Length ca_window{100.0, {}};
  auto* c = app.add_subcommand("calibrate", "fit model parameters to a measurement corpus");
  c->add_option("measurements", ca.measurements)->required();
  c->add_option("--fixtures-dir", ca.fixtures_dir)->required();
  c->add_option("--odw-th-nm", ca.odw_th_nm)->capture_default_str();
  c->add_option("--odw-th-um", odw_th_um);
  c->add_option("--vt-ref", ca.vt_ref, "reference threshold (V)")->capture_default_str();
  c->add_option("--vov", ca.vov, "overdrive (V)")->capture_default_str();
  add_length(c, "window", ca_window, "density window side");
  c->add_option("--out", ca.out)->capture_default_str();
  c->add_option("--residuals", ca.residuals, "residual CSV (default <out stem>.residuals.csv)");

  PredictOptions pr;
  Length pr_window{100.0, {}};
  auto* p = app.add_subcommand("predict", "predict mirror ratios");
  p->add_option("layout", pr.layout)->required();
  p->add_option("--model", pr.model)->required();
  p->add_option("--devices", pr.devices, "device sidecar for GDSII input");
  p->add_option("--layer-map", pr.layer_map);
  add_length(p, "window", pr_window, "density window side");
  p->add_option("--out", pr.out, "report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& ex2) {
    // Subcommand help requests surface here too.
    if (ex2.get_exit_code() == 0) {
      auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
      out << sub->help();
      return kOk;
    }
    err << ex2.what() << "\n";
    return kConfig;
  }

  if (g->parsed()) return cmd_gen(gen, out, err);
  if (e->parsed()) {
    ex.window_um = ex_window.resolve();
    return cmd_extract(ex, out, err);
  }
  if (d->parsed()) {
    de.window_um = de_window.resolve();
    de.step_um = de_step.resolve();
    return cmd_density(de, out, err);
  }
  if (c->parsed()) {
    if (odw_th_um && c->count("--odw-th-nm") == 0) ca.odw_th_nm = *odw_th_um * 1000.0;
    ca.window_um = ca_window.resolve();
    return cmd_calibrate(ca, out, err);
  }
  pr.window_um = pr_window.resolve();
  return cmd_predict(pr, out, err);
}

}  // namespace dfm::cli
