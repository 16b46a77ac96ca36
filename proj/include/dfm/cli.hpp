#pragma once

#include <iosfwd>
#include <optional>
#include <string>

namespace dfm::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kConfig = 2, kParse = 3, kExtraction = 4, kCalibration = 5 };

struct GenOptions {
  std::optional<std::string> config;
  bool all_paper_fixtures = false;
  std::string out_dir = ".";
  std::string format = "json";  // json | gds
};

struct ExtractOptions {
  std::string layout;
  std::optional<std::string> devices;    // sidecar for GDSII input
  std::optional<std::string> layer_map;
  double window_um = 100.0;
  std::optional<std::string> out;
};

struct DensityOptions {
  std::string layout;
  std::optional<std::string> layer_map;
  std::string implant = "np";  // np | pp | all
  double step_um = 10.0;
  double window_um = 100.0;
  std::optional<std::string> region_um;  // "x0,y0,x1,y1"
  std::string format = "csv";            // csv | pgm
  std::optional<std::string> out;
};

struct CalibrateOptions {
  std::string measurements;
  std::string fixtures_dir;
  double odw_th_nm = 280.0;
  double vt_ref = 0.4;
  double vov = 0.2;
  double window_um = 100.0;
  std::string out = "model.json";
  std::optional<std::string> residuals;  // default: <out stem>.residuals.csv
};

struct PredictOptions {
  std::string layout;
  std::string model;
  std::optional<std::string> devices;
  std::optional<std::string> layer_map;
  double window_um = 100.0;
  std::optional<std::string> out;
};

// Each command returns an ExitCode; results go to `out` (or --out files),
// diagnostics to `err`.
int cmd_gen(const GenOptions& o, std::ostream& out, std::ostream& err);
int cmd_extract(const ExtractOptions& o, std::ostream& out, std::ostream& err);
int cmd_density(const DensityOptions& o, std::ostream& out, std::ostream& err);
int cmd_calibrate(const CalibrateOptions& o, std::ostream& out, std::ostream& err);
int cmd_predict(const PredictOptions& o, std::ostream& out, std::ostream& err);

/// Parses argv with subcommands gen/extract/density/calibrate/predict.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace dfm::cli
