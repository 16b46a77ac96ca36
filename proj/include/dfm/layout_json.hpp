#pragma once

#include <string>
#include <string_view>

#include "dfm/layout_core.hpp"

namespace dfm {

/// Schema violation, located by a JSON path such as `$.cells[0].shapes[3].x1`.
class JsonSchemaError : public Error {
 public:
  JsonSchemaError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Fixture schema:
//   {db_unit?, layer_map?, cells:[{name, shapes:[{layer,x0,y0,x1,y1}]}],
//    devices?:[{id, kind, active:{x0,y0,x1,y1}, gates:[{...}], fingers}]}
// Coordinates are integer nm. db_unit defaults to 1e-9.
LayoutDb parse_layout_json(std::string_view text);
std::string write_layout_json(const LayoutDb& db);

/// Device-only sidecar ({"devices":[...]}) paired with a GDSII stream.
std::vector<DeviceInstance> parse_devices_json(std::string_view text);
std::string write_devices_json(const LayoutDb& db);

}  // namespace dfm
