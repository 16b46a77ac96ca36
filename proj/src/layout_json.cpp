#include "dfm/layout_json.hpp"

#include <json.hpp>

namespace dfm {

namespace {

using json = nlohmann::ordered_json;

const json& member(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw JsonSchemaError(path, "expected object");
  auto it = obj.find(key);
  if (it == obj.end()) throw JsonSchemaError(path + "." + key, "missing required field");
  return *it;
}

const json& array_at(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = member(obj, key, path);
  if (!v.is_array()) throw JsonSchemaError(path + "." + key, "expected array");
  return v;
}

std::int64_t integer_at(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = member(obj, key, path);
  if (!v.is_number_integer()) throw JsonSchemaError(path + "." + key, "expected integer nm");
  return v.get<std::int64_t>();
}

std::string string_at(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = member(obj, key, path);
  if (!v.is_string()) throw JsonSchemaError(path + "." + key, "expected string");
  return v.get<std::string>();
}

Rect rect_from(const json& obj, const std::string& path) {
  auto x0 = integer_at(obj, "x0", path);
  auto y0 = integer_at(obj, "y0", path);
  auto x1 = integer_at(obj, "x1", path);
  auto y1 = integer_at(obj, "y1", path);
  try {
    return Rect(x0, y0, x1, y1);
  } catch (const GeometryError& e) {
    throw JsonSchemaError(path, e.what());
  }
}

json rect_to(const Rect& r) {
  return json{{"x0", r.x0()}, {"y0", r.y0()}, {"x1", r.x1()}, {"y1", r.y1()}};
}

json parse_text(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw JsonSchemaError("$", std::string("invalid JSON: ") + e.what());
  }
}

std::vector<DeviceInstance> devices_from(const json& root) {
  std::vector<DeviceInstance> out;
  if (!root.contains("devices")) return out;
  const auto& devs = array_at(root, "devices", "$");
  for (std::size_t i = 0; i < devs.size(); ++i) {
    std::string p = "$.devices[" + std::to_string(i) + "]";
    const auto& d = devs[i];
    DeviceInstance inst;
    inst.id = string_at(d, "id", p);
    auto kind = parse_device_kind(string_at(d, "kind", p));
    if (!kind) throw JsonSchemaError(p + ".kind", "expected NMOS or PMOS");
    inst.kind = *kind;
    inst.active_rect = rect_from(member(d, "active", p), p + ".active");
    const auto& gates = array_at(d, "gates", p);
    for (std::size_t g = 0; g < gates.size(); ++g) {
      inst.gate_rects.push_back(rect_from(gates[g], p + ".gates[" + std::to_string(g) + "]"));
    }
    auto fingers = integer_at(d, "fingers", p);
    if (fingers < 1) throw JsonSchemaError(p + ".fingers", "must be >= 1");
    inst.fingers = static_cast<int>(fingers);
    out.push_back(std::move(inst));
  }
  return out;
}

json devices_to(const LayoutDb& db) {
  json arr = json::array();
  for (const auto& d : db.devices()) {
    json gates = json::array();
    for (const auto& g : d.gate_rects) gates.push_back(rect_to(g));
    arr.push_back(json{{"id", d.id},
                       {"kind", std::string(to_string(d.kind))},
                       {"active", rect_to(d.active_rect)},
                       {"gates", gates},
                       {"fingers", d.fingers}});
  }
  return arr;
}

}  // namespace

LayoutDb parse_layout_json(std::string_view text) {
  json root = parse_text(text);
  if (!root.is_object()) throw JsonSchemaError("$", "expected object");

  LayoutDb db;
  if (root.contains("db_unit")) {
    const auto& u = root["db_unit"];
    if (!u.is_number() || !(u.get<double>() > 0)) throw JsonSchemaError("$.db_unit", "expected positive number");
    db.set_db_unit(u.get<double>());
  }
  if (root.contains("layer_map")) {
    const auto& lm = root["layer_map"];
    if (!lm.is_object()) throw JsonSchemaError("$.layer_map", "expected object");
    std::map<LayerName, GdsLayer> entries;
    for (const auto& [key, val] : lm.items()) {
      std::string p = "$.layer_map." + key;
      auto name = parse_layer_name(key);
      if (!name) throw JsonSchemaError(p, "unknown layer");
      if (!val.is_array() || val.size() != 2 || !val[0].is_number_integer() || !val[1].is_number_integer()) {
        throw JsonSchemaError(p, "expected [layer, datatype]");
      }
      entries[*name] = {val[0].get<int>(), val[1].get<int>()};
    }
    try {
      db.set_layer_map(LayerMap::defaults().with_overrides(entries));
    } catch (const Error& e) {
      throw JsonSchemaError("$.layer_map", e.what());
    }
  }

  const auto& cells = array_at(root, "cells", "$");
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::string p = "$.cells[" + std::to_string(c) + "]";
    auto name = string_at(cells[c], "name", p);
    if (db.find_cell(name)) throw JsonSchemaError(p + ".name", "duplicate cell name");
    db.add_cell(name);
    const auto& shapes = array_at(cells[c], "shapes", p);
    for (std::size_t s = 0; s < shapes.size(); ++s) {
      std::string sp = p + ".shapes[" + std::to_string(s) + "]";
      auto layer = parse_layer_name(string_at(shapes[s], "layer", sp));
      if (!layer) throw JsonSchemaError(sp + ".layer", "unknown layer");
      db.add_shape(name, *layer, rect_from(shapes[s], sp));
    }
  }

  auto devices = devices_from(root);
  for (std::size_t i = 0; i < devices.size(); ++i) {
    try {
      db.add_device(std::move(devices[i]));
    } catch (const Error& e) {
      throw JsonSchemaError("$.devices[" + std::to_string(i) + "]", e.what());
    }
  }
  return db;
}

std::string write_layout_json(const LayoutDb& db) {
  json root;
  root["db_unit"] = db.db_unit();
  json lm = json::object();
  for (auto l : kAllLayers) {
    auto g = db.layer_map().gds(l);
    lm[std::string(to_string(l))] = json::array({g.layer, g.datatype});
  }
  root["layer_map"] = lm;
  json cells = json::array();
  for (const auto& c : db.cells()) {
    json shapes = json::array();
    for (const auto& s : c.shapes) {
      json o{{"layer", std::string(to_string(s.layer))}};
      o.update(rect_to(s.rect));
      shapes.push_back(std::move(o));
    }
    cells.push_back(json{{"name", c.name}, {"shapes", std::move(shapes)}});
  }
  root["cells"] = std::move(cells);
  root["devices"] = devices_to(db);
  return root.dump(1) + "\n";
}

std::vector<DeviceInstance> parse_devices_json(std::string_view text) {
  json root = parse_text(text);
  if (!root.is_object()) throw JsonSchemaError("$", "expected object");
  if (!root.contains("devices")) throw JsonSchemaError("$.devices", "missing required field");
  return devices_from(root);
}

std::string write_devices_json(const LayoutDb& db) {
  json root;
  root["devices"] = devices_to(db);
  return root.dump(1) + "\n";
}

}  // namespace dfm
