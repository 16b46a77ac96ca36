#include "dfm/layout_core.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace dfm {

namespace {

Coord checked_coord(std::int64_t v) {
  if (v < kCoordMin || v > kCoordMax) {
    throw GeometryError("coordinate " + std::to_string(v) + " outside 4-byte signed range");
  }
  return static_cast<Coord>(v);
}

// Segment tree over compressed y intervals: cover count plus covered length.
class CoverTree {
 public:
  explicit CoverTree(std::vector<Coord> ys)
      : ys_(std::move(ys)), count_(4 * ys_.size()), len_(4 * ys_.size()) {}

  void update(std::size_t lo, std::size_t hi, int delta) {
    if (lo < hi) update(1, 0, ys_.size() - 1, lo, hi, delta);
  }
  std::int64_t covered() const { return len_.empty() ? 0 : len_[1]; }

 private:
  // Node covers elementary intervals [l, r) in ys_ index space.
  void update(std::size_t node, std::size_t l, std::size_t r, std::size_t lo, std::size_t hi,
              int delta) {
    if (hi <= l || r <= lo) return;
    if (lo <= l && r <= hi) {
      count_[node] += delta;
    } else {
      std::size_t mid = (l + r) / 2;
      update(2 * node, l, mid, lo, hi, delta);
      update(2 * node + 1, mid, r, lo, hi, delta);
    }
    if (count_[node] > 0) {
      len_[node] = std::int64_t{ys_[r]} - ys_[l];
    } else if (r - l == 1) {
      len_[node] = 0;
    } else {
      len_[node] = len_[2 * node] + len_[2 * node + 1];
    }
  }

  std::vector<Coord> ys_;
  std::vector<int> count_;
  std::vector<std::int64_t> len_;
};

struct Event {
  Coord x;
  int delta;
  Coord y0, y1;
};

}  // namespace

Rect::Rect(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1)
    : x0_(checked_coord(x0)), y0_(checked_coord(y0)), x1_(checked_coord(x1)), y1_(checked_coord(y1)) {
  if (!(x0 < x1 && y0 < y1)) {
    std::ostringstream os;
    os << "degenerate rect (" << x0 << "," << y0 << "," << x1 << "," << y1 << ")";
    throw GeometryError(os.str());
  }
}

std::optional<Rect> intersect(const Rect& a, const Rect& b) {
  if (!a.overlaps(b)) return std::nullopt;
  return Rect(std::max(a.x0(), b.x0()), std::max(a.y0(), b.y0()), std::min(a.x1(), b.x1()),
              std::min(a.y1(), b.y1()));
}

namespace {
Coord floor_mid(Coord a, Coord b) {
  std::int64_t s = std::int64_t{a} + b;
  return static_cast<Coord>(s >= 0 ? s / 2 : -((-s + 1) / 2));
}
}  // namespace

std::pair<Coord, Coord> center_of(const Rect& r) {
  return {floor_mid(r.x0(), r.x1()), floor_mid(r.y0(), r.y1())};
}

Rect square_window(std::pair<Coord, Coord> center, std::int64_t size) {
  if (size <= 0) throw GeometryError("window size must be positive");
  std::int64_t x0 = std::int64_t{center.first} - size / 2;
  std::int64_t y0 = std::int64_t{center.second} - size / 2;
  return Rect(x0, y0, x0 + size, y0 + size);
}

Area rect_area(const Rect& r) { return r.width() * r.height(); }

Area union_area(std::span<const Rect> rects) {
  if (rects.empty()) return 0;
  std::vector<Coord> ys;
  ys.reserve(2 * rects.size());
  std::vector<Event> events;
  events.reserve(2 * rects.size());
  for (const auto& r : rects) {
    ys.push_back(r.y0());
    ys.push_back(r.y1());
    events.push_back({r.x0(), +1, r.y0(), r.y1()});
    events.push_back({r.x1(), -1, r.y0(), r.y1()});
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.x < b.x; });

  auto index = [&ys](Coord y) {
    return static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), y) - ys.begin());
  };

  CoverTree tree(ys);
  Area total = 0;
  Coord prev_x = events.front().x;
  for (const auto& e : events) {
    total += tree.covered() * (std::int64_t{e.x} - prev_x);
    tree.update(index(e.y0), index(e.y1), e.delta);
    prev_x = e.x;
  }
  return total;
}

Area clip_area(std::span<const Rect> rects, const Rect& window) {
  std::vector<Rect> clipped;
  clipped.reserve(rects.size());
  for (const auto& r : rects) {
    if (auto c = intersect(r, window)) clipped.push_back(*c);
  }
  return union_area(clipped);
}

std::vector<Rect> pairwise_intersections(std::span<const Rect> a, std::span<const Rect> b) {
  std::vector<Rect> sorted_b(b.begin(), b.end());
  std::sort(sorted_b.begin(), sorted_b.end(),
            [](const Rect& l, const Rect& r) { return l.x0() < r.x0(); });
  // Largest width bounds how far left of r.x1 a candidate may start.
  std::int64_t max_w = 0;
  for (const auto& r : sorted_b) max_w = std::max(max_w, r.width());

  std::vector<Rect> out;
  for (const auto& r : a) {
    std::int64_t lo_x = std::int64_t{r.x0()} - max_w;
    auto it = std::lower_bound(sorted_b.begin(), sorted_b.end(), lo_x,
                               [](const Rect& s, std::int64_t v) { return s.x0() < v; });
    for (; it != sorted_b.end() && it->x0() < r.x1(); ++it) {
      if (auto c = intersect(r, *it)) out.push_back(*c);
    }
  }
  return out;
}

Area intersection_area(std::span<const Rect> a, std::span<const Rect> b) {
  auto pieces = pairwise_intersections(a, b);
  return union_area(pieces);
}

std::string_view to_string(LayerName l) {
  switch (l) {
    case LayerName::OD: return "OD";
    case LayerName::PO: return "PO";
    case LayerName::NP: return "NP";
    case LayerName::PP: return "PP";
    case LayerName::NW: return "NW";
  }
  return "?";
}

std::optional<LayerName> parse_layer_name(std::string_view s) {
  for (auto l : kAllLayers) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

std::string_view to_string(DeviceKind k) { return k == DeviceKind::NMOS ? "NMOS" : "PMOS"; }

std::optional<DeviceKind> parse_device_kind(std::string_view s) {
  if (s == "NMOS") return DeviceKind::NMOS;
  if (s == "PMOS") return DeviceKind::PMOS;
  return std::nullopt;
}

LayerMap LayerMap::defaults() {
  LayerMap m;
  m.forward_ = {{LayerName::OD, {6, 0}},
                {LayerName::PO, {7, 0}},
                {LayerName::NP, {11, 0}},
                {LayerName::PP, {12, 0}},
                {LayerName::NW, {3, 0}}};
  return m;
}

void LayerMap::set(LayerName name, GdsLayer gds) {
  for (const auto& [n, g] : forward_) {
    if (n != name && g == gds) {
      throw Error("layer map not bijective: (" + std::to_string(gds.layer) + "," +
                  std::to_string(gds.datatype) + ") already used by " + std::string(to_string(n)));
    }
  }
  forward_[name] = gds;
}

LayerMap LayerMap::with_overrides(const std::map<LayerName, GdsLayer>& entries) const {
  LayerMap out = *this;
  for (const auto& [n, g] : entries) out.forward_[n] = g;
  std::map<GdsLayer, LayerName> seen;
  for (const auto& [n, g] : out.forward_) {
    auto [it, fresh] = seen.emplace(g, n);
    if (!fresh) {
      throw Error("layer map not bijective: (" + std::to_string(g.layer) + "," +
                  std::to_string(g.datatype) + ") used by " + std::string(to_string(it->second)) +
                  " and " + std::string(to_string(n)));
    }
  }
  return out;
}

GdsLayer LayerMap::gds(LayerName name) const { return forward_.at(name); }

std::optional<LayerName> LayerMap::lookup(GdsLayer gds) const {
  for (const auto& [n, g] : forward_) {
    if (g == gds) return n;
  }
  return std::nullopt;
}

LayerMap parse_layer_map(std::string_view text) {
  // Apply all entries before checking bijectivity so swaps are expressible.
  std::map<LayerName, GdsLayer> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    int layer = 0, datatype = 0;
    std::string extra;
    if (!(ls >> layer >> datatype) || (ls >> extra)) {
      throw Error("layer map line " + std::to_string(line_no) + ": expected 'NAME layer datatype'");
    }
    auto ln = parse_layer_name(name);
    if (!ln) throw Error("layer map line " + std::to_string(line_no) + ": unknown layer " + name);
    entries[*ln] = {layer, datatype};
  }
  auto merged = LayerMap::defaults();
  return merged.with_overrides(entries);
}

void LayoutDb::set_db_unit(double meters) {
  if (!(meters > 0)) throw Error("db_unit must be positive");
  db_unit_ = meters;
}

Cell& LayoutDb::add_cell(std::string name) {
  if (find_cell(name)) throw Error("duplicate cell name '" + name + "'");
  cells_.push_back(Cell{std::move(name), {}});
  return cells_.back();
}

const Cell* LayoutDb::find_cell(std::string_view name) const {
  for (const auto& c : cells_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

void LayoutDb::add_shape(std::string_view cell, LayerName layer, const Rect& r) {
  for (auto& c : cells_) {
    if (c.name == cell) {
      c.shapes.push_back({layer, r});
      return;
    }
  }
  throw Error("no cell named '" + std::string(cell) + "'");
}

void LayoutDb::add_device(DeviceInstance d) {
  if (d.fingers < 1) throw Error("device '" + d.id + "': fingers must be >= 1");
  for (const auto& g : d.gate_rects) {
    if (!intersect(g, d.active_rect)) throw Error("device '" + d.id + "': gate does not cross the active rect");
  }
  for (const auto& e : devices_) {
    if (e.id == d.id) throw Error("duplicate device id '" + d.id + "'");
  }
  devices_.push_back(std::move(d));
}

std::vector<Rect> LayoutDb::rects_on(LayerName layer) const {
  std::vector<Rect> out;
  for (const auto& c : cells_) {
    for (const auto& s : c.shapes) {
      if (s.layer == layer) out.push_back(s.rect);
    }
  }
  return out;
}

std::optional<Rect> LayoutDb::bbox() const {
  std::optional<Rect> box;
  for (const auto& c : cells_) {
    for (const auto& s : c.shapes) {
      const auto& r = s.rect;
      if (!box) {
        box = r;
      } else {
        box = Rect(std::min(box->x0(), r.x0()), std::min(box->y0(), r.y0()),
                   std::max(box->x1(), r.x1()), std::max(box->y1(), r.y1()));
      }
    }
  }
  return box;
}

LayoutDb LayoutDb::translated(std::int64_t dx, std::int64_t dy) const {
  LayoutDb out = *this;
  for (auto& c : out.cells_) {
    for (auto& s : c.shapes) s.rect = s.rect.translated(dx, dy);
  }
  for (auto& d : out.devices_) {
    d.active_rect = d.active_rect.translated(dx, dy);
    for (auto& g : d.gate_rects) g = g.translated(dx, dy);
  }
  return out;
}

bool same_geometry(const LayoutDb& a, const LayoutDb& b) {
  if (a.cells().size() != b.cells().size()) return false;
  for (std::size_t i = 0; i < a.cells().size(); ++i) {
    const auto& ca = a.cells()[i];
    const auto& cb = b.cells()[i];
    if (ca.name != cb.name) return false;
    auto sa = ca.shapes;
    auto sb = cb.shapes;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return false;
  }
  return true;
}

}  // namespace dfm
