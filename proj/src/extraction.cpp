#include "dfm/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

namespace dfm {

namespace {

using Kind = ExtractionError::Kind;

// OD shapes carrying the requested implant; members may overlap.
std::vector<Rect> covered_od(const LayoutDb& db, ImplantFilter implant) {
  auto od = db.rects_on(LayerName::OD);
  switch (implant) {
    case ImplantFilter::Any: return od;
    case ImplantFilter::Nplus: return pairwise_intersections(od, db.rects_on(LayerName::NP));
    case ImplantFilter::Pplus: return pairwise_intersections(od, db.rects_on(LayerName::PP));
  }
  return {};
}

double clipped_fraction(std::span<const Rect> rects, const Rect& window) {
  return static_cast<double>(clip_area(rects, window)) / static_cast<double>(rect_area(window));
}

struct FrameCandidates {
  std::vector<Rect> below, above, left, right;
};

FrameCandidates frame_candidates(const std::vector<Rect>& od, const Rect& a) {
  FrameCandidates c;
  for (const auto& r : od) {
    bool spans_x = r.x0() <= a.x0() && r.x1() >= a.x1();
    bool spans_y = r.y0() <= a.y0() && r.y1() >= a.y1();
    if (spans_x && r.y1() <= a.y0()) c.below.push_back(r);
    if (spans_x && r.y0() >= a.y1()) c.above.push_back(r);
    if (spans_y && r.x1() <= a.x0()) c.left.push_back(r);
    if (spans_y && r.x0() >= a.x1()) c.right.push_back(r);
  }
  return c;
}

}  // namespace

std::string_view to_string(Implant i) { return i == Implant::Nplus ? "Nplus" : "Pplus"; }

std::string_view to_string(RingClass c) {
  switch (c) {
    case RingClass::None: return "None";
    case RingClass::Single: return "Single";
    case RingClass::Double: return "Double";
  }
  return "?";
}

std::vector<GuardRingInfo> detect_guard_rings(const LayoutDb& db, const DeviceInstance& device) {
  const Rect& a = device.active_rect;
  auto od = db.rects_on(LayerName::OD);
  auto cand = frame_candidates(od, a);
  auto np = db.rects_on(LayerName::NP);
  auto pp = db.rects_on(LayerName::PP);

  std::vector<GuardRingInfo> rings;
  for (const auto& b : cand.below) {
    for (const auto& t : cand.above) {
      for (const auto& l : cand.left) {
        if (l.y0() < b.y0() || l.y1() > t.y1()) continue;
        for (const auto& r : cand.right) {
          if (r.y0() < b.y0() || r.y1() > t.y1()) continue;
          // Outer edges are carried by the side pieces, inner edges likewise.
          std::int64_t ox0 = l.x0(), ox1 = r.x1(), oy0 = b.y0(), oy1 = t.y1();
          if (std::min(b.x0(), t.x0()) < ox0 || std::max(b.x1(), t.x1()) > ox1) continue;
          std::int64_t ix0 = l.x1(), ix1 = r.x0(), iy0 = b.y1(), iy1 = t.y0();
          if (!(ix0 < ix1 && iy0 < iy1)) continue;
          Rect outer(ox0, oy0, ox1, oy1);
          Rect inner(ix0, iy0, ix1, iy1);
          if (!inner.contains(a)) continue;
          const Rect pieces[4] = {b, t, l, r};
          bool clear = std::none_of(std::begin(pieces), std::end(pieces),
                                    [&](const Rect& p) { return p.overlaps(inner); });
          if (!clear) continue;
          Area frame = rect_area(outer) - rect_area(inner);
          if (union_area(pieces) != frame) continue;
          bool seen = std::any_of(rings.begin(), rings.end(),
                                  [&](const GuardRingInfo& g) { return g.inner == inner && g.outer == outer; });
          if (seen) continue;

          std::int64_t widths[4] = {std::int64_t{inner.y0()} - outer.y0(), std::int64_t{outer.y1()} - inner.y1(),
                                    std::int64_t{inner.x0()} - outer.x0(), std::int64_t{outer.x1()} - inner.x1()};
          auto [wmin, wmax] = std::minmax_element(std::begin(widths), std::end(widths));
          if (*wmax - *wmin > 1) {
            std::ostringstream os;
            os << "guard ring side widths differ (bottom " << widths[0] << ", top " << widths[1] << ", left "
               << widths[2] << ", right " << widths[3] << " nm)";
            throw ExtractionError(Kind::NonUniformWidth, device.id, os.str());
          }

          double p_cov = static_cast<double>(intersection_area(pieces, pp)) / static_cast<double>(frame);
          double n_cov = static_cast<double>(intersection_area(pieces, np)) / static_cast<double>(frame);
          bool is_p = p_cov >= kImplantCoverage;
          bool is_n = n_cov >= kImplantCoverage;
          if (is_p == is_n) {
            std::ostringstream os;
            os << "guard ring implant ambiguous (PP covers " << p_cov * 100 << "%, NP covers " << n_cov * 100
               << "%)";
            throw ExtractionError(Kind::AmbiguousImplant, device.id, os.str());
          }
          rings.push_back({is_p ? Implant::Pplus : Implant::Nplus, inner, outer, *wmin});
        }
      }
    }
  }
  std::sort(rings.begin(), rings.end(), [](const GuardRingInfo& x, const GuardRingInfo& y) {
    return rect_area(x.inner) < rect_area(y.inner);
  });
  return rings;
}

std::int64_t extract_sti_width(const DeviceInstance& device, const GuardRingInfo& ring) {
  const Rect& a = device.active_rect;
  const Rect& i = ring.inner;
  std::int64_t gaps[4] = {std::int64_t{a.x0()} - i.x0(), std::int64_t{a.y0()} - i.y0(),
                          std::int64_t{i.x1()} - a.x1(), std::int64_t{i.y1()} - a.y1()};
  std::int64_t g = *std::min_element(std::begin(gaps), std::end(gaps));
  if (g <= 0) {
    throw ExtractionError(Kind::Overlap, device.id, "active rect crosses or abuts guard ring opening");
  }
  return g;
}

double window_density(const LayoutDb& db, ImplantFilter implant, std::pair<Coord, Coord> center,
                      std::int64_t window) {
  auto rects = covered_od(db, implant);
  return clipped_fraction(rects, square_window(center, window));
}

DensityMap density_map(const LayoutDb& db, ImplantFilter implant, const Rect& region, std::int64_t step,
                       std::int64_t window) {
  if (step <= 0) throw Error("density map step must be positive");
  if (window <= 0) throw Error("density map window must be positive");
  DensityMap m;
  m.step = step;
  m.window = window;
  m.nx = static_cast<std::size_t>(region.width() / step) + 1;
  m.ny = static_cast<std::size_t>(region.height() / step) + 1;
  std::int64_t ox = region.x0() + (region.width() - static_cast<std::int64_t>(m.nx - 1) * step) / 2;
  std::int64_t oy = region.y0() + (region.height() - static_cast<std::int64_t>(m.ny - 1) * step) / 2;
  m.origin = {static_cast<Coord>(ox), static_cast<Coord>(oy)};
  m.values.assign(m.nx * m.ny, 0.0);

  auto rects = covered_od(db, implant);
  auto fill_rows = [&](std::size_t row_begin, std::size_t row_end) {
    for (std::size_t iy = row_begin; iy < row_end; ++iy) {
      for (std::size_t ix = 0; ix < m.nx; ++ix) {
        std::pair<Coord, Coord> c{static_cast<Coord>(ox + static_cast<std::int64_t>(ix) * step),
                                  static_cast<Coord>(oy + static_cast<std::int64_t>(iy) * step)};
        m.values[iy * m.nx + ix] = clipped_fraction(rects, square_window(c, window));
      }
    }
  };

  // Rows are independent; each thread owns a contiguous block.
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, m.ny);
  if (workers <= 1) {
    fill_rows(0, m.ny);
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (m.ny + workers - 1) / workers;
    for (std::size_t b = 0; b < m.ny; b += chunk) pool.emplace_back(fill_rows, b, std::min(m.ny, b + chunk));
    for (auto& t : pool) t.join();
  }
  return m;
}

std::string density_map_csv(const DensityMap& m) {
  std::string out;
  char buf[32];
  for (std::size_t iy = 0; iy < m.ny; ++iy) {
    for (std::size_t ix = 0; ix < m.nx; ++ix) {
      std::snprintf(buf, sizeof buf, "%s%.6f", ix ? "," : "", m.at(ix, iy));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string density_map_pgm(const DensityMap& m) {
  std::ostringstream os;
  os << "P2\n" << m.nx << ' ' << m.ny << "\n255\n";
  for (std::size_t r = 0; r < m.ny; ++r) {
    std::size_t iy = m.ny - 1 - r;
    for (std::size_t ix = 0; ix < m.nx; ++ix) {
      os << (ix ? " " : "") << std::lround(m.at(ix, iy) * 255.0);
    }
    os << '\n';
  }
  return os.str();
}

DeviceContext extract_device_context(const LayoutDb& db, const DeviceInstance& device, std::int64_t window) {
  DeviceContext ctx;
  ctx.device_id = device.id;
  ctx.kind = device.kind;
  ctx.rings = detect_guard_rings(db, device);
  switch (ctx.rings.size()) {
    case 0: ctx.ring_class = RingClass::None; break;
    case 1: ctx.ring_class = RingClass::Single; break;
    case 2: ctx.ring_class = RingClass::Double; break;
    default:
      throw ExtractionError(Kind::MoreThanTwoRings, device.id,
                            std::to_string(ctx.rings.size()) + " guard rings found; at most 2 supported");
  }
  if (!ctx.rings.empty()) ctx.sti_width = extract_sti_width(device, ctx.rings.front());
  auto center = center_of(device.active_rect);
  ctx.d_nod = window_density(db, ImplantFilter::Nplus, center, window);
  ctx.d_pod = window_density(db, ImplantFilter::Pplus, center, window);
  return ctx;
}

}  // namespace dfm
