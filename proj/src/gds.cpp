#include "dfm/gds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dfm::gds {

namespace {

using Kind = GdsError::Kind;

constexpr std::uint16_t kVersion = 600;
// Fixed modification/access stamp keeps output byte-reproducible.
constexpr std::int16_t kStamp[6] = {2000, 1, 1, 0, 0, 0};

bool is_supported(std::uint16_t code) {
  switch (static_cast<RecordType>(code)) {
    case RecordType::Header:
    case RecordType::BgnLib:
    case RecordType::LibName:
    case RecordType::Units:
    case RecordType::EndLib:
    case RecordType::BgnStr:
    case RecordType::StrName:
    case RecordType::EndStr:
    case RecordType::Boundary:
    case RecordType::Layer:
    case RecordType::DataType:
    case RecordType::Xy:
    case RecordType::EndEl:
      return true;
  }
  return false;
}

std::string hex16(std::uint16_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(4);
  os.fill('0');
  os << v;
  return os.str();
}

class Writer {
 public:
  void record(RecordType t, std::span<const std::uint8_t> payload = {}) {
    std::size_t len = 4 + payload.size();
    if (len > 0xFFFE) throw GdsError(GdsError::Kind::Malformed, 0, "record payload too large for GDSII");
    auto code = static_cast<std::uint16_t>(t);
    put16(static_cast<std::uint16_t>(len));
    put16(code);
    out_.insert(out_.end(), payload.begin(), payload.end());
  }
  void int16s(RecordType t, std::span<const std::int16_t> values) {
    std::vector<std::uint8_t> p;
    for (auto v : values) {
      auto u = static_cast<std::uint16_t>(v);
      p.push_back(static_cast<std::uint8_t>(u >> 8));
      p.push_back(static_cast<std::uint8_t>(u));
    }
    record(t, p);
  }
  void int32s(RecordType t, std::span<const std::int32_t> values) {
    std::vector<std::uint8_t> p;
    for (auto v : values) {
      auto u = static_cast<std::uint32_t>(v);
      for (int s = 24; s >= 0; s -= 8) p.push_back(static_cast<std::uint8_t>(u >> s));
    }
    record(t, p);
  }
  void ascii(RecordType t, const std::string& s) {
    std::vector<std::uint8_t> p(s.begin(), s.end());
    if (p.size() % 2) p.push_back(0);
    record(t, p);
  }
  void reals(RecordType t, std::span<const double> values) {
    std::vector<std::uint8_t> p;
    for (auto v : values) {
      auto bits = encode_real8(v);
      for (int s = 56; s >= 0; s -= 8) p.push_back(static_cast<std::uint8_t>(bits >> s));
    }
    record(t, p);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  std::vector<std::uint8_t> out_;
};

std::int16_t get16(const std::vector<std::uint8_t>& p, std::size_t i) {
  return static_cast<std::int16_t>((p[i] << 8) | p[i + 1]);
}
std::int32_t get32(const std::vector<std::uint8_t>& p, std::size_t i) {
  std::uint32_t u = (std::uint32_t{p[i]} << 24) | (std::uint32_t{p[i + 1]} << 16) |
                    (std::uint32_t{p[i + 2]} << 8) | std::uint32_t{p[i + 3]};
  return static_cast<std::int32_t>(u);
}
std::uint64_t get64(const std::vector<std::uint8_t>& p, std::size_t i) {
  std::uint64_t u = 0;
  for (int k = 0; k < 8; ++k) u = (u << 8) | p[i + k];
  return u;
}
std::string get_ascii(const std::vector<std::uint8_t>& p) {
  std::string s(p.begin(), p.end());
  while (!s.empty() && s.back() == '\0') s.pop_back();
  return s;
}

}  // namespace

std::uint64_t encode_real8(double v) {
  if (v == 0.0) return 0;
  std::uint64_t sign = 0;
  if (v < 0) {
    sign = 1;
    v = -v;
  }
  // v = m * 16^(e-64), 1/16 <= m < 1
  int exp2 = 0;
  double frac = std::frexp(v, &exp2);  // v = frac * 2^exp2, 0.5 <= frac < 1
  int e16 = static_cast<int>(std::ceil(exp2 / 4.0));
  double m = std::ldexp(frac, exp2 - 4 * e16);  // in [1/16, 1)
  int biased = e16 + 64;
  if (biased < 0 || biased > 127) throw Error("value out of GDSII real range");
  auto mantissa = static_cast<std::uint64_t>(std::ldexp(m, 56));
  return (sign << 63) | (static_cast<std::uint64_t>(biased) << 56) | (mantissa & 0x00FFFFFFFFFFFFFFULL);
}

double decode_real8(std::uint64_t bits) {
  std::uint64_t mantissa = bits & 0x00FFFFFFFFFFFFFFULL;
  int biased = static_cast<int>((bits >> 56) & 0x7F);
  double v = std::ldexp(static_cast<double>(mantissa), 4 * (biased - 64) - 56);
  return (bits >> 63) ? -v : v;
}

std::vector<Record> read_records(std::span<const std::uint8_t> bytes) {
  std::vector<Record> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 4) {
      throw GdsError(Kind::TruncatedStream, pos, "truncated record header at offset " + std::to_string(pos));
    }
    std::uint16_t len = static_cast<std::uint16_t>((bytes[pos] << 8) | bytes[pos + 1]);
    std::uint16_t code = static_cast<std::uint16_t>((bytes[pos + 2] << 8) | bytes[pos + 3]);
    if (len < 4 || len % 2) {
      throw GdsError(Kind::Malformed, pos,
                     "bad record length " + std::to_string(len) + " at offset " + std::to_string(pos));
    }
    if (!is_supported(code)) {
      throw GdsError(Kind::UnknownRecord, pos,
                     "unsupported record " + hex16(code) + " at offset " + std::to_string(pos));
    }
    if (bytes.size() - pos < len) {
      throw GdsError(Kind::TruncatedStream, pos,
                     "record at offset " + std::to_string(pos) + " declares " + std::to_string(len) +
                         " bytes, " + std::to_string(bytes.size() - pos) + " remain");
    }
    Record r;
    r.length = len;
    r.rectype = static_cast<std::uint8_t>(code >> 8);
    r.datatype_code = static_cast<std::uint8_t>(code);
    r.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos + 4),
                     bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
    out.push_back(std::move(r));
    pos += len;
    if (static_cast<RecordType>(code) == RecordType::EndLib) break;
  }
  return out;
}

LayoutDb parse(std::span<const std::uint8_t> bytes, const LayerMap& map) {
  auto records = read_records(bytes);
  std::vector<std::size_t> offsets;
  {
    std::size_t pos = 0;
    for (const auto& r : records) {
      offsets.push_back(pos);
      pos += r.length;
    }
  }

  LayoutDb db;
  db.set_layer_map(map);
  if (records.empty() || static_cast<RecordType>((records[0].rectype << 8) | records[0].datatype_code) !=
                             RecordType::Header) {
    throw GdsError(Kind::Malformed, 0, "stream does not begin with HEADER");
  }

  auto type_of = [](const Record& r) { return static_cast<RecordType>((r.rectype << 8) | r.datatype_code); };
  auto need = [&](std::size_t i, std::size_t bytes_needed) {
    if (records[i].payload.size() < bytes_needed) {
      throw GdsError(Kind::Malformed, offsets[i],
                     "record at offset " + std::to_string(offsets[i]) + " has short payload");
    }
  };

  std::string cell;
  bool in_cell = false;
  bool ended = false;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    switch (type_of(r)) {
      case RecordType::BgnLib:
      case RecordType::LibName:
        break;
      case RecordType::Units: {
        need(i, 16);
        double meters = decode_real8(get64(r.payload, 8));
        if (!(meters > 0)) throw GdsError(Kind::Malformed, offsets[i], "non-positive database unit");
        db.set_db_unit(meters);
        break;
      }
      case RecordType::BgnStr:
        if (in_cell) throw GdsError(Kind::Malformed, offsets[i], "nested BGNSTR at offset " + std::to_string(offsets[i]));
        in_cell = true;
        cell.clear();
        break;
      case RecordType::StrName:
        if (!in_cell) throw GdsError(Kind::Malformed, offsets[i], "STRNAME outside structure");
        cell = get_ascii(r.payload);
        try {
          db.add_cell(cell);
        } catch (const Error& e) {
          throw GdsError(Kind::Malformed, offsets[i], e.what());
        }
        break;
      case RecordType::EndStr:
        in_cell = false;
        break;
      case RecordType::Boundary: {
        if (!in_cell || cell.empty()) {
          throw GdsError(Kind::Malformed, offsets[i], "BOUNDARY outside named structure");
        }
        std::size_t start = offsets[i];
        int layer = -1, datatype = -1;
        std::vector<std::int32_t> xy;
        bool closed = false;
        for (++i; i < records.size(); ++i) {
          const auto& e = records[i];
          auto t = type_of(e);
          if (t == RecordType::Layer) {
            need(i, 2);
            layer = get16(e.payload, 0);
          } else if (t == RecordType::DataType) {
            need(i, 2);
            datatype = get16(e.payload, 0);
          } else if (t == RecordType::Xy) {
            if (e.payload.size() % 8) throw GdsError(Kind::Malformed, offsets[i], "XY payload not a multiple of 8");
            for (std::size_t k = 0; k < e.payload.size(); k += 4) xy.push_back(get32(e.payload, k));
          } else if (t == RecordType::EndEl) {
            closed = true;
            break;
          } else {
            throw GdsError(Kind::Malformed, offsets[i],
                           "unexpected record inside BOUNDARY at offset " + std::to_string(offsets[i]));
          }
        }
        if (!closed) throw GdsError(Kind::TruncatedStream, start, "BOUNDARY without ENDEL");
        if (layer < 0 || datatype < 0) {
          throw GdsError(Kind::Malformed, start, "BOUNDARY at offset " + std::to_string(start) + " lacks LAYER/DATATYPE");
        }
        auto name = map.lookup({layer, datatype});
        if (!name) {
          throw GdsError(Kind::UnmappedLayer, start,
                         "unmapped layer (" + std::to_string(layer) + ", " + std::to_string(datatype) +
                             ") at offset " + std::to_string(start));
        }
        auto non_rect = [&] {
          std::ostringstream os;
          os << "non-rectangular BOUNDARY in cell '" << cell << "' at offset " << start << ": xy=[";
          for (std::size_t k = 0; k < xy.size(); ++k) os << (k ? "," : "") << xy[k];
          os << "]";
          return GdsError(Kind::NonRectBoundary, start, os.str());
        };
        if (xy.size() != 10 || xy[0] != xy[8] || xy[1] != xy[9]) throw non_rect();
        std::int32_t xs[4], ys[4];
        for (int k = 0; k < 4; ++k) {
          xs[k] = xy[2 * k];
          ys[k] = xy[2 * k + 1];
        }
        // Consecutive edges must alternate horizontal/vertical.
        bool ok_a = true, ok_b = true;
        for (int k = 0; k < 4; ++k) {
          int n = (k + 1) % 4;
          bool horiz = ys[k] == ys[n] && xs[k] != xs[n];
          bool vert = xs[k] == xs[n] && ys[k] != ys[n];
          ok_a = ok_a && ((k % 2 == 0) ? horiz : vert);
          ok_b = ok_b && ((k % 2 == 0) ? vert : horiz);
        }
        if (!ok_a && !ok_b) throw non_rect();
        auto [xmin, xmax] = std::minmax({xs[0], xs[1], xs[2], xs[3]});
        auto [ymin, ymax] = std::minmax({ys[0], ys[1], ys[2], ys[3]});
        db.add_shape(cell, *name, Rect(xmin, ymin, xmax, ymax));
        break;
      }
      case RecordType::EndLib:
        ended = true;
        break;
      case RecordType::Header:
      case RecordType::Layer:
      case RecordType::DataType:
      case RecordType::Xy:
      case RecordType::EndEl:
        throw GdsError(Kind::Malformed, offsets[i], "out-of-place record at offset " + std::to_string(offsets[i]));
    }
  }
  if (!ended) throw GdsError(Kind::TruncatedStream, bytes.size(), "stream ends without ENDLIB");
  if (in_cell) throw GdsError(Kind::TruncatedStream, bytes.size(), "structure not closed by ENDSTR");
  return db;
}

std::vector<std::uint8_t> write(const LayoutDb& db, const std::string& libname) {
  Writer w;
  const std::int16_t version[1] = {static_cast<std::int16_t>(kVersion)};
  w.int16s(RecordType::Header, version);
  std::int16_t stamps[12];
  for (int k = 0; k < 12; ++k) stamps[k] = kStamp[k % 6];
  w.int16s(RecordType::BgnLib, stamps);
  w.ascii(RecordType::LibName, libname);
  // user unit = 1 um
  const double units[2] = {db.db_unit() / 1e-6, db.db_unit()};
  w.reals(RecordType::Units, units);
  for (const auto& cell : db.cells()) {
    w.int16s(RecordType::BgnStr, stamps);
    w.ascii(RecordType::StrName, cell.name);
    for (const auto& s : cell.shapes) {
      auto g = db.layer_map().gds(s.layer);
      if (g.layer < 0 || g.layer > 32767 || g.datatype < 0 || g.datatype > 32767) {
        throw GdsError(Kind::CoordOverflow, 0, "layer number outside 2-byte range");
      }
      w.record(RecordType::Boundary);
      const std::int16_t layer[1] = {static_cast<std::int16_t>(g.layer)};
      const std::int16_t dt[1] = {static_cast<std::int16_t>(g.datatype)};
      w.int16s(RecordType::Layer, layer);
      w.int16s(RecordType::DataType, dt);
      const auto& r = s.rect;
      const std::int32_t xy[10] = {r.x0(), r.y0(), r.x1(), r.y0(), r.x1(), r.y1(), r.x0(), r.y1(), r.x0(), r.y0()};
      w.int32s(RecordType::Xy, xy);
      w.record(RecordType::EndEl);
    }
    w.record(RecordType::EndStr);
  }
  w.record(RecordType::EndLib);
  return w.take();
}

}  // namespace dfm::gds
