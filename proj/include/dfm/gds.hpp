#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dfm/layout_core.hpp"

namespace dfm::gds {

// Record type + data type code, as the second header word.
enum class RecordType : std::uint16_t {
  Header = 0x0002,
  BgnLib = 0x0102,
  LibName = 0x0206,
  Units = 0x0305,
  EndLib = 0x0400,
  BgnStr = 0x0502,
  StrName = 0x0606,
  EndStr = 0x0700,
  Boundary = 0x0800,
  Layer = 0x0D02,
  DataType = 0x0E02,
  Xy = 0x1003,
  EndEl = 0x1100,
};

struct Record {
  std::uint16_t length = 4;  // includes the 4-byte header
  std::uint8_t rectype = 0;
  std::uint8_t datatype_code = 0;
  std::vector<std::uint8_t> payload;
};

class GdsError : public Error {
 public:
  enum class Kind { TruncatedStream, UnknownRecord, NonRectBoundary, UnmappedLayer, Malformed, CoordOverflow };

  GdsError(Kind kind, std::size_t offset, const std::string& what)
      : Error(what), kind_(kind), offset_(offset) {}

  Kind kind() const { return kind_; }
  /// Byte offset of the offending record (0 for writer errors).
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

/// Excess-64 base-16 8-byte real.
std::uint64_t encode_real8(double v);
double decode_real8(std::uint64_t bits);

/// Splits a stream into records without interpreting them.
std::vector<Record> read_records(std::span<const std::uint8_t> bytes);

LayoutDb parse(std::span<const std::uint8_t> bytes, const LayerMap& map = LayerMap::defaults());
/// Device annotations are not carried by the stream.
std::vector<std::uint8_t> write(const LayoutDb& db, const std::string& libname = "DFMLIB");

}  // namespace dfm::gds
