#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "spdcas/error.hpp"
#include "spdcas/grid.hpp"
#include "spdcas/logic.hpp"

namespace spdcas {

/// Solved action values over a lattice, stage-major, vertex-major, action-minor.
struct QTable {
  LogicKind kind = LogicKind::custom;
  DiscretizationGrid grid;
  std::uint32_t action_count = 0;
  std::vector<float> values;

  std::size_t stage_count() const { return grid.stage_count(); }
  float q(std::size_t vertex, std::size_t action) const { return values[vertex * action_count + action]; }

  void validate() const {
    if (action_count == 0) throw InvalidArgument("table has no actions");
    if (values.size() != grid.vertex_count() * action_count)
      throw InvalidArgument("table holds " + std::to_string(values.size()) + " values, grid needs " +
                            std::to_string(grid.vertex_count() * action_count));
    for (float v : values)
      if (!std::isfinite(v)) throw InvalidArgument("table holds a non-finite value");
  }

  bool operator==(const QTable&) const = default;
};

inline constexpr char kTableMagic[4] = {'Q', 'T', 'B', 'L'};
inline constexpr std::uint32_t kTableFormatVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  out.insert(out.end(), std::begin(bytes), std::end(bytes));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  template <class T>
  T get(const char* field) {
    need(sizeof(T), field);
    std::uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n, const char* field) {
    need(n, field);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n, const char* field) const {
    if (data_.size() - pos_ < n) throw CorruptTable(field, pos_, "unexpected end of data");
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

/// Binary layout (all integers and floats little-endian):
///   "QTBL" | u32 version | u32 logic kind | u32 axis count |
///   per axis: u32 name length, name bytes, u8 unit, u8 categorical, u32 cut count, f64 cuts |
///   u32 action count | u32 stage count | f32 values | u32 CRC32 of everything before it
inline std::vector<std::uint8_t> encode_table(const QTable& t) {
  t.validate();
  std::vector<std::uint8_t> out;
  out.reserve(64 + t.values.size() * sizeof(float));
  out.insert(out.end(), std::begin(kTableMagic), std::end(kTableMagic));
  detail::put_le<std::uint32_t>(out, kTableFormatVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.kind));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.grid.axis_count()));
  for (const Axis& ax : t.grid.axes()) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ax.name.size()));
    out.insert(out.end(), ax.name.begin(), ax.name.end());
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(ax.unit));
    detail::put_le<std::uint8_t>(out, ax.categorical ? 1 : 0);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ax.cuts.size()));
    for (double c : ax.cuts) detail::put_le<double>(out, c);
  }
  detail::put_le<std::uint32_t>(out, t.action_count);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.stage_count()));
  for (float v : t.values) detail::put_le<float>(out, v);
  detail::put_le<std::uint32_t>(out, detail::crc32_of(out));
  return out;
}

inline QTable decode_table(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes);
  in.need(4, "magic");
  if (std::memcmp(bytes.data(), kTableMagic, 4) != 0) throw CorruptTable("magic", 0, "expected \"QTBL\"");
  in.get_string(4, "magic");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kTableFormatVersion)
    throw CorruptTable("version", 4, "unsupported format version " + std::to_string(version));
  QTable t;
  const std::size_t kind_pos = in.pos();
  const auto kind = in.get<std::uint32_t>("logic kind");
  if (kind > 2 && kind != 255) throw CorruptTable("logic kind", kind_pos, "unknown tag " + std::to_string(kind));
  t.kind = static_cast<LogicKind>(kind);
  const auto axis_count = in.get<std::uint32_t>("axis count");
  if (axis_count == 0 || axis_count > kMaxAxes)
    throw CorruptTable("axis count", in.pos() - 4, "implausible axis count " + std::to_string(axis_count));
  std::vector<Axis> axes(axis_count);
  for (Axis& ax : axes) {
    const auto len = in.get<std::uint32_t>("axis name");
    ax.name = in.get_string(len, "axis name");
    const std::size_t unit_pos = in.pos();
    const auto unit = in.get<std::uint8_t>("axis unit");
    if (unit > 4) throw CorruptTable("axis unit", unit_pos, "unknown unit tag");
    ax.unit = static_cast<Unit>(unit);
    ax.categorical = in.get<std::uint8_t>("axis categorical flag") != 0;
    const auto n = in.get<std::uint32_t>("axis cut count");
    in.need(std::size_t{n} * sizeof(double), "axis cuts");
    ax.cuts.resize(n);
    for (double& c : ax.cuts) c = in.get<double>("axis cuts");
  }
  const std::size_t grid_end = in.pos();
  try {
    t.grid = DiscretizationGrid(std::move(axes));
  } catch (const InvalidArgument& e) {
    throw CorruptTable("grid", grid_end, e.what());
  }
  t.action_count = in.get<std::uint32_t>("action count");
  const std::size_t stage_pos = in.pos();
  const auto stages = in.get<std::uint32_t>("stage count");
  if (stages != t.grid.stage_count())
    throw CorruptTable("stage count", stage_pos, "does not match the grid's stage axis");
  const std::size_t n_values = t.grid.vertex_count() * t.action_count;
  if (in.remaining() < n_values * sizeof(float))
    throw CorruptTable("values", in.pos() + (in.remaining() / sizeof(float)) * sizeof(float),
                       "truncated after " + std::to_string(in.remaining() / sizeof(float)) + " of " +
                           std::to_string(n_values) + " values");
  t.values.resize(n_values);
  for (float& v : t.values) v = in.get<float>("values");
  const std::size_t crc_pos = in.pos();
  const auto stored = in.get<std::uint32_t>("crc");
  if (in.remaining() != 0) throw CorruptTable("crc", in.pos(), "trailing bytes after checksum");
  if (stored != detail::crc32_of(bytes.first(crc_pos))) throw CorruptTable("crc", crc_pos, "checksum mismatch");
  return t;
}

inline void save_table(const QTable& t, const std::filesystem::path& path) {
  const auto bytes = encode_table(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline QTable load_table(const std::filesystem::path& path) { return decode_table(read_file_bytes(path)); }

inline nlohmann::json grid_to_json(const DiscretizationGrid& g) {
  nlohmann::json axes = nlohmann::json::array();
  for (const Axis& ax : g.axes()) {
    axes.push_back({{"name", ax.name},
                    {"unit", unit_name(ax.unit)},
                    {"categorical", ax.categorical},
                    {"periodic", ax.periodic()},
                    {"cuts", ax.cuts}});
  }
  return {{"axes", axes}, {"vertex_count", g.vertex_count()}, {"stage_count", g.stage_count()}};
}

/// Inspection dump; values are only included for tables up to `max_values`.
inline nlohmann::json table_to_json(const QTable& t, std::size_t max_values = 100000) {
  nlohmann::json j{{"format_version", kTableFormatVersion},
                   {"logic", to_string(t.kind)},
                   {"action_count", t.action_count},
                   {"stage_count", t.stage_count()},
                   {"grid", grid_to_json(t.grid)}};
  if (t.values.size() <= max_values) j["values"] = t.values;
  return j;
}

}  // namespace spdcas
