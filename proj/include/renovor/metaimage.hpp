#pragma once

// MetaImage (.mhd header + .raw little-endian payload) reader and writer.

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>

#include "renovor/volume.hpp"

namespace renovor {

static_assert(std::endian::native == std::endian::little,
              "MetaImage payloads are read and written as native little-endian");

template <typename T>
struct MetaElementType;
template <>
struct MetaElementType<float> {
  static constexpr const char *name = "MET_FLOAT";
};
template <>
struct MetaElementType<std::int16_t> {
  static constexpr const char *name = "MET_SHORT";
};
template <>
struct MetaElementType<std::uint16_t> {
  static constexpr const char *name = "MET_USHORT";
};
template <>
struct MetaElementType<std::uint8_t> {
  static constexpr const char *name = "MET_UCHAR";
};

using AnyVolume = std::variant<Volume<float>, Volume<std::int16_t>, Volume<std::uint16_t>,
                               Volume<std::uint8_t>>;

namespace detail {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(const std::string &s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename N>
std::array<N, 3> parse_triple(const std::string &key, const std::string &value)
{
  std::array<N, 3> out{};
  std::istringstream in(value);
  for (int i = 0; i < 3; ++i) {
    std::string tok;
    if (!(in >> tok)) throw DataError("MetaImage: " + key + " needs three values");
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out[i]);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      throw DataError("MetaImage: cannot parse " + key + " value '" + tok + "'");
  }
  return out;
}

struct MetaHeader {
  VolumeGeometry geometry;
  std::string element_type;
  std::filesystem::path data_file;
};

inline MetaHeader read_header(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in) throw IoError("cannot open MetaImage header " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  const auto need = [&](const std::string &k) -> const std::string & {
    const auto it = kv.find(k);
    if (it == kv.end()) throw DataError("MetaImage header missing " + k);
    return it->second;
  };
  if (need("NDims") != "3") throw DataError("MetaImage: only NDims = 3 is supported");
  if (auto it = kv.find("ElementByteOrderMSB"); it != kv.end() && it->second != "False")
    throw DataError("MetaImage: big-endian payloads are not supported");
  if (auto it = kv.find("CompressedData"); it != kv.end() && it->second != "False")
    throw DataError("MetaImage: compressed payloads are not supported");

  MetaHeader h;
  h.geometry.dims = parse_triple<long>("DimSize", need("DimSize"));
  if (auto it = kv.find("ElementSpacing"); it != kv.end())
    h.geometry.spacing = parse_triple<double>("ElementSpacing", it->second);
  if (auto it = kv.find("Offset"); it != kv.end())
    h.geometry.origin = parse_triple<double>("Offset", it->second);
  h.geometry.validate();
  h.element_type = need("ElementType");
  const std::string &file = need("ElementDataFile");
  if (file == "LOCAL" || file == "LIST")
    throw DataError("MetaImage: ElementDataFile = " + file + " is not supported");
  h.data_file = path.parent_path() / file;
  return h;
}

template <typename T>
Volume<T> read_payload(const MetaHeader &h)
{
  const std::size_t count = h.geometry.voxel_count();
  const std::size_t bytes = count * sizeof(T);
  std::error_code ec;
  const auto size = std::filesystem::file_size(h.data_file, ec);
  if (ec) throw IoError("cannot open MetaImage payload " + h.data_file.string());
  if (size != bytes)
    throw DataError("MetaImage payload " + h.data_file.string() + " holds " + std::to_string(size) +
                    " bytes, header implies " + std::to_string(bytes));
  std::ifstream in(h.data_file, std::ios::binary);
  if (!in) throw IoError("cannot open MetaImage payload " + h.data_file.string());
  std::vector<T> data(count);
  in.read(reinterpret_cast<char *>(data.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("short read from " + h.data_file.string());
  if constexpr (std::is_floating_point_v<T>) {
    for (const T v : data)
      if (!std::isfinite(v)) throw DataError("MetaImage payload contains non-finite values");
  }
  return Volume<T>(h.geometry, std::move(data));
}

} // namespace detail

/// Reads a volume in whatever element type the header declares.
inline AnyVolume read_metaimage(const std::filesystem::path &header_path)
{
  const auto h = detail::read_header(header_path);
  if (h.element_type == "MET_FLOAT") return detail::read_payload<float>(h);
  if (h.element_type == "MET_SHORT") return detail::read_payload<std::int16_t>(h);
  if (h.element_type == "MET_USHORT") return detail::read_payload<std::uint16_t>(h);
  if (h.element_type == "MET_UCHAR") return detail::read_payload<std::uint8_t>(h);
  throw DataError("MetaImage: unsupported ElementType " + h.element_type);
}

/// Loads any supported element type as float intensities.
inline ScalarVolume load_scalar(const std::filesystem::path &header_path)
{
  return std::visit(
      [](const auto &v) -> ScalarVolume {
        using T = typename std::decay_t<decltype(v)>::value_type;
        if constexpr (std::is_same_v<T, float>) {
          return v;
        } else {
          std::vector<float> d(v.data().begin(), v.data().end());
          return ScalarVolume(v.geometry(), std::move(d));
        }
      },
      read_metaimage(header_path));
}

/// Loads an integer label volume. Float payloads are rejected unless every
/// value is a whole number in the 16-bit unsigned range.
inline LabelVolume load_labels(const std::filesystem::path &header_path)
{
  return std::visit(
      [](const auto &v) -> LabelVolume {
        using T = typename std::decay_t<decltype(v)>::value_type;
        if constexpr (std::is_same_v<T, std::uint16_t>) {
          return v;
        } else {
          std::vector<std::uint16_t> d(v.size());
          for (std::size_t i = 0; i < v.size(); ++i) {
            const auto x = v[i];
            const double xd = static_cast<double>(x);
            if (xd < 0 || xd > 65535 || xd != std::floor(xd))
              throw DataError("label volume holds values outside 0..65535 integers");
            d[i] = static_cast<std::uint16_t>(x);
          }
          return LabelVolume(v.geometry(), std::move(d));
        }
      },
      read_metaimage(header_path));
}

/// Writes `<stem>.mhd` and `<stem>.raw` next to each other. The path may be
/// given with or without the .mhd extension.
template <typename T>
void save_metaimage(const Volume<T> &vol, std::filesystem::path header_path)
{
  if (header_path.extension() != ".mhd") header_path += ".mhd";
  std::filesystem::path raw_path = header_path;
  raw_path.replace_extension(".raw");

  const auto &g = vol.geometry();
  std::ostringstream hdr;
  hdr << "ObjectType = Image\n"
      << "NDims = 3\n"
      << "DimSize = " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << '\n'
      << "ElementSpacing = " << detail::format_double(g.spacing[0]) << ' '
      << detail::format_double(g.spacing[1]) << ' ' << detail::format_double(g.spacing[2]) << '\n'
      << "Offset = " << detail::format_double(g.origin[0]) << ' '
      << detail::format_double(g.origin[1]) << ' ' << detail::format_double(g.origin[2]) << '\n'
      << "ElementType = " << MetaElementType<T>::name << '\n'
      << "ElementByteOrderMSB = False\n"
      << "ElementDataFile = " << raw_path.filename().string() << '\n';

  {
    std::ofstream out(raw_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + raw_path.string());
    out.write(reinterpret_cast<const char *>(vol.data().data()),
              static_cast<std::streamsize>(vol.size() * sizeof(T)));
    if (!out) throw IoError("write failed for " + raw_path.string());
  }
  std::ofstream out(header_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + header_path.string());
  out << hdr.str();
  if (!out) throw IoError("write failed for " + header_path.string());
}

} // namespace renovor
