#include "coin/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <string>

namespace coin {
namespace {

constexpr std::byte kMagic[4] = {std::byte{'C'}, std::byte{'O'}, std::byte{'I'},
                                 std::byte{'N'}};
constexpr std::size_t kFixedHeader = 8;

void put_u32_le(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32_le(const std::byte* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

template <typename T>
void append_le(std::vector<std::byte>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::byte>((bits >> (8 * i)) & 0xFFu));
  }
}

template <typename T>
T read_le(const std::byte* p) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits = static_cast<U>(bits | (std::to_integer<U>(p[i]) << (8 * i)));
  }
  return std::bit_cast<T>(bits);
}

bool valid_dtype(std::uint8_t raw) { return raw >= 1 && raw <= 4; }

// Minimal netpbm header reader: magic, then `count` integers, separated by
// whitespace and '#' comments, followed by exactly one whitespace byte.
struct PnmHeader {
  std::string magic;
  std::vector<long> fields;
  std::size_t data_offset = 0;
};

PnmHeader parse_pnm_header(std::span<const std::byte> bytes, int count) {
  PnmHeader h;
  if (bytes.size() < 2) throw FormatError("PNM: file too short for magic");
  h.magic = {static_cast<char>(bytes[0]), static_cast<char>(bytes[1])};
  std::size_t pos = 2;
  auto at = [&](std::size_t i) { return static_cast<char>(bytes[i]); };
  for (int f = 0; f < count; ++f) {
    while (pos < bytes.size()) {
      const char ch = at(pos);
      if (ch == '#') {
        while (pos < bytes.size() && at(pos) != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos;
      } else {
        break;
      }
    }
    long value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(at(pos)))) {
      value = value * 10 + (at(pos) - '0');
      if (value > 1'000'000'000L) throw FormatError("PNM: header field out of range");
      ++pos;
      ++digits;
    }
    if (digits == 0) throw FormatError("PNM: malformed header field " + std::to_string(f));
    h.fields.push_back(value);
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(at(pos)))) {
    throw FormatError("PNM: missing whitespace after header");
  }
  h.data_offset = pos + 1;
  return h;
}

std::vector<std::byte> pgm_header(int width, int height, int maxval) {
  const std::string text = "P5\n" + std::to_string(width) + " " + std::to_string(height) +
                           "\n" + std::to_string(maxval) + "\n";
  std::vector<std::byte> out(text.size());
  std::memcpy(out.data(), text.data(), text.size());
  return out;
}

struct PgmSamples {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint32_t> samples;
};

PgmSamples decode_pgm(std::span<const std::byte> bytes) {
  if (bytes.size() >= 2 && static_cast<char>(bytes[0]) == 'P' &&
      static_cast<char>(bytes[1]) != '5') {
    throw FormatError(std::string("PGM: unsupported magic P") + static_cast<char>(bytes[1]) +
                      " (expected binary P5)");
  }
  const PnmHeader h = parse_pnm_header(bytes, 3);
  if (h.magic != "P5") throw FormatError("PGM: bad magic (expected P5)");
  PgmSamples out;
  out.width = static_cast<int>(h.fields[0]);
  out.height = static_cast<int>(h.fields[1]);
  out.maxval = static_cast<int>(h.fields[2]);
  if (out.maxval < 1 || out.maxval > 65535) throw FormatError("PGM: maxval out of range");
  const std::size_t bps = out.maxval < 256 ? 1 : 2;
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height;
  const std::size_t need = n * bps;
  if (bytes.size() - h.data_offset < need) {
    throw FormatError("PGM: truncated payload: expected " + std::to_string(need) +
                      " bytes, found " + std::to_string(bytes.size() - h.data_offset));
  }
  out.samples.resize(n);
  const std::byte* p = bytes.data() + h.data_offset;
  for (std::size_t i = 0; i < n; ++i) {
    if (bps == 1) {
      out.samples[i] = std::to_integer<std::uint32_t>(p[i]);
    } else {
      out.samples[i] = (std::to_integer<std::uint32_t>(p[2 * i]) << 8) |
                       std::to_integer<std::uint32_t>(p[2 * i + 1]);
    }
    if (out.samples[i] > static_cast<std::uint32_t>(out.maxval)) {
      throw FormatError("PGM: sample exceeds maxval at index " + std::to_string(i));
    }
  }
  return out;
}

}  // namespace

std::size_t dtype_size(CgfDtype dtype) {
  switch (dtype) {
    case CgfDtype::kF32: return 4;
    case CgfDtype::kU8: return 1;
    case CgfDtype::kU16: return 2;
    case CgfDtype::kI32: return 4;
  }
  throw FormatError("unknown dtype");
}

std::string_view dtype_name(CgfDtype dtype) {
  switch (dtype) {
    case CgfDtype::kF32: return "f32";
    case CgfDtype::kU8: return "u8";
    case CgfDtype::kU16: return "u16";
    case CgfDtype::kI32: return "i32";
  }
  return "unknown";
}

std::size_t CgfArray::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::byte> encode_cgf(const CgfArray& array) {
  if (array.dims.size() > 255) throw ArgumentError("CGF: too many dimensions");
  if (array.payload.size() != array.element_count() * dtype_size(array.dtype)) {
    throw ArgumentError("CGF: payload length does not match dims");
  }
  std::vector<std::byte> out;
  out.reserve(kFixedHeader + 4 * array.dims.size() + array.payload.size());
  for (std::byte b : kMagic) out.push_back(b);
  out.push_back(std::byte{kCgfVersion});
  out.push_back(static_cast<std::byte>(array.dtype));
  out.push_back(static_cast<std::byte>(array.dims.size()));
  out.push_back(std::byte{0});
  for (auto d : array.dims) put_u32_le(out, d);
  out.insert(out.end(), array.payload.begin(), array.payload.end());
  return out;
}

CgfArray decode_cgf(std::span<const std::byte> bytes) {
  if (bytes.size() < kFixedHeader) throw FormatError("CGF: truncated header");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError("CGF: bad magic");
  }
  const auto version = std::to_integer<std::uint8_t>(bytes[4]);
  if (version != kCgfVersion) {
    throw FormatError("CGF: unsupported version " + std::to_string(version));
  }
  const auto raw_dtype = std::to_integer<std::uint8_t>(bytes[5]);
  if (!valid_dtype(raw_dtype)) {
    throw FormatError("CGF: unknown dtype " + std::to_string(raw_dtype));
  }
  const auto ndim = std::to_integer<std::uint8_t>(bytes[6]);
  if (std::to_integer<std::uint8_t>(bytes[7]) != 0) {
    throw FormatError("CGF: reserved byte must be 0");
  }
  const std::size_t header = kFixedHeader + 4u * ndim;
  if (bytes.size() < header) throw FormatError("CGF: truncated dims");
  CgfArray out;
  out.dtype = static_cast<CgfDtype>(raw_dtype);
  for (std::size_t i = 0; i < ndim; ++i) {
    out.dims.push_back(get_u32_le(bytes.data() + kFixedHeader + 4 * i));
  }
  const std::size_t need = out.element_count() * dtype_size(out.dtype);
  const std::size_t have = bytes.size() - header;
  if (have < need) {
    throw FormatError("CGF: truncated payload: expected " + std::to_string(need) +
                      " bytes, found " + std::to_string(have));
  }
  if (have > need) {
    throw FormatError("CGF: trailing bytes after payload: expected " + std::to_string(need) +
                      " bytes, found " + std::to_string(have));
  }
  out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

CgfArray read_cgf(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_cgf(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_cgf(const CgfArray& array, const std::filesystem::path& path) {
  write_file(path, encode_cgf(array));
}

std::vector<std::byte> encode_grid(const FeatureGrid& grid) {
  CgfArray a;
  a.dtype = CgfDtype::kF32;
  a.dims = {static_cast<std::uint32_t>(grid.height()), static_cast<std::uint32_t>(grid.width()),
            static_cast<std::uint32_t>(grid.depth())};
  std::vector<std::byte> payload;
  payload.reserve(grid.values().size() * 4);
  for (float v : grid.values()) append_le(payload, v);
  a.payload = std::move(payload);
  return encode_cgf(a);
}

FeatureGrid decode_grid(std::span<const std::byte> bytes) {
  const CgfArray a = decode_cgf(bytes);
  if (a.dtype != CgfDtype::kF32) {
    throw FormatError(std::string("CGF: dtype mismatch: expected f32, found ") +
                      std::string(dtype_name(a.dtype)));
  }
  if (a.dims.size() != 2 && a.dims.size() != 3) {
    throw FormatError("CGF: ndim must be 2 or 3 for a feature grid, found " +
                      std::to_string(a.dims.size()));
  }
  const int depth = a.dims.size() == 3 ? static_cast<int>(a.dims[2]) : 1;
  std::vector<float> data(a.element_count());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = read_le<float>(a.payload.data() + 4 * i);
  return FeatureGrid(static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]), depth,
                     std::move(data));
}

FeatureGrid load_grid(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_grid(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_grid(const FeatureGrid& grid, const std::filesystem::path& path) {
  write_file(path, encode_grid(grid));
}

CgfArray to_cgf(const Grid<float>& grid) {
  CgfArray a;
  a.dtype = CgfDtype::kF32;
  a.dims = {static_cast<std::uint32_t>(grid.height()), static_cast<std::uint32_t>(grid.width())};
  for (float v : grid.values()) append_le(a.payload, v);
  return a;
}

Grid<float> float_grid_from_cgf(const CgfArray& a) {
  if (a.dtype != CgfDtype::kF32) {
    throw FormatError(std::string("CGF: dtype mismatch: expected f32, found ") +
                      std::string(dtype_name(a.dtype)));
  }
  if (a.dims.size() != 2) throw FormatError("CGF: expected a 2-D tensor");
  std::vector<float> data(a.element_count());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = read_le<float>(a.payload.data() + 4 * i);
  return Grid<float>(static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]), std::move(data));
}

void save_u8_grid(const Grid<std::uint8_t>& grid, const std::filesystem::path& path) {
  CgfArray a;
  a.dtype = CgfDtype::kU8;
  a.dims = {static_cast<std::uint32_t>(grid.height()), static_cast<std::uint32_t>(grid.width())};
  a.payload.resize(grid.size());
  std::memcpy(a.payload.data(), grid.values().data(), grid.size());
  write_cgf(a, path);
}

Grid<std::uint8_t> load_u8_grid(const std::filesystem::path& path) {
  const CgfArray a = read_cgf(path);
  if (a.dtype != CgfDtype::kU8) {
    throw FormatError(path.string() + ": CGF: dtype mismatch: expected u8, found " +
                      std::string(dtype_name(a.dtype)));
  }
  if (a.dims.size() != 2) throw FormatError(path.string() + ": CGF: expected a 2-D grid");
  std::vector<std::uint8_t> data(a.payload.size());
  std::memcpy(data.data(), a.payload.data(), data.size());
  return Grid<std::uint8_t>(static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]),
                            std::move(data));
}

std::vector<std::byte> encode_mask_pgm(const BinaryMask& mask) {
  auto out = pgm_header(mask.width(), mask.height(), 255);
  out.reserve(out.size() + mask.size());
  for (auto v : mask.values()) out.push_back(v != 0 ? std::byte{255} : std::byte{0});
  return out;
}

BinaryMask decode_mask_pgm(std::span<const std::byte> bytes) {
  const PgmSamples s = decode_pgm(bytes);
  std::vector<std::uint8_t> data(s.samples.size());
  if (s.maxval == 1) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint8_t>(s.samples[i]);
  } else if (s.maxval == 255) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = s.samples[i] >= 128 ? 1 : 0;
  } else {
    throw FormatError("PGM: binary mask requires maxval 1 or 255, found " +
                      std::to_string(s.maxval));
  }
  return BinaryMask(s.height, s.width, std::move(data));
}

BinaryMask load_mask(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_mask_pgm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  write_file(path, encode_mask_pgm(mask));
}

std::vector<std::byte> encode_instances_pgm(const LabelGrid& labels) {
  auto out = pgm_header(labels.width(), labels.height(), 65535);
  out.reserve(out.size() + 2 * labels.size());
  for (auto v : labels.values()) {
    if (v > 65535u) {
      throw ArgumentError("instance label " + std::to_string(v) + " exceeds 65535");
    }
    out.push_back(static_cast<std::byte>((v >> 8) & 0xFFu));
    out.push_back(static_cast<std::byte>(v & 0xFFu));
  }
  return out;
}

InstanceMap decode_instances_pgm(std::span<const std::byte> bytes) {
  const PgmSamples s = decode_pgm(bytes);
  LabelGrid labels(s.height, s.width, std::vector<std::uint32_t>(s.samples));
  return InstanceMap::compact(labels);
}

InstanceMap load_instances(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_instances_pgm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_instances(const InstanceMap& map, const std::filesystem::path& path) {
  write_file(path, encode_instances_pgm(map.labels()));
}

RgbImage load_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const PnmHeader h = parse_pnm_header(bytes, 3);
  if (h.magic != "P6") throw FormatError(path.string() + ": PPM: bad magic (expected P6)");
  if (h.fields[2] != 255) throw FormatError(path.string() + ": PPM: only maxval 255 supported");
  RgbImage img;
  img.width = static_cast<int>(h.fields[0]);
  img.height = static_cast<int>(h.fields[1]);
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * 3;
  if (bytes.size() - h.data_offset < need) {
    throw FormatError(path.string() + ": PPM: truncated payload");
  }
  img.data.resize(need);
  std::memcpy(img.data.data(), bytes.data() + h.data_offset, need);
  return img;
}

void save_ppm(const RgbImage& image, const std::filesystem::path& path) {
  const std::string text = "P6\n" + std::to_string(image.width) + " " +
                           std::to_string(image.height) + "\n255\n";
  std::vector<std::byte> out(text.size() + image.data.size());
  std::memcpy(out.data(), text.data(), text.size());
  std::memcpy(out.data() + text.size(), image.data.data(), image.data.size());
  write_file(path, out);
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw IoError("read failed for " + path.string());
  }
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::as_bytes(std::span<const char>(text.data(), text.size())));
}

}  // namespace coin
