#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "coin/grid.hpp"

namespace coin {

// CGF container: "COIN" | u8 version=1 | u8 dtype | u8 ndim | u8 reserved=0 |
// ndim x u32 LE dims (H, W[, D]) | row-major little-endian payload.
enum class CgfDtype : std::uint8_t {
  kF32 = 1,
  kU8 = 2,
  kU16 = 3,
  kI32 = 4,
};

inline constexpr std::uint8_t kCgfVersion = 1;

std::size_t dtype_size(CgfDtype dtype);
std::string_view dtype_name(CgfDtype dtype);

struct CgfArray {
  CgfDtype dtype = CgfDtype::kF32;
  std::vector<std::uint32_t> dims;
  std::vector<std::byte> payload;  // already little-endian

  std::size_t element_count() const;
};

std::vector<std::byte> encode_cgf(const CgfArray& array);
CgfArray decode_cgf(std::span<const std::byte> bytes);

CgfArray read_cgf(const std::filesystem::path& path);
void write_cgf(const CgfArray& array, const std::filesystem::path& path);

std::vector<std::byte> encode_grid(const FeatureGrid& grid);
FeatureGrid decode_grid(std::span<const std::byte> bytes);
FeatureGrid load_grid(const std::filesystem::path& path);
void save_grid(const FeatureGrid& grid, const std::filesystem::path& path);

// 2-D float32 grids (one parameter tensor per file in checkpoints).
CgfArray to_cgf(const Grid<float>& grid);
Grid<float> float_grid_from_cgf(const CgfArray& array);

// u8 label grids, e.g. pseudo targets with kIgnore.
void save_u8_grid(const Grid<std::uint8_t>& grid, const std::filesystem::path& path);
Grid<std::uint8_t> load_u8_grid(const std::filesystem::path& path);

// PGM P5. Binary masks are written with maxval 255; maxval 1 and 255 are read
// (255 thresholded at 128). Instance maps use 16-bit big-endian samples.
std::vector<std::byte> encode_mask_pgm(const BinaryMask& mask);
BinaryMask decode_mask_pgm(std::span<const std::byte> bytes);
BinaryMask load_mask(const std::filesystem::path& path);
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

std::vector<std::byte> encode_instances_pgm(const LabelGrid& labels);
InstanceMap decode_instances_pgm(std::span<const std::byte> bytes);
InstanceMap load_instances(const std::filesystem::path& path);
void save_instances(const InstanceMap& map, const std::filesystem::path& path);

RgbImage load_ppm(const std::filesystem::path& path);
void save_ppm(const RgbImage& image, const std::filesystem::path& path);

std::vector<std::byte> read_file(const std::filesystem::path& path);
// Writes to a sibling temp file and renames into place.
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace coin
