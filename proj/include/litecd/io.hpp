#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "litecd/di.hpp"
#include "litecd/model.hpp"

namespace litecd {

// GridFile: the ASCII line "LGRID <height> <width> <channels>\n" followed by
// height*width*channels float32 little-endian values, row-major over
// (height, width, channels).

struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<float> values;
};

std::string encode_grid(const Grid& grid);
Grid decode_grid(const std::string& bytes);

// PGM: binary P5, maxval <= 255.

struct Gray8 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;
};

std::string encode_pgm(const Gray8& img);
Gray8 decode_pgm(const std::string& bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

// Raster loaders accept either format, detected from the leading magic.

IntensityImage load_intensity(const std::filesystem::path& path);
/// Non-zero values mean changed.
ChangeMask load_mask(const std::filesystem::path& path);

void save_grid(const std::filesystem::path& path, const IntensityImage& img);
void save_grid(const std::filesystem::path& path, const DifferenceImage& img);
void save_grid(const std::filesystem::path& path, const ChangeMask& mask);

/// Mask as 0/255 PGM.
void save_mask_pgm(const std::filesystem::path& path, const ChangeMask& mask);
/// Raw 8-bit values.
void save_gray_pgm(const std::filesystem::path& path, const ChangeMask& img);
/// Amplitude preview: sqrt(intensity) scaled so three times the mean maps to 255.
void save_intensity_preview(const std::filesystem::path& path, const IntensityImage& img);

// Checkpoint layout (all integers little-endian):
//   "LCDN1"                       5 bytes
//   u32 format version            currently 1
//   u64 network fingerprint       NetworkSpec::fingerprint()
//   u32 tensor count
//   per tensor: u32 name length, name bytes, u32 n, c, h, w, u64 payload byte offset
//   u64 payload length in bytes
//   payload: float32 little-endian values, row-major per tensor

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const LiteCnn<float>& net);

/// Restores parameters and running statistics. Throws ModelMismatch on a bad
/// magic, unknown version, fingerprint mismatch or tensor index mismatch.
void decode_checkpoint(const std::string& bytes, LiteCnn<float>& net);

void save_checkpoint(const std::filesystem::path& path, const LiteCnn<float>& net);
void load_checkpoint(const std::filesystem::path& path, LiteCnn<float>& net);

}  // namespace litecd
