#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>

#include "hsk/types.hpp"

namespace hsk {

// Binary formats, all little-endian with fixed-width integers:
//   cube      "HSC1"  u32 rows, u32 cols, u32 bands, rows*cols*bands f32
//   labels    "HSL1"  u32 rows, u32 cols, rows*cols u16
//   level map "HSH1"  u32 rows, u32 cols, rows*cols u32 region ids
//   gram      "HSG1"  u32 n, n*n f64, n null-terminated sample ids
//   rect gram "HSR1"  u32 rows, u32 cols, rows*cols f64, row ids, col ids
//   sequences "HSQ1"  u32 count, then per sequence:
//             u32 length, u32 dim, id\0, u16 class label, length*dim f32

HyperCube read_cube(const std::filesystem::path& path);
void write_cube(const HyperCube& cube, const std::filesystem::path& path);

LabelRaster read_labels(const std::filesystem::path& path);
void write_labels(const LabelRaster& raster, const std::filesystem::path& path);

// Region label map for one hierarchy level (u32 ids).
struct LevelMap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint32_t> regions;
};
LevelMap read_level_map(const std::filesystem::path& path);
void write_level_map(const LevelMap& map, const std::filesystem::path& path);

GramMatrix read_gram(const std::filesystem::path& path);
void write_gram(const GramMatrix& gram, const std::filesystem::path& path);

SequenceSet read_sequences(const std::filesystem::path& path);
void write_sequences(const SequenceSet& set, const std::filesystem::path& path);

// Writes to <path>.tmp then renames, so readers never observe partial files.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

} // namespace hsk
