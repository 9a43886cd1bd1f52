#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "trapcc/geometry.hpp"

namespace trapcc {

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// XYZF32 point file: "PCXY", little-endian u32 count, count x 3 x f32.
std::string encode_xyzf32(const PointCloud& cloud);
PointCloud decode_xyzf32(std::string_view bytes, Frame frame);

void write_xyzf32(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_xyzf32(const std::filesystem::path& path, Frame frame);

/// Plain-text debugging format, one "x y z" per line.
void write_xyz_text(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_xyz_text(const std::filesystem::path& path, Frame frame);

/// Dispatches on extension: ".xyz" / ".txt" are text, anything else XYZF32.
PointCloud read_cloud(const std::filesystem::path& path, Frame frame);

namespace le {
void put_u32(std::string& out, std::uint32_t v);
void put_f32(std::string& out, float v);
void put_f64(std::string& out, double v);
std::uint32_t get_u32(std::string_view in, std::size_t& pos);
float get_f32(std::string_view in, std::size_t& pos);
double get_f64(std::string_view in, std::size_t& pos);
}  // namespace le

}  // namespace trapcc
