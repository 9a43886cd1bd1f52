#include "trapcc/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "trapcc/error.hpp"

namespace trapcc {

namespace le {

namespace {
template <class U>
void put_uint(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <class U>
U get_uint(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw Error(ErrorCode::Format, "unexpected end of data");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return v;
}
}  // namespace

void put_u32(std::string& out, std::uint32_t v) { put_uint(out, v); }
void put_f32(std::string& out, float v) { put_uint(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::string& out, double v) { put_uint(out, std::bit_cast<std::uint64_t>(v)); }
std::uint32_t get_u32(std::string_view in, std::size_t& pos) { return get_uint<std::uint32_t>(in, pos); }
float get_f32(std::string_view in, std::size_t& pos) {
  return std::bit_cast<float>(get_uint<std::uint32_t>(in, pos));
}
double get_f64(std::string_view in, std::size_t& pos) {
  return std::bit_cast<double>(get_uint<std::uint64_t>(in, pos));
}

}  // namespace le

void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "rename to " + path.string() + " failed: " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string encode_xyzf32(const PointCloud& cloud) {
  std::string out = "PCXY";
  out.reserve(8 + cloud.size() * 12);
  le::put_u32(out, static_cast<std::uint32_t>(cloud.size()));
  for (const auto& p : cloud.points) {
    le::put_f32(out, static_cast<float>(p.x()));
    le::put_f32(out, static_cast<float>(p.y()));
    le::put_f32(out, static_cast<float>(p.z()));
  }
  return out;
}

PointCloud decode_xyzf32(std::string_view bytes, Frame frame) {
  if (bytes.size() < 8 || bytes.substr(0, 4) != "PCXY") {
    throw Error(ErrorCode::Format, "missing PCXY magic");
  }
  std::size_t pos = 4;
  const std::uint32_t count = le::get_u32(bytes, pos);
  if (bytes.size() != 8 + static_cast<std::size_t>(count) * 12) {
    throw Error(ErrorCode::Format, "XYZF32 payload size does not match point count");
  }
  PointCloud cloud(frame);
  cloud.points.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const double x = le::get_f32(bytes, pos);
    const double y = le::get_f32(bytes, pos);
    const double z = le::get_f32(bytes, pos);
    cloud.points.emplace_back(x, y, z);
  }
  require_finite(cloud, "XYZF32 file");
  return cloud;
}

void write_xyzf32(const std::filesystem::path& path, const PointCloud& cloud) {
  atomic_write(path, encode_xyzf32(cloud));
}

PointCloud read_xyzf32(const std::filesystem::path& path, Frame frame) {
  try {
    return decode_xyzf32(read_file(path), frame);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Format) throw Error(ErrorCode::Format, path.string() + ": " + e.what());
    throw;
  }
}

void write_xyz_text(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ostringstream ss;
  ss.precision(17);
  for (const auto& p : cloud.points) ss << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  atomic_write(path, ss.str());
}

PointCloud read_xyz_text(const std::filesystem::path& path, Frame frame) {
  std::istringstream in(read_file(path));
  PointCloud cloud(frame);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ls(line);
    double x = 0, y = 0, z = 0;
    if (!(ls >> x >> y >> z)) {
      throw Error(ErrorCode::Format, path.string() + ":" + std::to_string(line_no) + ": expected 'x y z'");
    }
    cloud.points.emplace_back(x, y, z);
  }
  require_finite(cloud, "XYZ text file");
  return cloud;
}

PointCloud read_cloud(const std::filesystem::path& path, Frame frame) {
  const auto ext = path.extension().string();
  if (ext == ".xyz" || ext == ".txt") return read_xyz_text(path, frame);
  return read_xyzf32(path, frame);
}

}  // namespace trapcc
