#include "trapcc/checkpoint.hpp"

#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "trapcc/error.hpp"
#include "trapcc/io.hpp"

namespace trapcc {

namespace {
constexpr std::string_view kMagic = "TRAPCC01";
}

std::string encode_checkpoint(const nn::NetworkParams& params) {
  std::string out(kMagic);
  le::put_u32(out, kCheckpointVersion);
  const std::string desc = params.arch.to_json().dump();
  le::put_u32(out, static_cast<std::uint32_t>(desc.size()));
  out += desc;
  for (const auto& t : params.tensors()) {
    le::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    le::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (const auto d : t.dims) le::put_u32(out, d);
    for (const double v : t.data) le::put_f64(out, v);
  }
  return out;
}

nn::NetworkParams decode_checkpoint(std::string_view bytes) {
  try {
    if (bytes.substr(0, kMagic.size()) != kMagic) throw Error(ErrorCode::CheckpointLoad, "bad magic");
    std::size_t pos = kMagic.size();
    const std::uint32_t version = le::get_u32(bytes, pos);
    if (version != kCheckpointVersion) {
      throw Error(ErrorCode::CheckpointLoad, "unsupported version " + std::to_string(version));
    }
    const std::uint32_t desc_len = le::get_u32(bytes, pos);
    if (pos + desc_len > bytes.size()) throw Error(ErrorCode::CheckpointLoad, "truncated descriptor");
    const auto arch = nn::ArchitectureConfig::from_json(nlohmann::json::parse(bytes.substr(pos, desc_len)));
    pos += desc_len;

    nn::NetworkParams params = nn::NetworkParams::initialize(arch, 0).zeros_like();
    std::map<std::string, nn::TensorView> expected;
    for (auto& t : params.tensors()) expected.emplace(t.name, t);
    std::size_t loaded = 0;
    while (pos < bytes.size()) {
      const std::uint32_t name_len = le::get_u32(bytes, pos);
      if (pos + name_len > bytes.size()) throw Error(ErrorCode::CheckpointLoad, "truncated tensor name");
      const std::string name(bytes.substr(pos, name_len));
      pos += name_len;
      const auto it = expected.find(name);
      if (it == expected.end()) throw Error(ErrorCode::CheckpointLoad, "unexpected tensor '" + name + "'");
      const std::uint32_t rank = le::get_u32(bytes, pos);
      std::vector<std::uint32_t> dims(rank);
      for (auto& d : dims) d = le::get_u32(bytes, pos);
      if (dims != it->second.dims) throw Error(ErrorCode::CheckpointLoad, "shape mismatch for '" + name + "'");
      for (double& v : it->second.data) {
        v = le::get_f64(bytes, pos);
        if (!std::isfinite(v)) throw Error(ErrorCode::CheckpointLoad, "non-finite value in '" + name + "'");
      }
      expected.erase(it);
      ++loaded;
    }
    if (!expected.empty()) {
      throw Error(ErrorCode::CheckpointLoad, "missing tensor '" + expected.begin()->first + "'");
    }
    if (loaded == 0) throw Error(ErrorCode::CheckpointLoad, "no tensors");
    return params;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CheckpointLoad) throw;
    throw Error(ErrorCode::CheckpointLoad, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CheckpointLoad, std::string("architecture descriptor: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const nn::NetworkParams& params) {
  atomic_write(path, encode_checkpoint(params));
}

nn::NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::CheckpointLoad, e.what());
  }
  return decode_checkpoint(bytes);
}

}  // namespace trapcc
