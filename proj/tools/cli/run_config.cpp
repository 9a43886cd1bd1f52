#include "run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trapcc/error.hpp"
#include "trapcc/io.hpp"

extern char** environ;

namespace trapcc::cli {

const char* to_string(Source s) {
  switch (s) {
    case Source::Default: return "default";
    case Source::File: return "file";
    case Source::Env: return "env";
    case Source::Flag: return "flag";
  }
  return "unknown";
}

const std::vector<KeySpec>& RunConfig::schema() {
  static const std::vector<KeySpec> keys = {
      {"arch.preset", ValueType::String, "desk", "network size: desk or standard"},
      {"arch.variant", ValueType::String, "full", "c-net, cp-net or full"},
      {"train.epochs", ValueType::Int, "200", ""},
      {"train.batch_size", ValueType::Int, "8", ""},
      {"train.learning_rate", ValueType::Real, "0.001", ""},
      {"train.beta1", ValueType::Real, "0.9", ""},
      {"train.beta2", ValueType::Real, "0.999", ""},
      {"train.epsilon", ValueType::Real, "1e-8", ""},
      {"train.seed", ValueType::Int, "7", "initialisation, shuffling and sample selection"},
      {"train.stagewise", ValueType::Bool, "false", "train P-Net first, then C-Net"},
      {"train.save_every", ValueType::Int, "0", "epochs between intermediate checkpoints"},
      {"train.max_samples", ValueType::Int, "0", "0 uses every observation"},
      {"train.min_detection_score", ValueType::Real, "0", ""},
      {"train.loss_partial", ValueType::Real, "1", ""},
      {"train.loss_whole", ValueType::Real, "1", ""},
      {"train.loss_input", ValueType::Real, "1", ""},
      {"scene.crop_margin", ValueType::Real, "0.1", "box growth when cropping scans, metres"},
      {"pool.threshold", ValueType::Real, "0.1", "quadrant fraction threshold"},
      {"pool.min_points", ValueType::Int, "1024", ""},
      {"pool.max_entry_points", ValueType::Int, "2048", ""},
      {"retrieval.size_tol", ValueType::Real, "0.15", ""},
      {"retrieval.sparse_cutoff", ValueType::Int, "256", ""},
      {"graph.k", ValueType::Int, "3", ""},
      {"graph.radius", ValueType::Real, "20", ""},
      {"filter.matching_threshold", ValueType::Real, "0.3", ""},
      {"filter.detection_threshold", ValueType::Real, "0.5", ""},
      {"filter.contour_weight", ValueType::Real, "0.5", ""},
      {"synth.vehicles", ValueType::Int, "64", ""},
      {"synth.frames", ValueType::Int, "8", ""},
      {"synth.clutter", ValueType::Int, "0", ""},
      {"synth.seed", ValueType::Int, "7", ""},
      {"synth.half_scanned_fraction", ValueType::Real, "0.25", ""},
      {"synth.objects_per_scene", ValueType::Int, "16", ""},
      {"synth.angular_resolution", ValueType::Real, "0.002", ""},
      {"synth.dropout", ValueType::Real, "0.05", ""},
      {"synth.noise_sigma", ValueType::Real, "0.01", ""},
  };
  return keys;
}

std::string RunConfig::env_name(const std::string& key) {
  std::string out = "TRAPCC_";
  for (const char c : key) out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

RunConfig::Value parse_value(const KeySpec& spec, const std::string& raw) {
  const std::string s = trim(raw);
  auto fail = [&]() -> RunConfig::Value {
    throw Error(ErrorCode::Config, "invalid value '" + s + "' for key '" + spec.key + "'");
  };
  switch (spec.type) {
    case ValueType::Bool:
      if (s == "true" || s == "1") return true;
      if (s == "false" || s == "0") return false;
      return fail();
    case ValueType::Int: {
      std::int64_t v = 0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty()) return fail();
      return v;
    }
    case ValueType::Real: {
      double v = 0.0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) return fail();
      return v;
    }
    case ValueType::String: return s;
  }
  return fail();
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : schema()) store(k, parse_value(k, k.default_value), Source::Default);
}

const KeySpec& RunConfig::spec(const std::string& key) const {
  for (const auto& k : schema()) {
    if (k.key == key) return k;
  }
  throw Error(ErrorCode::Config, "unknown config key '" + key + "'");
}

void RunConfig::store(const KeySpec& spec, Value v, Source source) { values_[spec.key] = {std::move(v), source}; }

void RunConfig::set(const std::string& key, const std::string& raw, Source source) {
  const KeySpec& k = spec(key);
  store(k, parse_value(k, raw), source);
}

void RunConfig::load_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (path.extension() == ".json") {
    load_json_text(text, path.string());
  } else {
    load_toml_text(text, path.string());
  }
}

void RunConfig::load_json_text(const std::string& text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, origin + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::Config, origin + ": top level must be an object");
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw Error(ErrorCode::Config, origin + ": unknown config key '" + section + "'");
    for (const auto& [name, value] : body.items()) {
      const std::string key = section + "." + name;
      const KeySpec& k = spec(key);
      std::string raw;
      if (value.is_string()) {
        if (k.type != ValueType::String) throw Error(ErrorCode::Config, "invalid value for key '" + key + "'");
        raw = value.get<std::string>();
      } else if (value.is_boolean() || value.is_number()) {
        if (k.type == ValueType::String) throw Error(ErrorCode::Config, "invalid value for key '" + key + "'");
        raw = value.dump();
      } else {
        throw Error(ErrorCode::Config, "invalid value for key '" + key + "'");
      }
      store(k, parse_value(k, raw), Source::File);
    }
  }
}

void RunConfig::load_toml_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    // Strip comments outside quoted strings.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::Config, where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Config, where + ": expected key = value");
    const std::string name = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    const std::string key = section.empty() ? name : section + "." + name;
    const KeySpec& k = spec(key);
    const bool is_string = value.size() >= 2 && value.front() == '"' && value.back() == '"';
    if (is_string != (k.type == ValueType::String)) {
      throw Error(ErrorCode::Config, where + ": invalid value for key '" + key + "'");
    }
    if (is_string) value = value.substr(1, value.size() - 2);
    store(k, parse_value(k, value), Source::File);
  }
}

void RunConfig::apply_env(const std::map<std::string, std::string>& env) {
  for (const auto& [name, value] : env) {
    if (name.rfind("TRAPCC_", 0) != 0) continue;
    bool matched = false;
    for (const auto& k : schema()) {
      if (env_name(k.key) == name) {
        store(k, parse_value(k, value), Source::Env);
        matched = true;
        break;
      }
    }
    if (!matched) throw Error(ErrorCode::Config, "unknown config key in environment variable '" + name + "'");
  }
}

void RunConfig::apply_process_env() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    env.emplace(entry.substr(0, eq), entry.substr(eq + 1));
  }
  apply_env(env);
}

bool RunConfig::get_bool(const std::string& key) const { return std::get<bool>(values_.at(spec(key).key).first); }
std::int64_t RunConfig::get_int(const std::string& key) const {
  return std::get<std::int64_t>(values_.at(spec(key).key).first);
}
double RunConfig::get_real(const std::string& key) const { return std::get<double>(values_.at(spec(key).key).first); }
std::string RunConfig::get_string(const std::string& key) const {
  return std::get<std::string>(values_.at(spec(key).key).first);
}
Source RunConfig::source(const std::string& key) const { return values_.at(spec(key).key).second; }

std::map<std::string, std::pair<std::string, Source>> RunConfig::dump() const {
  std::map<std::string, std::pair<std::string, Source>> out;
  for (const auto& [key, vs] : values_) {
    std::string text = std::visit(
        [](const auto& v) -> std::string {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::string>) {
            return v;
          } else if constexpr (std::is_same_v<T, bool>) {
            return v ? "true" : "false";
          } else {
            std::ostringstream ss;
            ss.precision(17);
            ss << v;
            return ss.str();
          }
        },
        vs.first);
    out.emplace(key, std::make_pair(std::move(text), vs.second));
  }
  return out;
}

namespace {

std::size_t non_negative(const RunConfig& cfg, const std::string& key) {
  const std::int64_t v = cfg.get_int(key);
  if (v < 0) throw Error(ErrorCode::Config, "key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

int bounded_int(const RunConfig& cfg, const std::string& key) {
  const std::int64_t v = cfg.get_int(key);
  if (v < 0 || v > 1'000'000'000) throw Error(ErrorCode::Config, "key '" + key + "' is out of range");
  return static_cast<int>(v);
}

}  // namespace

nn::ArchitectureConfig architecture(const RunConfig& cfg) {
  const std::string preset = cfg.get_string("arch.preset");
  nn::ArchitectureConfig a;
  if (preset == "desk") {
    a = nn::ArchitectureConfig::desk();
  } else if (preset == "standard") {
    a = nn::ArchitectureConfig::standard();
  } else {
    throw Error(ErrorCode::Config, "key 'arch.preset' must be desk or standard");
  }
  try {
    a.variant = nn::variant_from_string(cfg.get_string("arch.variant"));
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, std::string("key 'arch.variant': ") + e.what());
  }
  return a;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.epochs = bounded_int(cfg, "train.epochs");
  t.batch_size = bounded_int(cfg, "train.batch_size");
  t.adam.learning_rate = cfg.get_real("train.learning_rate");
  t.adam.beta1 = cfg.get_real("train.beta1");
  t.adam.beta2 = cfg.get_real("train.beta2");
  t.adam.epsilon = cfg.get_real("train.epsilon");
  t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed"));
  t.stagewise = cfg.get_bool("train.stagewise");
  t.save_every = bounded_int(cfg, "train.save_every");
  t.weights = {cfg.get_real("train.loss_partial"), cfg.get_real("train.loss_whole"), cfg.get_real("train.loss_input")};
  for (const double w : {t.weights.partial, t.weights.whole, t.weights.input}) {
    if (w < 0.0) throw Error(ErrorCode::Config, "loss weights must be non-negative");
  }
  t.validate();
  return t;
}

SceneGraphOptions graph_options(const RunConfig& cfg) {
  SceneGraphOptions g;
  g.k = bounded_int(cfg, "graph.k");
  g.radius = cfg.get_real("graph.radius");
  if (!(g.radius > 0.0)) throw Error(ErrorCode::Config, "key 'graph.radius' must be positive");
  return g;
}

DatasetOptions dataset_options(const RunConfig& cfg) {
  DatasetOptions d;
  d.max_samples = non_negative(cfg, "train.max_samples");
  d.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed"));
  d.crop_margin = cfg.get_real("scene.crop_margin");
  d.min_detection_score = cfg.get_real("train.min_detection_score");
  d.graph = graph_options(cfg);
  d.retrieval.size_tol = cfg.get_real("retrieval.size_tol");
  d.retrieval.sparse_cutoff = non_negative(cfg, "retrieval.sparse_cutoff");
  return d;
}

PoolOptions pool_options(const RunConfig& cfg) {
  PoolOptions p;
  p.threshold = cfg.get_real("pool.threshold");
  if (!(p.threshold > 0.0 && p.threshold <= 0.25)) {
    throw Error(ErrorCode::Config, "key 'pool.threshold' must lie in (0, 0.25]");
  }
  p.min_points = non_negative(cfg, "pool.min_points");
  p.max_entry_points = non_negative(cfg, "pool.max_entry_points");
  return p;
}

FilterConfig filter_config(const RunConfig& cfg) {
  FilterConfig f;
  f.matching_threshold = cfg.get_real("filter.matching_threshold");
  f.detection_threshold = cfg.get_real("filter.detection_threshold");
  f.contour_weight = cfg.get_real("filter.contour_weight");
  f.crop_margin = cfg.get_real("scene.crop_margin");
  f.graph = graph_options(cfg);
  f.validate();
  return f;
}

synth::SynthOptions synth_options(const RunConfig& cfg) {
  synth::SynthOptions s;
  s.vehicles = bounded_int(cfg, "synth.vehicles");
  s.frames = bounded_int(cfg, "synth.frames");
  s.clutter = bounded_int(cfg, "synth.clutter");
  s.seed = static_cast<std::uint64_t>(cfg.get_int("synth.seed"));
  s.half_scanned_fraction = cfg.get_real("synth.half_scanned_fraction");
  s.objects_per_scene = bounded_int(cfg, "synth.objects_per_scene");
  s.angular_resolution = cfg.get_real("synth.angular_resolution");
  s.dropout = cfg.get_real("synth.dropout");
  s.noise_sigma = cfg.get_real("synth.noise_sigma");
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  return s;
}

}  // namespace trapcc::cli
