#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "trapcc/detection_filter.hpp"
#include "trapcc/gt_pool.hpp"
#include "trapcc/network.hpp"
#include "trapcc/synth.hpp"
#include "trapcc/training.hpp"

namespace trapcc::cli {

enum class ValueType { Bool, Int, Real, String };

struct KeySpec {
  std::string key;  // "section.name"
  ValueType type;
  std::string default_value;
  std::string help;
};

enum class Source { Default, File, Env, Flag };

const char* to_string(Source s);

/// Layered configuration: defaults < file < TRAPCC_* environment < flags.
/// Every key is checked against a fixed schema; unknown keys and values of
/// the wrong type raise a Config error naming the key.
class RunConfig {
 public:
  using Value = std::variant<bool, std::int64_t, double, std::string>;

  RunConfig();

  static const std::vector<KeySpec>& schema();
  /// "train.epochs" -> "TRAPCC_TRAIN_EPOCHS".
  static std::string env_name(const std::string& key);

  /// JSON when the extension is .json, otherwise the TOML subset: [section]
  /// headers, key = value lines, # comments; values are booleans, integers,
  /// reals or double-quoted strings.
  void load_file(const std::filesystem::path& path);
  void load_json_text(const std::string& text, const std::string& origin);
  void load_toml_text(const std::string& text, const std::string& origin);
  void apply_env(const std::map<std::string, std::string>& env);
  void apply_process_env();
  void set(const std::string& key, const std::string& raw, Source source);

  bool get_bool(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_real(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  Source source(const std::string& key) const;

  /// Every resolved key with its value and origin, for logging.
  std::map<std::string, std::pair<std::string, Source>> dump() const;

 private:
  const KeySpec& spec(const std::string& key) const;
  void store(const KeySpec& spec, Value v, Source source);

  std::map<std::string, std::pair<Value, Source>> values_;
};

nn::ArchitectureConfig architecture(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
DatasetOptions dataset_options(const RunConfig& cfg);
PoolOptions pool_options(const RunConfig& cfg);
FilterConfig filter_config(const RunConfig& cfg);
SceneGraphOptions graph_options(const RunConfig& cfg);
synth::SynthOptions synth_options(const RunConfig& cfg);

}  // namespace trapcc::cli
