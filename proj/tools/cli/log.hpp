#pragma once

#include <mutex>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

namespace trapcc::cli {

/// Line-delimited JSON records on a stream; plain "level: event key=value"
/// lines in quiet mode, where info records are dropped.
class Logger {
 public:
  explicit Logger(std::ostream& out, bool quiet = false) : out_(out), quiet_(quiet) {}

  void info(const std::string& event, const nlohmann::json& fields = nlohmann::json::object());
  void warn(const std::string& event, const nlohmann::json& fields = nlohmann::json::object());
  void error(const std::string& event, const nlohmann::json& fields = nlohmann::json::object());

  bool quiet() const { return quiet_; }

 private:
  void write(const char* level, const std::string& event, const nlohmann::json& fields);

  std::ostream& out_;
  bool quiet_;
  std::mutex mutex_;
};

}  // namespace trapcc::cli
