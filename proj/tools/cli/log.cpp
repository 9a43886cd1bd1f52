#include "log.hpp"

namespace trapcc::cli {

void Logger::info(const std::string& event, const nlohmann::json& fields) {
  if (!quiet_) write("info", event, fields);
}

void Logger::warn(const std::string& event, const nlohmann::json& fields) { write("warn", event, fields); }

void Logger::error(const std::string& event, const nlohmann::json& fields) { write("error", event, fields); }

void Logger::write(const char* level, const std::string& event, const nlohmann::json& fields) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (quiet_) {
    out_ << level << ": " << event;
    for (const auto& [k, v] : fields.items()) {
      out_ << ' ' << k << '=' << (v.is_string() ? v.get<std::string>() : v.dump());
    }
    out_ << '\n';
  } else {
    nlohmann::json rec = {{"level", level}, {"event", event}};
    for (const auto& [k, v] : fields.items()) rec[k] = v;
    out_ << rec.dump() << '\n';
  }
  out_.flush();
}

}  // namespace trapcc::cli
