#include "autonet/event_log.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace autonet {

LogLevel parse_log_level(std::string_view text) {
  return text == "trace" ? LogLevel::Trace : LogLevel::Info;
}

LogLevel log_level_from_env() {
  const char* value = std::getenv("AUTONET_LOG");
  return value == nullptr ? LogLevel::Info : parse_log_level(value);
}

void EventLog::emit(LogLevel level, TimeUs time, std::string_view kind,
                    std::initializer_list<std::string_view> fields) {
  if (level == LogLevel::Trace && level_ != LogLevel::Trace) return;
  std::string line = std::to_string(time);
  line += '\t';
  line += kind;
  for (std::string_view field : fields) {
    line += '\t';
    line += field;
  }
  lines_.push_back(std::move(line));
}

std::string EventLog::text() const {
  std::string out;
  for (const auto& line : lines_) {
    out += line;
    out += '\n';
  }
  return out;
}

void EventLog::write(const std::filesystem::path& path) const {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file << text();
}

}  // namespace autonet
