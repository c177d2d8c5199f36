#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace autonet {

/// Simulated time in integer microseconds.
using TimeUs = std::int64_t;

constexpr TimeUs kMillisecond = 1000;
constexpr TimeUs kSecond = 1000 * kMillisecond;

enum class LogLevel { Info, Trace };

/// Parses `AUTONET_LOG` style values ("trace" / "info"); anything else is Info.
LogLevel parse_log_level(std::string_view text);
LogLevel log_level_from_env();

/// In-memory, tab-separated event log: `time_us<TAB>kind<TAB>field...`.
///
/// Every module writes through the same log so that a run's full history can
/// be diffed byte-for-byte against a replay.
class EventLog {
 public:
  explicit EventLog(LogLevel level = LogLevel::Info) : level_(level) {}

  LogLevel level() const { return level_; }
  bool tracing() const { return level_ == LogLevel::Trace; }

  void emit(LogLevel level, TimeUs time, std::string_view kind,
            std::initializer_list<std::string_view> fields);

  void info(TimeUs time, std::string_view kind,
            std::initializer_list<std::string_view> fields) {
    emit(LogLevel::Info, time, kind, fields);
  }
  void trace(TimeUs time, std::string_view kind,
             std::initializer_list<std::string_view> fields) {
    emit(LogLevel::Trace, time, kind, fields);
  }

  const std::vector<std::string>& lines() const { return lines_; }
  std::string text() const;
  void write(const std::filesystem::path& path) const;

 private:
  LogLevel level_;
  std::vector<std::string> lines_;
};

}  // namespace autonet
