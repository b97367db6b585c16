#ifndef MSSL_LOG_HPP_
#define MSSL_LOG_HPP_

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace mssl::log {

enum class Level { kError = 0, kInfo = 1, kDebug = 2 };

// Threshold from MSSL_LOG={error|info|debug}; defaults to error.
inline Level threshold() {
  const char* env = std::getenv("MSSL_LOG");
  if (env == nullptr) return Level::kError;
  const std::string_view v(env);
  if (v == "debug") return Level::kDebug;
  if (v == "info") return Level::kInfo;
  return Level::kError;
}

inline void write(Level level, std::string_view msg) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  static constexpr const char* kTags[] = {"error", "info", "debug"};
  std::cerr << "mssl [" << kTags[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void error(std::string_view msg) { write(Level::kError, msg); }
inline void info(std::string_view msg) { write(Level::kInfo, msg); }
inline void debug(std::string_view msg) { write(Level::kDebug, msg); }

}  // namespace mssl::log

#endif  // MSSL_LOG_HPP_
