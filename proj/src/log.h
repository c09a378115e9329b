#pragma once

#include <cstdarg>

namespace salf {

enum class log_level { debug = 0, info = 1, warn = 2, err = 3, off = 4 };

// Threshold comes from the SALF_LOG env var (debug|info|warn|error|off) the
// first time it is queried; set_log_level overrides it.
log_level get_log_level();
void      set_log_level(log_level level);

void logf(log_level level, const char * fmt, ...) __attribute__((format(printf, 2, 3)));

} // namespace salf

#define SALF_LOG_DEBUG(...) ::salf::logf(::salf::log_level::debug, __VA_ARGS__)
#define SALF_LOG_INFO(...)  ::salf::logf(::salf::log_level::info, __VA_ARGS__)
#define SALF_LOG_WARN(...)  ::salf::logf(::salf::log_level::warn, __VA_ARGS__)
#define SALF_LOG_ERROR(...) ::salf::logf(::salf::log_level::err, __VA_ARGS__)
