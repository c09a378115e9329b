#include "log.h"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace salf {

static log_level level_from_env() {
    const char * env = std::getenv("SALF_LOG");
    if (env == nullptr || env[0] == '\0') {
        return log_level::warn;
    }
    if (std::strcmp(env, "debug") == 0) return log_level::debug;
    if (std::strcmp(env, "info") == 0)  return log_level::info;
    if (std::strcmp(env, "warn") == 0)  return log_level::warn;
    if (std::strcmp(env, "error") == 0) return log_level::err;
    if (std::strcmp(env, "off") == 0)   return log_level::off;
    std::fprintf(stderr, "salf: unknown SALF_LOG value '%s', using warn\n", env);
    return log_level::warn;
}

static std::atomic<int> g_level{-1};

log_level get_log_level() {
    int v = g_level.load(std::memory_order_relaxed);
    if (v < 0) {
        v = static_cast<int>(level_from_env());
        g_level.store(v, std::memory_order_relaxed);
    }
    return static_cast<log_level>(v);
}

void set_log_level(log_level level) {
    g_level.store(static_cast<int>(level), std::memory_order_relaxed);
}

void logf(log_level level, const char * fmt, ...) {
    if (level < get_log_level()) {
        return;
    }
    static const char * tags[] = { "debug", "info", "warn", "error" };
    std::fprintf(stderr, "salf %s: ", tags[static_cast<int>(level)]);
    va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    va_end(args);
    std::fputc('\n', stderr);
}

} // namespace salf
