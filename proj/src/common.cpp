#include "sgtext/common.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

namespace sgtext {

double Rng::normal(double mean, double stddev) {
    // u1 in (0, 1] so log stays finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

uint64_t Rng::below(uint64_t n) {
    if (n == 0) return 0;
    // Lemire's multiply-shift with rejection of the biased low range.
    uint64_t x = next_u64();
    __uint128_t m = __uint128_t(x) * __uint128_t(n);
    uint64_t lo = uint64_t(m);
    if (lo < n) {
        uint64_t threshold = (0 - n) % n;
        while (lo < threshold) {
            x = next_u64();
            m = __uint128_t(x) * __uint128_t(n);
            lo = uint64_t(m);
        }
    }
    return uint64_t(m >> 64);
}

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("SGTEXT_LOG");
        if (!env) return LogLevel::warn;
        std::string s(env);
        if (s == "debug") return LogLevel::debug;
        if (s == "info") return LogLevel::info;
        if (s == "warn") return LogLevel::warn;
        if (s == "error") return LogLevel::error;
        if (s == "off") return LogLevel::off;
        return LogLevel::warn;
    }();
    return level;
}

void log_msg(LogLevel level, const std::string& msg) {
    if (int(level) < int(log_level())) return;
    static const char* tags[] = {"debug", "info", "warn", "error"};
    int idx = int(level);
    if (idx < 0 || idx > 3) return;
    std::fprintf(stderr, "[%s] %s\n", tags[idx], msg.c_str());
}

}  // namespace sgtext
