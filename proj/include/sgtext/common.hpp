#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sgtext {

#ifdef SGTEXT_REAL_FLOAT
using Real = float;
#else
using Real = double;
#endif

// splitmix64 step; also used standalone to derive seeds from seeds.
constexpr uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

constexpr uint64_t fnv1a64(const char* data, size_t len) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= uint64_t(uint8_t(data[i]));
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// Deterministic generator, independent of stdlib distributions so streams are
// reproducible across platforms. State advances by the splitmix64 sequence.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    // [0, 1) with 53 random bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller without the cached spare, so one draw consumes two uniforms
    // and the stream position never depends on call history.
    double normal(double mean = 0.0, double stddev = 1.0);

    bool bernoulli(double p) { return uniform() < p; }

    // Unbiased integer in [0, n) via 128-bit multiply rejection.
    uint64_t below(uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (size_t i = xs.size(); i > 1; --i) {
            size_t j = size_t(below(uint64_t(i)));
            std::swap(xs[i - 1], xs[j]);
        }
    }

    static uint64_t mix(uint64_t a, uint64_t b) { return splitmix64(splitmix64(a) ^ b); }
    static uint64_t mix(uint64_t a, uint64_t b, uint64_t c) { return mix(mix(a, b), c); }

private:
    uint64_t state_;
};

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

// Resolved once from SGTEXT_LOG (debug|info|warn|error|off); default warn.
LogLevel log_level();
void log_msg(LogLevel level, const std::string& msg);

inline void log_debug(const std::string& msg) { log_msg(LogLevel::debug, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::info, msg); }
inline void log_warn(const std::string& msg) { log_msg(LogLevel::warn, msg); }
inline void log_error(const std::string& msg) { log_msg(LogLevel::error, msg); }

}  // namespace sgtext
