#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace annolab {

// Seeded generator with portable draws. std's distributions are
// implementation-defined, so bounded integers and unit reals are derived from
// raw mt19937_64 output here to keep orders identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, bound). Rejection sampling, so no modulo bias.
    std::uint64_t uniform_index(std::uint64_t bound) {
        if (bound <= 1) {
            engine_();
            return 0;
        }
        // 2^64 mod bound values at the bottom of the range are rejected.
        const std::uint64_t threshold = (0 - bound) % bound;
        std::uint64_t x = engine_();
        while (x < threshold) x = engine_();
        return x % bound;
    }

    // Uniform real in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller (one value per call, second discarded).
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    std::string state() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    bool set_state(const std::string& text) {
        std::istringstream is(text);
        std::mt19937_64 restored;
        if (!(is >> restored)) return false;
        engine_ = restored;
        return true;
    }

    friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace annolab
