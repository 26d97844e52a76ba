#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vitals/error.hpp"

namespace vitals {

// splitmix64 step; used to derive independent sub-stream seeds from a master
// seed plus salt words (subject index, state index, ablation cell, ...).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> salts) {
    std::uint64_t s = splitmix64(seed);
    for (std::uint64_t salt : salts) s = splitmix64(s ^ salt);
    return s;
}

// Deterministic RNG used repo-wide. The engine is std::mt19937_64, whose
// output sequence is fixed by the C++ standard; the uniform and normal
// mappings below are our own so that value streams are identical on every
// platform (std::uniform_real_distribution makes no such guarantee).
//
//   uniform01: take the top 53 bits of one engine draw -> [0, 1)
//   normal:    Box-Muller on two uniform draws, cosine branch only
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        require(lo < hi, ErrorKind::Range, "uniform bounds must satisfy lo < hi");
        return lo + (hi - lo) * uniform01();
    }

    std::vector<double> uniform_vec(double lo, double hi, std::size_t n) {
        require(lo < hi, ErrorKind::Range, "uniform bounds must satisfy lo < hi");
        std::vector<double> out(n);
        for (auto& v : out) v = lo + (hi - lo) * uniform01();
        return out;
    }

    // Standard normal draw. Consumes exactly two engine values per call; the
    // sine branch is discarded so the stream position is call-count
    // deterministic.
    double normal() {
        double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; // (0, 1]
        double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;       // [0, 1)
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Unbiased-enough integer draw for shuffling; plain modulo, documented.
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Engine state round-trips through the standard textual representation.
    std::string state_string() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void restore_state(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
        require(!is.fail(), ErrorKind::Format, "bad RNG state string");
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace vitals
