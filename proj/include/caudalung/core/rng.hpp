#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace caudalung::core {

// Deterministic seeded RNG. splitmix64 core with hand-rolled uniform /
// normal / shuffle so sequences do not depend on the standard library
// implementation. fork() derives independent child streams by name, which
// keeps per-stage seeds reproducible without threading a counter around.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {
        // decorrelate trivially related seeds
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive on both ends
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    // standard normal, Box-Muller with cached second draw
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    template <class T>
    std::vector<T> normal_vector(std::size_t n) {
        std::vector<T> out(n);
        for (auto& x : out) x = static_cast<T>(normal());
        return out;
    }

    // Fisher-Yates
    template <class Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = next_u64() % i;
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream derived from the current seed and a tag.
    [[nodiscard]] Rng fork(std::string_view tag) const {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ state_;
        for (char c : tag) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 0x100000001b3ULL;
        }
        return Rng(h);
    }

    [[nodiscard]] Rng fork(std::string_view tag, std::uint64_t index) const {
        Rng child = fork(tag);
        child.state_ ^= (index + 1) * 0xd6e8feb86659fd93ULL;
        return child;
    }

private:
    std::uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

} // namespace caudalung::core
