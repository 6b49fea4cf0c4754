#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "firzen/core/matrix.hpp"

namespace firzen {

// Deterministic RNG used everywhere: std::mt19937_64 has a pinned algorithm,
// and we avoid std::uniform_*_distribution (implementation-defined) so that
// identical seeds give identical streams on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // uniform in (0, 1): resamples the endpoints, keeps log() in-domain
    double uniform_open() {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return u;
    }

    // uniform integer in [0, n)
    std::size_t uniform_index(std::size_t n) {
        // modulo bias is negligible for n << 2^64 and keeps the stream portable
        return static_cast<std::size_t>(engine_() % n);
    }

    double normal() {
        // Box-Muller, one value per call
        double u1 = uniform_open();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double gumbel() { return -std::log(-std::log(uniform_open())); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // sample k distinct indices from [0, n), order by draw
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        shuffle(pool);
        pool.resize(k < n ? k : n);
        return pool;
    }

    // Xavier/Glorot uniform over fan_in + fan_out
    Mat xavier_uniform(std::size_t rows, std::size_t cols) {
        double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Mat m(rows, cols);
        for (double& v : m.raw()) v = (2.0 * uniform() - 1.0) * bound;
        return m;
    }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }
    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace firzen
