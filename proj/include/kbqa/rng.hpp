#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace kbqa {

// Deterministic RNG wrapper. mt19937_64 output is pinned by the standard;
// the derived draws below are hand-rolled so sequences are reproducible
// bit-for-bit across library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive. Rejection sampling keeps it
    // unbiased without touching std::uniform_int_distribution.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<int64_t>(gen_()); // full range
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return lo + static_cast<int64_t>(x % span);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent stream (e.g. per-epoch shuffle order).
    Rng fork(uint64_t salt) {
        return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL));
    }

private:
    std::mt19937_64 gen_;
};

} // namespace kbqa
