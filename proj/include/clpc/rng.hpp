#pragma once

#include <cstdint>
#include <random>

namespace clpc {

// splitmix64 finalizer; used both as a seed scrambler and to derive
// independent child streams from (seed, tag) pairs.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ (mix64(b) + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

// Deterministic random source. All distribution mappings are written out
// explicitly (std::uniform_* are implementation-defined and would break
// cross-platform reproducibility); mt19937_64 itself is fully specified.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0,1): 53 top bits / 2^53.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + next_unit() * (hi - lo); }

    // Uniform index in [0,n) via 128-bit multiply-high (bias < n/2^64).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Child stream: a function of the original seed and the tag only, so the
    // same derivation is reachable from any point in the parent's lifetime.
    SeededRng derive(std::uint64_t tag) const { return SeededRng(mix64(seed_, tag)); }

    // In-place Fisher-Yates (std::shuffle is implementation-defined).
    template <typename Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace clpc
