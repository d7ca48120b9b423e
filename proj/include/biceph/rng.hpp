#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace biceph {

// xoshiro256** seeded through splitmix64. Pinned here (rather than relying on
// the standard library) so that generated cohorts, splits and batch draws are
// bit-identical across platforms and language runtimes that reimplement it.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed);

    // Independent stream derived from (seed, label). Streams for different
    // labels never share state; the label is hashed with FNV-1a.
    static Rng stream(std::uint64_t seed, std::string_view label);

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit();

    // Uniform integer in [0, n). Rejection sampling, unbiased.
    std::uint64_t below(std::uint64_t n);

    std::array<std::uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

private:
    std::array<std::uint64_t, 4> s_{};
};

// Marsaglia polar method. Each pair of accepted uniforms yields two normals;
// the second is cached and consumed before fresh uniforms are drawn.
class NormalSampler {
public:
    explicit NormalSampler(Rng& rng) : rng_(rng) {}

    double next();

private:
    Rng& rng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace biceph
