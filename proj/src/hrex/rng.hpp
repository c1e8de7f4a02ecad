#pragma once

#include <array>
#include <cstdint>

namespace hrex {

/// Philox4x32-10 counter-based generator.
///
/// A `Stream` is addressed by (root seed, domain, index). The root seed and
/// domain select the Philox key; the index occupies the upper half of the
/// 128-bit counter, so streams sharing a key never overlap. Replicate r of an
/// experiment always reads stream (seed, domain, r) regardless of which worker
/// runs it, which is what makes parallel runs bitwise reproducible.
class Stream {
  public:
    Stream(std::uint64_t root_seed, std::uint64_t domain, std::uint64_t index);

    std::uint64_t next_u64();

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform();

    /// Standard normal by inversion of the uniform stream.
    double normal();

    /// Unit exponential by inversion of the uniform stream.
    double exponential();

  private:
    void refill();

    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 4> counter_{};
    std::array<std::uint64_t, 2> buffer_{};
    int available_ = 0;
};

/// SplitMix64 finalizer; used to derive keys and domains.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Child domain, e.g. one per sample size in an n-sweep.
constexpr std::uint64_t derive_domain(std::uint64_t base, std::uint64_t salt) {
    return mix64(base ^ mix64(salt + 0x632be59bd9b4e019ull));
}

namespace domains {
inline constexpr std::uint64_t cholesky_path = 0x43484f4cull;
inline constexpr std::uint64_t circulant_path = 0x43495243ull;
inline constexpr std::uint64_t theta = 0x54484554ull;
inline constexpr std::uint64_t experiment = 0x45585052ull;
inline constexpr std::uint64_t block_check = 0x424c4f43ull;
}  // namespace domains

/// Inverse of the standard normal CDF (Wichura's AS 241, about 1e-16 relative).
double normal_quantile(double p);

}  // namespace hrex
