#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace countthin {

/**
 * Philox4x32-10 block function (Salmon et al., SC'11).
 *
 * Maps a 128-bit counter and a 64-bit key to 128 pseudo-random bits.
 * Stateless, so any block of any stream can be computed independently.
 */
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

/**
 * @brief Counter-based random stream identified by `(seed, stream_id)`.
 *
 * The seed is the Philox key; the stream id occupies the upper 64 bits of
 * the counter and the block index the lower 64 bits. Two streams with
 * different ids never share a block, so per-entry streams (`stream_id = i * p + j`)
 * give output that does not depend on traversal order or thread count.
 *
 * Satisfies UniformRandomBitGenerator, so it can drive standard distributions.
 */
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept;

    /// Uniform double on the open interval (0, 1), 53 bits of resolution.
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a, used to turn fixed text labels into seed offsets.
constexpr std::uint64_t hash_label(std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/**
 * Child seed for a named sub-task. All randomness in an experiment flows
 * from one user seed through chains of these derivations.
 */
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept {
    return mix64(seed ^ mix64(hash_label(label)));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(seed ^ mix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace countthin
