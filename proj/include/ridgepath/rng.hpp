#ifndef RIDGEPATH_RNG_HPP
#define RIDGEPATH_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace ridgepath {

/// Philox4x32-10 block function (Salmon et al., Random123).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter block(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }
};

/// 32-bit FNV-1a, used to turn a purpose label into a stream id.
constexpr std::uint32_t fnv1a32(std::string_view s) {
    std::uint32_t h = 2166136261u;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 16777619u;
    }
    return h;
}

/// Independent random stream for (seed, replicate, purpose).
///
/// Key = (seed low word, seed high word); counter = (block low, block high,
/// replicate, fnv1a32(purpose)). Uniforms take 53 bits from two successive
/// words (a >> 5, b >> 6); normals use Box-Muller on (1 - u1, u2), returning
/// the cosine branch first and then the cached sine branch.
class RandomStream {
public:
    using result_type = std::uint32_t;

    RandomStream(std::uint64_t seed, std::uint32_t replicate, std::string_view purpose)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          replicate_(replicate), purpose_(fnv1a32(purpose)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (used_ == 4) {
            buffer_ = Philox4x32::block({static_cast<std::uint32_t>(block_),
                                         static_cast<std::uint32_t>(block_ >> 32), replicate_, purpose_},
                                        key_);
            ++block_;
            used_ = 0;
        }
        return buffer_[used_++];
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() {
        const std::uint32_t a = (*this)() >> 5;
        const std::uint32_t b = (*this)() >> 6;
        return (a * 67108864.0 + b) * (1.0 / 9007199254740992.0);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    Philox4x32::Key key_;
    std::uint32_t replicate_;
    std::uint32_t purpose_;
    std::uint64_t block_ = 0;
    Philox4x32::Counter buffer_{};
    int used_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ridgepath

#endif
