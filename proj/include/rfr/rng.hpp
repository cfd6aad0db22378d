#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace rfr {

/// Philox4x32-10 counter-based generator: a keyed
/// bijection of a 128-bit counter, so any block of any stream can be
/// produced independently of the others.
class Philox4x32 {
   public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

   private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Sequential standard normals for one Monte Carlo path. The key is the
/// 64-bit seed and the counter is (block, path), so the draws of a path
/// depend only on (seed, path) and never on how paths are scheduled.
class PathStream {
   public:
    PathStream(std::uint64_t seed, std::uint64_t path)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_(path) {}

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() {
        if (pos_ == 2) refill();
        return words_[pos_++];
    }

    /// Box-Muller; both outputs of a pair are used.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

   private:
    void refill() {
        const Philox4x32::Counter out = Philox4x32::generate(
            {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
             static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32)},
            key_);
        ++block_;
        for (int i = 0; i < 2; ++i) {
            const std::uint64_t bits = (static_cast<std::uint64_t>(out[2 * i]) << 32) | out[2 * i + 1];
            words_[static_cast<std::size_t>(i)] = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
        }
        pos_ = 0;
    }

    Philox4x32::Key key_;
    std::uint64_t path_;
    std::uint64_t block_ = 0;
    std::array<double, 2> words_{};
    std::size_t pos_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rfr
