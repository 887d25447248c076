#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace fdemm {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
        const std::uint64_t p0 = std::uint64_t{M0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{M1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

/// Substreams of one path. The numeric values are part of the output contract.
enum class RngRole : std::uint32_t { Brownian = 0, JumpClock = 1, JumpSize = 2, Tau = 3 };

/// Stream for (master_seed, role, path): counter = (block, role, path lo, path hi),
/// key = master seed. No state is shared between paths or roles.
class PhiloxStream {
public:
    PhiloxStream(std::uint64_t seed, RngRole role, std::uint64_t path)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          role_(static_cast<std::uint32_t>(role)),
          path_lo_(static_cast<std::uint32_t>(path)),
          path_hi_(static_cast<std::uint32_t>(path >> 32)) {}

    /// Uniform on the open interval (0, 1), 53 random bits.
    double uniform() {
        if (pos_ == 2) refill();
        const std::uint64_t u = (std::uint64_t{buf_[2 * pos_]} << 32) | buf_[2 * pos_ + 1];
        ++pos_;
        return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Box-Muller; both variates of a pair are used.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double a = 2.0 * M_PI * uniform();
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double exponential() { return -std::log(uniform()); }

private:
    void refill() {
        buf_ = philox4x32({block_++, role_, path_lo_, path_hi_}, key_);
        pos_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t role_;
    std::uint32_t path_lo_;
    std::uint32_t path_hi_;
    std::uint32_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fdemm
