#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace dpo::rng {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless:
/// every output block is a pure function of (counter, key).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter round(Counter c, Key k) {
        const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }

    static constexpr Counter generate(Counter c, Key k) {
        c = round(c, k);
        for (int i = 1; i < 10; ++i) {
            k[0] += kWeyl0;
            k[1] += kWeyl1;
            c = round(c, k);
        }
        return c;
    }
};

/// Open-interval uniform in (0, 1) from the top 52 bits.
inline double to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Four independent standard normals for (seed, stream, step). Two Philox
/// blocks are drawn per step and mapped through Box-Muller.
inline std::array<double, 4> normals4(std::uint64_t seed, std::uint64_t stream, std::uint64_t step) {
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::array<double, 4> out{};
    for (std::uint64_t half = 0; half < 2; ++half) {
        const std::uint64_t ctr = 2 * step + half;
        const auto block = Philox4x32::generate(
            {static_cast<std::uint32_t>(ctr), static_cast<std::uint32_t>(ctr >> 32),
             static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
            key);
        const double u1 = to_unit((std::uint64_t{block[0]} << 32) | block[1]);
        const double u2 = to_unit((std::uint64_t{block[2]} << 32) | block[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[2 * half] = radius * std::cos(angle);
        out[2 * half + 1] = radius * std::sin(angle);
    }
    return out;
}

}  // namespace dpo::rng
