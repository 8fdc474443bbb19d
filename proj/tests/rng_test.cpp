#include <gtest/gtest.h>

#include <cmath>

#include "dpo/rng.hpp"

namespace {

using dpo::rng::Philox4x32;

// Known-answer vectors of the reference Random123 implementation.
TEST(Philox, KnownAnswers) {
    EXPECT_EQ(Philox4x32::generate({0, 0, 0, 0}, {0, 0}),
              (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    EXPECT_EQ(Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                   {0xffffffffu, 0xffffffffu}),
              (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    EXPECT_EQ(Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                   {0xa4093822u, 0x299f31d0u}),
              (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Normals, DeterministicAndDistinctStreams) {
    EXPECT_EQ(dpo::rng::normals4(5, 3, 7), dpo::rng::normals4(5, 3, 7));
    EXPECT_NE(dpo::rng::normals4(5, 3, 7), dpo::rng::normals4(5, 4, 7));
    EXPECT_NE(dpo::rng::normals4(5, 3, 7), dpo::rng::normals4(6, 3, 7));
    EXPECT_NE(dpo::rng::normals4(5, 3, 7), dpo::rng::normals4(5, 3, 8));
}

TEST(Normals, MomentsAndCorrelations) {
    const std::size_t n = 200000;
    double s[4] = {}, s2[4] = {}, s4 = 0.0, c01 = 0.0, c23 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto z = dpo::rng::normals4(42, 0, k);
        for (int i = 0; i < 4; ++i) {
            s[i] += z[i];
            s2[i] += z[i] * z[i];
        }
        s4 += z[0] * z[0] * z[0] * z[0];
        c01 += z[0] * z[1];
        c23 += z[2] * z[3];
    }
    const double se = 1.0 / std::sqrt(double(n));
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(s[i] / n, 0.0, 4 * se);
        EXPECT_NEAR(s2[i] / n, 1.0, 4 * std::sqrt(2.0) * se);
    }
    EXPECT_NEAR(s4 / n, 3.0, 4 * std::sqrt(96.0) * se);
    EXPECT_NEAR(c01 / n, 0.0, 4 * se);
    EXPECT_NEAR(c23 / n, 0.0, 4 * se);
}

TEST(ToUnit, OpenInterval) {
    EXPECT_GT(dpo::rng::to_unit(0), 0.0);
    EXPECT_LT(dpo::rng::to_unit(~std::uint64_t{0}), 1.0);
}

}  // namespace
