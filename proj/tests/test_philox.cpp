#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <set>

#include "ghoststat/philox.hpp"

using namespace ghoststat;

TEST_SUITE("philox") {

// Known-answer vectors for the 10-round 4x32 configuration, cross-checked
// against an independent reimplementation of the published algorithm.
TEST_CASE("known-answer blocks") {
    SUBCASE("zero counter, zero key") {
        const auto out = Philox4x32::block({0u, 0u, 0u, 0u}, {0u, 0u});
        CHECK(out[0] == 0x6627e8d5u);
        CHECK(out[1] == 0xe169c58du);
        CHECK(out[2] == 0xbc57ac4cu);
        CHECK(out[3] == 0x9b00dbd8u);
    }
    SUBCASE("all-ones counter and key") {
        const auto out = Philox4x32::block(
            {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
            {0xffffffffu, 0xffffffffu});
        CHECK(out[0] == 0x408f276du);
        CHECK(out[1] == 0x41c83b0eu);
        CHECK(out[2] == 0xa20bc7c6u);
        CHECK(out[3] == 0x6d5451fdu);
    }
    SUBCASE("pi-digit counter and key") {
        const auto out = Philox4x32::block(
            {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
            {0xa4093822u, 0x299f31d0u});
        CHECK(out[0] == 0xd16cfe09u);
        CHECK(out[1] == 0x94fdccebu);
        CHECK(out[2] == 0x5001e420u);
        CHECK(out[3] == 0x24126ea1u);
    }
}

TEST_CASE("words packing matches the block layout") {
    // words(seed, stream, index) must equal block() on the documented
    // counter/key packing: counter = {lo(index), hi(index), stream, 0},
    // key = {lo(seed), hi(seed)}.
    const std::uint64_t seed = 0x0123456789abcdefull;
    const std::uint64_t index = 0xfedcba9876543210ull;
    const std::uint32_t stream = 7u;
    const auto block = Philox4x32::block(
        {0x76543210u, 0xfedcba98u, stream, 0u}, {0x89abcdefu, 0x01234567u});
    const auto words = Philox4x32::words(seed, stream, index);
    CHECK(words[0] == (std::uint64_t(block[0]) | (std::uint64_t(block[1]) << 32)));
    CHECK(words[1] == (std::uint64_t(block[2]) | (std::uint64_t(block[3]) << 32)));
}

TEST_CASE("streams and counters decorrelate") {
    // Same seed, different stream or counter: outputs must differ.
    const auto a = Philox4x32::words(42, 0, 0);
    const auto b = Philox4x32::words(42, 1, 0);
    const auto c = Philox4x32::words(42, 0, 1);
    const auto d = Philox4x32::words(43, 0, 0);
    std::set<std::uint64_t> firsts = {a[0], b[0], c[0], d[0]};
    CHECK(firsts.size() == 4);
}

TEST_CASE("uniform01 range and granularity") {
    CHECK(uniform01(0) == 0.0);
    // Max 53-bit payload maps to the largest double below 1.
    CHECK(uniform01(~0ull) == 1.0 - 0x1.0p-53);
    CHECK(uniform01(~0ull) < 1.0);

    CHECK(uniform01_open_below(0) == 0x1.0p-53);
    CHECK(uniform01_open_below(0) > 0.0);
    CHECK(uniform01_open_below(~0ull) == 1.0);
    CHECK(std::isfinite(std::log(uniform01_open_below(0))));

    // The two maps differ by exactly one ulp of the 53-bit grid.
    const std::uint64_t bits = 0x123456789abcdef0ull;
    CHECK(uniform01_open_below(bits) - uniform01(bits) == 0x1.0p-53);
}

TEST_CASE("uniform01 mean over a counter stride") {
    // 2^16 consecutive counters: mean must sit near 1/2 within 5 sigma
    // (sigma = 1/sqrt(12 n)).
    const int n = 1 << 16;
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
        sum += uniform01(Philox4x32::words(2024, 0, std::uint64_t(i))[0]);
    const double mean = sum / n;
    const double sigma = 1.0 / std::sqrt(12.0 * n);
    CHECK(std::abs(mean - 0.5) < 5.0 * sigma);
}

} // TEST_SUITE
