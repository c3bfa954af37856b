#pragma once

#include <cstdint>
#include <array>

namespace ghoststat {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
// Stateless: each (key, counter) pair maps to 128 output bits, so draws
// can be evaluated in any order on any number of workers and still agree
// bit for bit. Period per stream is 2^64 counters.
struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0;; ++round) {
            const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
            const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
            ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0],
                   std::uint32_t(p1),
                   std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1],
                   std::uint32_t(p0)};
            if (round == 9) return ctr;
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
    }

    // 128 bits for stream `stream`, counter `index`, packed as two u64.
    static std::array<std::uint64_t, 2> words(std::uint64_t seed, std::uint32_t stream,
                                              std::uint64_t index) {
        const auto out = block({std::uint32_t(index), std::uint32_t(index >> 32), stream, 0u},
                               {std::uint32_t(seed), std::uint32_t(seed >> 32)});
        return {std::uint64_t(out[0]) | (std::uint64_t(out[1]) << 32),
                std::uint64_t(out[2]) | (std::uint64_t(out[3]) << 32)};
    }
};

// [0,1) with 53 random bits.
inline double uniform01(std::uint64_t bits) {
    return double(bits >> 11) * 0x1.0p-53;
}

// (0,1]; safe under log().
inline double uniform01_open_below(std::uint64_t bits) {
    return double((bits >> 11) + 1) * 0x1.0p-53;
}

} // namespace ghoststat
