#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ghoststat {

// Little-endian binary stack of T frames of M doubles, magic "GIPS".
// Header: magic[4], version u16, M u32, T u32, dtype tag u16 (1 = f64).
// Payload: T*M values, frame-major. Reconstructions reuse the layout with
// T = 1.
struct PatternStack {
    std::uint32_t M = 0;
    std::uint32_t T = 0;
    std::vector<double> values; // frame-major, length T*M
};

inline constexpr std::uint16_t kStackVersion = 1;
inline constexpr std::uint16_t kStackDtypeF64 = 1;

void write_pattern_stack(const std::string& path, const PatternStack& stack);
PatternStack read_pattern_stack(const std::string& path);

// Raw little-endian f64 array, no header (run-file bucket sidecars).
void write_f64_array(const std::string& path, const std::vector<double>& values);
std::vector<double> read_f64_array(const std::string& path);

// One finite value per line; blank lines and '#' comments skipped.
std::vector<double> read_csv_column(const std::string& path);

} // namespace ghoststat
