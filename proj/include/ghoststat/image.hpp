#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ghoststat {

// Object transmittance map. Values are gray levels in [0,1], row major;
// 0 is opaque, 1 is transparent.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;

    std::size_t pixel_count() const { return width * height; }
    double sum() const;         // sum of d_m
    double sum_squares() const; // sum of d_m^2

    // Throws ConfigError if dimensions or values are invalid.
    void validate() const;
};

// Partition of pixel indices by original gray value. Levels are strictly
// increasing and the member lists cover every pixel exactly once.
struct GrayRegionIndex {
    std::vector<double> levels;
    std::vector<std::vector<std::size_t>> members;

    std::size_t region_count() const { return levels.size(); }
};

// One reference speckle frame; same length and addressing as the image.
struct PatternFrame {
    std::vector<double> values;
};

// Groups pixels whose gray values agree within `tolerance`; the level of a
// merged group is the mean of its values.
GrayRegionIndex build_region_index(const GrayImage& image, double tolerance = 1e-9);

enum class CardLayout { Stripes, NestedRects };

// Synthetic test object containing exactly the requested gray levels.
// Stripes: vertical bands of equal width, cycling through the levels.
// NestedRects: levels[0] background with concentric centered squares for
// the rest; for four levels the ring sides are chosen so the region
// fractions land near 82/5/8/5 percent of the pixels.
GrayImage make_test_card(std::size_t width, std::size_t height,
                         const std::vector<double>& levels, CardLayout layout);

const char* to_string(CardLayout layout);
CardLayout card_layout_from_string(const std::string& name);

} // namespace ghoststat
