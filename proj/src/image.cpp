#include "ghoststat/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ghoststat/compensated.hpp"
#include "ghoststat/errors.hpp"

namespace ghoststat {

double GrayImage::sum() const {
    CompensatedSum acc;
    for (double v : values) acc.add(v);
    return acc.value();
}

double GrayImage::sum_squares() const {
    CompensatedSum acc;
    for (double v : values) acc.add(v * v);
    return acc.value();
}

void GrayImage::validate() const {
    if (width == 0 || height == 0)
        throw ConfigError("image dimensions must be positive");
    if (values.size() != width * height)
        throw ConfigError("image buffer size does not match dimensions");
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw ConfigError("image gray values must lie in [0,1]");
    }
}

GrayRegionIndex build_region_index(const GrayImage& image, double tolerance) {
    image.validate();
    if (tolerance < 0.0) throw ConfigError("region tolerance must be nonnegative");

    const std::size_t n = image.pixel_count();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return image.values[a] < image.values[b];
    });

    GrayRegionIndex index;
    std::size_t i = 0;
    while (i < n) {
        // Extend the group while consecutive sorted values stay within
        // tolerance of the group's running start value.
        std::size_t j = i + 1;
        const double start = image.values[order[i]];
        while (j < n && image.values[order[j]] - start <= tolerance) ++j;

        CompensatedSum level;
        std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(i),
                                         order.begin() + static_cast<std::ptrdiff_t>(j));
        std::sort(members.begin(), members.end());
        for (std::size_t m : members) level.add(image.values[m]);
        index.levels.push_back(level.value() / static_cast<double>(members.size()));
        index.members.push_back(std::move(members));
        i = j;
    }
    return index;
}

namespace {

// Centered square footprint: side s in a w-by-h frame.
void fill_centered_square(GrayImage& img, std::size_t side, double level) {
    const std::size_t x0 = (img.width - side) / 2;
    const std::size_t y0 = (img.height - side) / 2;
    for (std::size_t y = y0; y < y0 + side; ++y)
        for (std::size_t x = x0; x < x0 + side; ++x)
            img.values[y * img.width + x] = level;
}

} // namespace

GrayImage make_test_card(std::size_t width, std::size_t height,
                         const std::vector<double>& levels, CardLayout layout) {
    if (width == 0 || height == 0)
        throw ConfigError("test card dimensions must be positive");
    if (levels.empty())
        throw ConfigError("test card needs at least one gray level");
    for (double v : levels)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw ConfigError("test card levels must lie in [0,1]");

    GrayImage img;
    img.width = width;
    img.height = height;
    img.values.assign(width * height, levels[0]);

    const std::size_t L = levels.size();
    if (L == 1) return img;

    if (layout == CardLayout::Stripes) {
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x)
                img.values[y * width + x] = levels[(x * L) / width];
        return img;
    }

    // NestedRects: background plus L-1 concentric squares, outermost first
    // so inner squares overwrite. Side fractions for four levels reproduce
    // region fractions close to 82/5/8/5 percent; other counts fall back to
    // a sqrt taper that keeps rings distinct and non-degenerate.
    const std::size_t base = std::min(width, height);
    std::vector<std::size_t> sides(L - 1);
    if (L == 4) {
        const double ratio[3] = {27.0 / 64.0, 23.0 / 64.0, 14.0 / 64.0};
        for (std::size_t k = 0; k < 3; ++k)
            sides[k] = static_cast<std::size_t>(std::lround(ratio[k] * static_cast<double>(base)));
    } else {
        for (std::size_t k = 0; k < L - 1; ++k) {
            const double frac = 0.42 * std::sqrt(static_cast<double>(L - 1 - k) /
                                                 static_cast<double>(L - 1));
            sides[k] = static_cast<std::size_t>(std::lround(frac * static_cast<double>(base)));
        }
    }
    for (std::size_t k = 0; k < L - 1; ++k) {
        if (sides[k] == 0) sides[k] = 1;
        if (sides[k] >= base) sides[k] = base - 1;
        if (k > 0 && sides[k] >= sides[k - 1]) {
            if (sides[k - 1] <= 1)
                throw ConfigError("test card too small for the requested level count");
            sides[k] = sides[k - 1] - 1;
        }
        fill_centered_square(img, sides[k], levels[k + 1]);
    }
    return img;
}

const char* to_string(CardLayout layout) {
    switch (layout) {
        case CardLayout::Stripes: return "stripes";
        case CardLayout::NestedRects: return "nested-rects";
    }
    throw ConfigError("unknown card layout");
}

CardLayout card_layout_from_string(const std::string& name) {
    if (name == "stripes") return CardLayout::Stripes;
    if (name == "nested-rects") return CardLayout::NestedRects;
    throw ConfigError("unknown card layout: " + name);
}

} // namespace ghoststat
