#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "ghoststat/errors.hpp"
#include "ghoststat/image.hpp"
#include "ghoststat/pgm.hpp"

using namespace ghoststat;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "ghoststat-test-image";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_SUITE("image") {

TEST_CASE("four-level nested card has the intended region fractions") {
    GrayImage img = make_test_card(64, 64, {0.0, 0.4, 0.7, 1.0},
                                   CardLayout::NestedRects);
    img.validate();
    GrayRegionIndex idx = build_region_index(img);
    REQUIRE(idx.region_count() == 4);
    // Levels come out sorted ascending.
    CHECK(idx.levels[0] == 0.0);
    CHECK(idx.levels[1] == 0.4);
    CHECK(idx.levels[2] == 0.7);
    CHECK(idx.levels[3] == 1.0);
    // Squares of side 27, 23, 14 on a 64x64 canvas.
    CHECK(idx.members[0].size() == 4096 - 27 * 27);
    CHECK(idx.members[1].size() == 27 * 27 - 23 * 23);
    CHECK(idx.members[2].size() == 23 * 23 - 14 * 14);
    CHECK(idx.members[3].size() == 14 * 14);
    // Background close to 82%, inner square close to 5%.
    CHECK(double(idx.members[0].size()) / 4096.0 == doctest::Approx(0.82).epsilon(0.01));
    CHECK(double(idx.members[3].size()) / 4096.0 == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("binary nested card splits roughly 82/18") {
    GrayImage img = make_test_card(64, 64, {0.0, 1.0}, CardLayout::NestedRects);
    GrayRegionIndex idx = build_region_index(img);
    REQUIRE(idx.region_count() == 2);
    CHECK(idx.members[1].size() == 27 * 27);
    CHECK(idx.members[0].size() == 4096 - 27 * 27);
}

TEST_CASE("stripe card splits the width evenly") {
    GrayImage img = make_test_card(64, 16, {0.1, 0.5, 0.9, 1.0}, CardLayout::Stripes);
    GrayRegionIndex idx = build_region_index(img);
    REQUIRE(idx.region_count() == 4);
    for (std::size_t g = 0; g < 4; ++g) CHECK(idx.members[g].size() == 16 * 16);
    // Leftmost pixel carries the first level, rightmost the last.
    CHECK(img.values[0] == 0.1);
    CHECK(img.values[63] == 1.0);
}

TEST_CASE("single-level card is constant") {
    GrayImage img = make_test_card(8, 8, {0.6}, CardLayout::Stripes);
    for (double v : img.values) CHECK(v == 0.6);
    GrayRegionIndex idx = build_region_index(img);
    CHECK(idx.region_count() == 1);
    CHECK(idx.members[0].size() == 64);
}

TEST_CASE("region tolerance groups near-equal values") {
    GrayImage img;
    img.width = 4;
    img.height = 1;
    img.values = {0.5, 0.5 + 1e-10, 0.8, 0.5 + 2e-10};
    GrayRegionIndex idx = build_region_index(img, 1e-9);
    REQUIRE(idx.region_count() == 2);
    CHECK(idx.members[0].size() == 3);
    // Group level is the mean of its member values.
    CHECK(idx.levels[0] == doctest::Approx(0.5 + 1e-10).epsilon(1e-12));
    // Members stay in raster order within a group.
    CHECK(idx.members[0] == std::vector<std::size_t>{0, 1, 3});

    // Zero tolerance splits them apart.
    GrayRegionIndex strict = build_region_index(img, 0.0);
    CHECK(strict.region_count() == 4);
}

TEST_CASE("image validation rejects malformed inputs") {
    GrayImage img;
    img.width = 2;
    img.height = 2;
    img.values = {0.0, 0.5, 1.0};
    CHECK_THROWS_AS(img.validate(), ConfigError); // size mismatch
    img.values = {0.0, 0.5, 1.0, 1.5};
    CHECK_THROWS_AS(img.validate(), ConfigError); // out of range
    img.values = {0.0, 0.5, 1.0, 1.0};
    CHECK_NOTHROW(img.validate());
    img.width = 0;
    CHECK_THROWS_AS(img.validate(), ConfigError);

    CHECK_THROWS_AS(make_test_card(2, 2, {0.0, 0.3, 0.6, 1.0}, CardLayout::NestedRects),
                    ConfigError);
    CHECK_THROWS_AS(make_test_card(8, 8, {}, CardLayout::Stripes), ConfigError);
    CHECK_THROWS_AS(make_test_card(8, 8, {0.2, 1.2}, CardLayout::Stripes), ConfigError);
}

TEST_CASE("sum and sum of squares match direct loops") {
    GrayImage img = make_test_card(16, 16, {0.0, 0.4, 0.7, 1.0},
                                   CardLayout::NestedRects);
    double s = 0.0, s2 = 0.0;
    for (double v : img.values) {
        s += v;
        s2 += v * v;
    }
    CHECK(img.sum() == doctest::Approx(s).epsilon(1e-15));
    CHECK(img.sum_squares() == doctest::Approx(s2).epsilon(1e-15));
}

TEST_CASE("pgm binary round-trip is exact on the 8-bit grid") {
    GrayImage img;
    img.width = 16;
    img.height = 3;
    img.values.resize(48);
    for (int i = 0; i < 48; ++i) img.values[size_t(i)] = double((i * 5) % 256) / 255.0;

    const fs::path p = temp_file("roundtrip.pgm");
    write_pgm(p.string(), img);
    GrayImage back = read_pgm(p.string());
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (std::size_t i = 0; i < img.values.size(); ++i)
        CHECK(back.values[i] == img.values[i]); // bit-exact: both on the grid
}

TEST_CASE("pgm ascii reader handles comments and whitespace") {
    const fs::path p = temp_file("ascii.pgm");
    {
        std::ofstream out(p);
        out << "P2\n# a comment line\n3 2\n255\n0 128 255\n# mid comment\n64 32 16\n";
    }
    GrayImage img = read_pgm(p.string());
    REQUIRE(img.width == 3);
    REQUIRE(img.height == 2);
    CHECK(img.values[0] == 0.0);
    CHECK(img.values[1] == 128.0 / 255.0);
    CHECK(img.values[2] == 1.0);
    CHECK(img.values[5] == 16.0 / 255.0);
}

TEST_CASE("pgm reader rejects malformed files") {
    const fs::path bad_magic = temp_file("bad_magic.pgm");
    { std::ofstream out(bad_magic); out << "P6\n2 2\n255\nabcd"; }
    CHECK_THROWS_AS(read_pgm(bad_magic.string()), FormatError);

    const fs::path bad_maxval = temp_file("bad_maxval.pgm");
    { std::ofstream out(bad_maxval); out << "P2\n2 2\n65535\n0 1 2 3\n"; }
    CHECK_THROWS_AS(read_pgm(bad_maxval.string()), FormatError);

    const fs::path truncated = temp_file("truncated.pgm");
    { std::ofstream out(truncated); out << "P5\n4 4\n255\nab"; }
    CHECK_THROWS_AS(read_pgm(truncated.string()), FormatError);

    CHECK_THROWS_AS(read_pgm((temp_file("missing.pgm")).string() + ".nope"),
                    FormatError);
}

TEST_CASE("card layout names round-trip") {
    CHECK(card_layout_from_string(to_string(CardLayout::Stripes)) == CardLayout::Stripes);
    CHECK(card_layout_from_string(to_string(CardLayout::NestedRects)) ==
          CardLayout::NestedRects);
    CHECK_THROWS_AS(card_layout_from_string("hexagons"), ConfigError);
}

} // TEST_SUITE
