#include "ghoststat/pgm.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

#include "ghoststat/errors.hpp"

namespace ghoststat {

namespace {

// Skips whitespace and '#' comment lines between header tokens.
void skip_separators(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
        } else if (c != EOF && std::isspace(static_cast<unsigned char>(c))) {
            in.get();
        } else {
            return;
        }
    }
}

std::size_t read_header_number(std::istream& in, const char* what) {
    skip_separators(in);
    long long v = -1;
    if (!(in >> v) || v < 0)
        throw FormatError(std::string("bad PGM header field: ") + what);
    return static_cast<std::size_t>(v);
}

} // namespace

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open PGM file: " + path);

    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '2' && m1 != '5'))
        throw FormatError("not a P2/P5 graymap: " + path);
    const bool binary = (m1 == '5');

    const std::size_t width = read_header_number(in, "width");
    const std::size_t height = read_header_number(in, "height");
    const std::size_t maxval = read_header_number(in, "maxval");
    if (width == 0 || height == 0)
        throw FormatError("PGM dimensions must be positive: " + path);
    if (maxval != 255)
        throw FormatError("only maxval 255 graymaps are supported: " + path);

    GrayImage img;
    img.width = width;
    img.height = height;
    img.values.resize(width * height);

    if (binary) {
        // Exactly one whitespace byte separates the header from the raster.
        int sep = in.get();
        if (sep == EOF || !std::isspace(static_cast<unsigned char>(sep)))
            throw FormatError("malformed P5 header terminator: " + path);
        std::vector<std::uint8_t> raw(width * height);
        in.read(reinterpret_cast<char*>(raw.data()),
                static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw FormatError("truncated P5 raster: " + path);
        for (std::size_t i = 0; i < raw.size(); ++i)
            img.values[i] = static_cast<double>(raw[i]) / 255.0;
    } else {
        for (std::size_t i = 0; i < img.values.size(); ++i) {
            skip_separators(in);
            long long v = -1;
            if (!(in >> v) || v < 0 || v > 255)
                throw FormatError("bad P2 sample value: " + path);
            img.values[i] = static_cast<double>(v) / 255.0;
        }
    }
    return img;
}

void write_pgm(const std::string& path, const GrayImage& image) {
    image.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot create PGM file: " + path);

    out << "P5\n" << image.width << " " << image.height << "\n255\n";
    std::vector<std::uint8_t> raw(image.pixel_count());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        double v = image.values[i];
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        raw[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) throw FormatError("failed writing PGM raster: " + path);
}

} // namespace ghoststat
