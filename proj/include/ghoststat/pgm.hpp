#pragma once

#include <string>

#include "ghoststat/image.hpp"

namespace ghoststat {

// Reads P2 (ASCII) or P5 (binary) portable graymaps with maxval 255.
// Gray levels map to [0,1] by v/255. Throws FormatError on anything else.
GrayImage read_pgm(const std::string& path);

// Writes a P5 graymap with maxval 255. Values are clamped to [0,1] and
// rounded to the nearest 8-bit level, so an image read from a PGM writes
// back bit-identically.
void write_pgm(const std::string& path, const GrayImage& image);

} // namespace ghoststat
