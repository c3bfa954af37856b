#include "ghoststat/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ghoststat/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "stack I/O assumes a little-endian host");
static_assert(sizeof(double) == 8, "stack I/O assumes IEEE-754 binary64");

namespace ghoststat {

namespace {

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError(std::string("truncated field: ") + what);
    return v;
}

} // namespace

void write_pattern_stack(const std::string& path, const PatternStack& stack) {
    if (stack.values.size() != std::size_t(stack.M) * std::size_t(stack.T))
        throw FormatError("stack payload size does not match M*T");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot create stack file: " + path);
    out.write("GIPS", 4);
    write_raw(out, kStackVersion);
    write_raw(out, stack.M);
    write_raw(out, stack.T);
    write_raw(out, kStackDtypeF64);
    out.write(reinterpret_cast<const char*>(stack.values.data()),
              static_cast<std::streamsize>(stack.values.size() * sizeof(double)));
    if (!out) throw FormatError("failed writing stack file: " + path);
}

PatternStack read_pattern_stack(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open stack file: " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "GIPS", 4) != 0)
        throw FormatError("not a pattern stack (bad magic): " + path);
    const auto version = read_raw<std::uint16_t>(in, "version");
    if (version != kStackVersion)
        throw FormatError("unsupported stack version in " + path);
    PatternStack stack;
    stack.M = read_raw<std::uint32_t>(in, "M");
    stack.T = read_raw<std::uint32_t>(in, "T");
    const auto dtype = read_raw<std::uint16_t>(in, "dtype");
    if (dtype != kStackDtypeF64)
        throw FormatError("unsupported stack dtype in " + path);
    if (stack.M == 0 || stack.T == 0)
        throw FormatError("stack dimensions must be positive: " + path);
    stack.values.resize(std::size_t(stack.M) * std::size_t(stack.T));
    in.read(reinterpret_cast<char*>(stack.values.data()),
            static_cast<std::streamsize>(stack.values.size() * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != stack.values.size() * sizeof(double))
        throw FormatError("truncated stack payload: " + path);
    return stack;
}

void write_f64_array(const std::string& path, const std::vector<double>& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot create file: " + path);
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!out) throw FormatError("failed writing: " + path);
}

std::vector<double> read_f64_array(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("cannot open file: " + path);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % sizeof(double) != 0)
        throw FormatError("file size is not a whole number of f64 values: " + path);
    std::vector<double> values(bytes / sizeof(double));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw FormatError("failed reading: " + path);
    return values;
}

std::vector<double> read_csv_column(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open CSV file: " + path);
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        std::istringstream row(line);
        double v = 0.0;
        if (!(row >> v) || !std::isfinite(v)) {
            std::ostringstream msg;
            msg << path << ":" << lineno << ": expected one finite number per line";
            throw FormatError(msg.str());
        }
        values.push_back(v);
    }
    return values;
}

} // namespace ghoststat
