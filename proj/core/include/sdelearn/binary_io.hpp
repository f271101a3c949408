#pragma once

// Little-endian primitive readers/writers shared by the binary file formats.

#include "sdelearn/error.hpp"

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace sdelearn::binary {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

inline void write_f64s(std::ostream& out, std::span<const double> values) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline std::uint32_t read_u32(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(std::string("truncated file reading ") + what);
    return v;
}

inline double read_f64(std::istream& in, const char* what) {
    double v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(std::string("truncated file reading ") + what);
    return v;
}

inline std::vector<double> read_f64s(std::istream& in, std::size_t count, const char* what) {
    std::vector<double> values(count);
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)))) {
        throw FormatError(std::string("truncated file reading ") + what);
    }
    return values;
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
    char buf[4] = {};
    if (!in.read(buf, 4) || std::string(buf, 4) != std::string(magic, 4)) {
        throw FormatError(std::string("bad magic, expected ") + magic);
    }
}

}  // namespace sdelearn::binary
