#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "tapkit/error.hpp"

namespace tapkit::io {

// Little-endian scalar encoding, independent of host byte order.

inline void write_u32(std::ostream& os, std::uint32_t v) {
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    os.write(b.data(), b.size());
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    os.write(b.data(), b.size());
}

inline void write_f32(std::ostream& os, float v) { write_u32(os, std::bit_cast<std::uint32_t>(v)); }
inline void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

/// Reads with a context string for error messages; any short read is a
/// format error rather than undefined behaviour.
class Reader {
public:
    Reader(std::istream& is, std::string context) : is_(is), context_(std::move(context)) {}

    void bytes(char* dst, std::size_t n) {
        is_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n) {
            throw Error(ErrorKind::format, context_ + ": truncated file");
        }
    }

    std::uint32_t u32() {
        std::array<unsigned char, 4> b{};
        bytes(reinterpret_cast<char*>(b.data()), b.size());
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        std::array<unsigned char, 8> b{};
        bytes(reinterpret_cast<char*>(b.data()), b.size());
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::string string(std::size_t max_len = 1u << 20) {
        const std::uint32_t n = u32();
        if (n > max_len) throw Error(ErrorKind::format, context_ + ": string length " + std::to_string(n) + " too large");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }

    void expect_magic(const char (&magic)[5]) {
        std::array<char, 4> got{};
        bytes(got.data(), got.size());
        if (std::string(got.data(), 4) != std::string(magic, 4)) {
            throw Error(ErrorKind::format, context_ + ": bad magic, expected '" + std::string(magic, 4) + "'");
        }
    }

    bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

    const std::string& context() const { return context_; }

private:
    std::istream& is_;
    std::string context_;
};

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
    return out;
}

} // namespace tapkit::io
