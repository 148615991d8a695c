#pragma once

#include <sstream>
#include <string>

#include "tapkit/data/binary_io.hpp"
#include "tapkit/linalg/matrix.hpp"

namespace tapkit::data {

inline constexpr std::uint32_t kFeatureFormatVersion = 1;

/// Feature container layout (all little-endian):
///   "FSEQ" | u32 version | u32 n | u32 d | n*d float32, row-major
/// Values are stored in 32 bits and widened to double on load.
inline void write_features(std::ostream& os, const Matrix& frames) {
    if (frames.rows() == 0) throw Error(ErrorKind::input, "refusing to save a zero-frame feature sequence");
    os.write("FSEQ", 4);
    io::write_u32(os, kFeatureFormatVersion);
    io::write_u32(os, static_cast<std::uint32_t>(frames.rows()));
    io::write_u32(os, static_cast<std::uint32_t>(frames.cols()));
    for (double v : frames.data()) io::write_f32(os, static_cast<float>(v));
}

inline Matrix read_features(std::istream& is, const std::string& context = "feature file") {
    io::Reader r(is, context);
    r.expect_magic("FSEQ");
    const std::uint32_t version = r.u32();
    if (version != kFeatureFormatVersion) {
        throw Error(ErrorKind::format, context + ": unsupported version " + std::to_string(version));
    }
    const std::uint32_t n = r.u32();
    const std::uint32_t d = r.u32();
    if (n == 0) throw Error(ErrorKind::format, context + ": zero frames");
    if (static_cast<std::uint64_t>(n) * d > (1ull << 31)) throw Error(ErrorKind::format, context + ": shape too large");
    Matrix m(n, d);
    for (double& v : m.data()) v = static_cast<double>(r.f32());
    if (!r.at_end()) throw Error(ErrorKind::format, context + ": trailing bytes after " + std::to_string(n) + "x" +
                                                        std::to_string(d) + " payload");
    return m;
}

inline void save_features(const Matrix& frames, const std::string& path) {
    auto out = io::open_out(path);
    write_features(out, frames);
    if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

inline Matrix load_features(const std::string& path) {
    auto in = io::open_in(path);
    return read_features(in, path);
}

/// Rounds every entry to float32, the precision features are stored at.
inline Matrix round_to_storage(Matrix m) {
    for (double& v : m.data()) v = static_cast<double>(static_cast<float>(v));
    return m;
}

} // namespace tapkit::data
