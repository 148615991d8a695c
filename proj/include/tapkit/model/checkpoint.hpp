#pragma once

#include <string>
#include <vector>

#include "tapkit/data/binary_io.hpp"
#include "tapkit/model/transparser.hpp"

namespace tapkit::model {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// A trained model plus the label vocabulary it was trained against.
struct Checkpoint {
    TransParserModel model;
    std::vector<std::string> labels;
};

// Layout (little-endian):
//   "TPSR" | u32 version
//   u32 field count (9) | u32 feature_dim, pattern_dim, num_patterns, attn_dim,
//                             value_dim, hidden_dim, num_classes, num_units, layer_norm
//   u32 label count | per label: u32 byte length, UTF-8 bytes
//   u32 matrix count | per matrix: u32 name length, name bytes, u32 rows, u32 cols,
//                                  rows*cols float64 row-major
// Matrices appear in TransParserModel::parameters() order.

inline void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
    const Hyperparameters& hp = ckpt.model.hyperparameters();
    os.write("TPSR", 4);
    io::write_u32(os, kCheckpointFormatVersion);
    const std::vector<std::size_t> fields{hp.feature_dim, hp.pattern_dim, hp.num_patterns, hp.attn_dim, hp.value_dim,
                                          hp.hidden_dim,  hp.num_classes, hp.num_units,    hp.layer_norm ? 1u : 0u};
    io::write_u32(os, static_cast<std::uint32_t>(fields.size()));
    for (std::size_t f : fields) io::write_u32(os, static_cast<std::uint32_t>(f));
    io::write_u32(os, static_cast<std::uint32_t>(ckpt.labels.size()));
    for (const auto& l : ckpt.labels) io::write_string(os, l);
    const auto params = ckpt.model.parameters();
    io::write_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        io::write_string(os, p.name);
        io::write_u32(os, static_cast<std::uint32_t>(p.value->rows()));
        io::write_u32(os, static_cast<std::uint32_t>(p.value->cols()));
        for (double v : p.value->data()) io::write_f64(os, v);
    }
}

inline Checkpoint read_checkpoint(std::istream& is, const std::string& context = "checkpoint") {
    io::Reader r(is, context);
    r.expect_magic("TPSR");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointFormatVersion) {
        throw Error(ErrorKind::format, context + ": unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t nfields = r.u32();
    if (nfields != 9) throw Error(ErrorKind::format, context + ": expected 9 hyperparameter fields");
    Hyperparameters hp;
    hp.feature_dim = r.u32();
    hp.pattern_dim = r.u32();
    hp.num_patterns = r.u32();
    hp.attn_dim = r.u32();
    hp.value_dim = r.u32();
    hp.hidden_dim = r.u32();
    hp.num_classes = r.u32();
    hp.num_units = r.u32();
    hp.layer_norm = r.u32() != 0;
    try {
        hp.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::format, context + ": " + e.what());
    }

    Checkpoint ckpt;
    const std::uint32_t nlabels = r.u32();
    if (nlabels > (1u << 20)) throw Error(ErrorKind::format, context + ": implausible label count");
    for (std::uint32_t i = 0; i < nlabels; ++i) ckpt.labels.push_back(r.string());

    ckpt.model = TransParserModel::initialize(hp, 0);
    auto params = ckpt.model.parameters();
    const std::uint32_t nmats = r.u32();
    if (nmats != params.size()) {
        throw Error(ErrorKind::format, context + ": " + std::to_string(nmats) + " matrices, expected " +
                                           std::to_string(params.size()));
    }
    for (auto& p : params) {
        const std::string name = r.string(4096);
        if (name != p.name) throw Error(ErrorKind::format, context + ": expected matrix '" + p.name + "', found '" + name + "'");
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        if (rows != p.value->rows() || cols != p.value->cols()) {
            throw Error(ErrorKind::format, context + ": matrix '" + name + "' has shape " + std::to_string(rows) + "x" +
                                               std::to_string(cols) + ", expected " + p.value->shape_string());
        }
        for (double& v : p.value->data()) v = r.f64();
    }
    if (!r.at_end()) throw Error(ErrorKind::format, context + ": trailing bytes");
    return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    auto out = io::open_out(path);
    write_checkpoint(out, ckpt);
    if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    auto in = io::open_in(path);
    return read_checkpoint(in, path);
}

} // namespace tapkit::model
