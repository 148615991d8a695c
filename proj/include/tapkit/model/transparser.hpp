#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "tapkit/linalg/autodiff.hpp"
#include "tapkit/random.hpp"

namespace tapkit::model {

inline constexpr std::size_t kNumHeads = 2;

struct Hyperparameters {
    std::size_t feature_dim = 64;  // d_f
    std::size_t pattern_dim = 64;  // d_phi
    std::size_t num_patterns = 32; // m
    std::size_t attn_dim = 32;     // d_a
    std::size_t value_dim = 32;    // d_v
    std::size_t hidden_dim = 128;  // FFN width
    std::size_t num_classes = 2;
    std::size_t num_units = 2;
    bool layer_norm = false; // parameter-free LayerNorm on each unit's output

    void validate() const {
        auto positive = [](std::size_t v, const char* name) {
            if (v == 0) throw Error(ErrorKind::config, std::string(name) + " must be positive");
        };
        positive(feature_dim, "feature_dim");
        positive(pattern_dim, "pattern_dim");
        positive(num_patterns, "num_patterns");
        positive(attn_dim, "attn_dim");
        positive(value_dim, "value_dim");
        positive(hidden_dim, "hidden_dim");
        positive(num_classes, "num_classes");
        positive(num_units, "num_units");
    }

    friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// Learnable pattern bank: one row per pattern.
struct PatternMiner {
    Matrix phi; // m x d_phi

    friend bool operator==(const PatternMiner&, const PatternMiner&) = default;
};

struct AttentionHead {
    Matrix query; // d_f x d_a
    Matrix key;   // d_phi x d_a
    Matrix value; // d_phi x d_v

    friend bool operator==(const AttentionHead&, const AttentionHead&) = default;
};

struct SPSParams {
    std::array<AttentionHead, kNumHeads> heads;
    Matrix merge_w; // (2 d_v) x d_f
    Matrix merge_b; // 1 x d_f
    Matrix ffn_w1;  // d_f x d_h
    Matrix ffn_b1;  // 1 x d_h
    Matrix ffn_w2;  // d_h x d_f
    Matrix ffn_b2;  // 1 x d_f

    friend bool operator==(const SPSParams&, const SPSParams&) = default;
};

struct SPSUnit {
    SPSParams params;
    PatternMiner miner;

    friend bool operator==(const SPSUnit&, const SPSUnit&) = default;
};

template <typename M>
struct BasicNamedParameter {
    std::string name;
    M* value;
};
using NamedParameter = BasicNamedParameter<Matrix>;
using ConstNamedParameter = BasicNamedParameter<const Matrix>;

class TransParserModel {
public:
    TransParserModel() = default;

    /// Uniform(-s, s) weights with s = 1/sqrt(fan_in); biases start at zero.
    static TransParserModel initialize(const Hyperparameters& hp, std::uint64_t seed) {
        hp.validate();
        Rng rng(seed);
        auto init = [&rng](std::size_t fan_in, std::size_t fan_out) {
            return uniform_matrix(fan_in, fan_out, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
        };
        TransParserModel model;
        model.hp_ = hp;
        for (std::size_t u = 0; u < hp.num_units; ++u) {
            SPSUnit unit;
            unit.miner.phi = uniform_matrix(hp.num_patterns, hp.pattern_dim,
                                            1.0 / std::sqrt(static_cast<double>(hp.pattern_dim)), rng);
            for (auto& head : unit.params.heads) {
                head.query = init(hp.feature_dim, hp.attn_dim);
                head.key = init(hp.pattern_dim, hp.attn_dim);
                head.value = init(hp.pattern_dim, hp.value_dim);
            }
            unit.params.merge_w = init(kNumHeads * hp.value_dim, hp.feature_dim);
            unit.params.merge_b = Matrix(1, hp.feature_dim);
            unit.params.ffn_w1 = init(hp.feature_dim, hp.hidden_dim);
            unit.params.ffn_b1 = Matrix(1, hp.hidden_dim);
            unit.params.ffn_w2 = init(hp.hidden_dim, hp.feature_dim);
            unit.params.ffn_b2 = Matrix(1, hp.feature_dim);
            model.units_.push_back(std::move(unit));
        }
        model.classifier_ = init(hp.feature_dim, hp.num_classes);
        return model;
    }

    const Hyperparameters& hyperparameters() const noexcept { return hp_; }
    std::vector<SPSUnit>& units() noexcept { return units_; }
    const std::vector<SPSUnit>& units() const noexcept { return units_; }
    Matrix& classifier() noexcept { return classifier_; }
    const Matrix& classifier() const noexcept { return classifier_; }

    /// Every learnable matrix in a fixed order. Names are stable and used by
    /// the checkpoint format.
    std::vector<NamedParameter> parameters() { return collect<Matrix>(*this); }
    std::vector<ConstNamedParameter> parameters() const { return collect<const Matrix>(*this); }

    std::vector<Matrix*> parameter_pointers() {
        std::vector<Matrix*> out;
        for (auto& p : parameters()) out.push_back(p.value);
        return out;
    }

    /// Checks every matrix against the hyperparameters.
    void validate_shapes() const {
        hp_.validate();
        if (units_.size() != hp_.num_units) throw Error(ErrorKind::dimension, "unit count does not match hyperparameters");
        TransParserModel reference = initialize(hp_, 0);
        const auto expected = reference.parameters();
        const auto actual = parameters();
        for (std::size_t i = 0; i < actual.size(); ++i) {
            if (!actual[i].value->same_shape(*expected[i].value)) {
                throw Error(ErrorKind::dimension, actual[i].name + " has shape " + actual[i].value->shape_string() +
                                                      ", expected " + expected[i].value->shape_string());
            }
        }
    }

    friend bool operator==(const TransParserModel&, const TransParserModel&) = default;

private:
    template <typename M, typename Self>
    static std::vector<BasicNamedParameter<M>> collect(Self& self) {
        std::vector<BasicNamedParameter<M>> out;
        for (std::size_t u = 0; u < self.units_.size(); ++u) {
            const std::string prefix = "unit" + std::to_string(u) + ".";
            auto& unit = self.units_[u];
            out.push_back({prefix + "phi", &unit.miner.phi});
            for (std::size_t h = 0; h < kNumHeads; ++h) {
                const std::string hp = prefix + "head" + std::to_string(h) + ".";
                out.push_back({hp + "query", &unit.params.heads[h].query});
                out.push_back({hp + "key", &unit.params.heads[h].key});
                out.push_back({hp + "value", &unit.params.heads[h].value});
            }
            out.push_back({prefix + "merge_w", &unit.params.merge_w});
            out.push_back({prefix + "merge_b", &unit.params.merge_b});
            out.push_back({prefix + "ffn_w1", &unit.params.ffn_w1});
            out.push_back({prefix + "ffn_b1", &unit.params.ffn_b1});
            out.push_back({prefix + "ffn_w2", &unit.params.ffn_w2});
            out.push_back({prefix + "ffn_b2", &unit.params.ffn_b2});
        }
        out.push_back({"classifier", &self.classifier_});
        return out;
    }

    Hyperparameters hp_;
    std::vector<SPSUnit> units_;
    Matrix classifier_;
};

// ---------------------------------------------------------------------------
// Differentiable forward pass

struct BoundHead {
    ad::Var query, key, value;
};

struct BoundUnit {
    ad::Var phi;
    std::array<BoundHead, kNumHeads> heads;
    ad::Var merge_w, merge_b, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

/// Model parameters recorded on a tape. `params` follows
/// TransParserModel::parameters() order.
struct BoundModel {
    std::vector<BoundUnit> units;
    ad::Var classifier;
    std::vector<ad::Var> params;
    bool layer_norm = false;
};

inline BoundUnit bind_unit(ad::Tape& tape, const SPSUnit& unit, bool trainable) {
    auto put = [&](const Matrix& m) { return trainable ? tape.variable(m) : tape.constant(m); };
    BoundUnit b;
    b.phi = put(unit.miner.phi);
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        b.heads[h] = {put(unit.params.heads[h].query), put(unit.params.heads[h].key), put(unit.params.heads[h].value)};
    }
    b.merge_w = put(unit.params.merge_w);
    b.merge_b = put(unit.params.merge_b);
    b.ffn_w1 = put(unit.params.ffn_w1);
    b.ffn_b1 = put(unit.params.ffn_b1);
    b.ffn_w2 = put(unit.params.ffn_w2);
    b.ffn_b2 = put(unit.params.ffn_b2);
    return b;
}

inline BoundModel bind(ad::Tape& tape, const TransParserModel& model, bool trainable) {
    BoundModel bound;
    bound.layer_norm = model.hyperparameters().layer_norm;
    for (const SPSUnit& unit : model.units()) {
        BoundUnit b = bind_unit(tape, unit, trainable);
        bound.params.push_back(b.phi);
        for (const BoundHead& head : b.heads) bound.params.insert(bound.params.end(), {head.query, head.key, head.value});
        bound.params.insert(bound.params.end(), {b.merge_w, b.merge_b, b.ffn_w1, b.ffn_b1, b.ffn_w2, b.ffn_b2});
        bound.units.push_back(b);
    }
    bound.classifier = trainable ? tape.variable(model.classifier()) : tape.constant(model.classifier());
    bound.params.push_back(bound.classifier);
    return bound;
}

struct UnitOutput {
    ad::Var features; // n x d_f
    ad::Var response; // n x m, mean of the two heads' attention rows
};

/// One SPS unit: attention of every frame against the pattern bank, head
/// merge, residual add, then FFN.
inline UnitOutput sps_forward(ad::Var features, const BoundUnit& unit, bool layer_norm = false) {
    std::array<ad::Var, kNumHeads> residuals;
    std::array<ad::Var, kNumHeads> responses;
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        const BoundHead& head = unit.heads[h];
        ad::Var queries = ad::matmul(features, head.query); // n x d_a
        ad::Var keys = ad::matmul(unit.phi, head.key);      // m x d_a
        ad::Var values = ad::matmul(unit.phi, head.value);  // m x d_v
        responses[h] = ad::softmax_rows(ad::matmul_nt(queries, keys));
        residuals[h] = ad::matmul(responses[h], values);
    }
    ad::Var merged = ad::linear(ad::concat_cols(residuals[0], residuals[1]), unit.merge_w, unit.merge_b);
    ad::Var hidden = ad::relu(ad::linear(ad::add(features, merged), unit.ffn_w1, unit.ffn_b1));
    ad::Var out = ad::linear(hidden, unit.ffn_w2, unit.ffn_b2);
    if (layer_norm) out = ad::layer_norm_rows(out);
    return {out, ad::scale(ad::add(responses[0], responses[1]), 0.5)};
}

struct TapeForward {
    std::vector<UnitOutput> units;
    ad::Var logits; // 1 x num_classes

    const UnitOutput& last() const { return units.back(); }
};

inline TapeForward forward(ad::Var features, const BoundModel& model) {
    if (features.rows() == 0) throw Error(ErrorKind::input, "forward on an empty sequence");
    TapeForward out;
    ad::Var current = features;
    for (const BoundUnit& unit : model.units) {
        out.units.push_back(sps_forward(current, unit, model.layer_norm));
        current = out.units.back().features;
    }
    out.logits = ad::matmul(ad::mean_rows(current), model.classifier);
    return out;
}

// ---------------------------------------------------------------------------
// Inference

struct UnitTrace {
    Matrix response; // n x m, row-stochastic
    Matrix features; // n x d_f
};

struct ForwardTrace {
    std::vector<UnitTrace> units;
    Matrix logits;

    const Matrix& final_response() const { return units.back().response; }
    const Matrix& final_features() const { return units.back().features; }
};

inline void check_input(const Matrix& features, const Hyperparameters& hp) {
    if (features.rows() == 0) throw Error(ErrorKind::input, "forward on an empty sequence");
    if (features.cols() != hp.feature_dim) {
        throw Error(ErrorKind::dimension, "features " + features.shape_string() + " do not match feature_dim " +
                                              std::to_string(hp.feature_dim));
    }
}

inline std::pair<Matrix, Matrix> sps_forward(const Matrix& features, const SPSUnit& unit, bool layer_norm = false) {
    if (features.cols() != unit.params.heads[0].query.rows()) {
        throw Error(ErrorKind::dimension, "features " + features.shape_string() + " do not match query weights " +
                                              unit.params.heads[0].query.shape_string());
    }
    ad::Tape tape;
    UnitOutput out = sps_forward(tape.constant(features), bind_unit(tape, unit, false), layer_norm);
    return {out.features.value(), out.response.value()};
}

inline ForwardTrace forward(const Matrix& features, const TransParserModel& model) {
    check_input(features, model.hyperparameters());
    ad::Tape tape;
    BoundModel bound = bind(tape, model, false);
    TapeForward fwd = forward(tape.constant(features), bound);
    ForwardTrace trace;
    for (const UnitOutput& unit : fwd.units) trace.units.push_back({unit.response.value(), unit.features.value()});
    trace.logits = fwd.logits.value();
    return trace;
}

// ---------------------------------------------------------------------------
// Pattern retrieval

struct TracedInstance {
    std::string id;
    ForwardTrace trace;
};

struct Retrieval {
    std::string id;
    std::size_t frame = 0;
    double score = 0.0;

    friend bool operator==(const Retrieval&, const Retrieval&) = default;
};

/// Frames with the highest last-unit response to pattern k across a pool of
/// instances. Ties go to the smaller (instance id, frame).
inline std::vector<Retrieval> retrieve_top_frames(const std::vector<TracedInstance>& pool, std::size_t pattern,
                                                  std::size_t top_n) {
    std::vector<Retrieval> all;
    for (const auto& inst : pool) {
        const Matrix& resp = inst.trace.final_response();
        if (pattern >= resp.cols()) {
            throw Error(ErrorKind::index, "pattern index " + std::to_string(pattern) + " out of range for " +
                                              std::to_string(resp.cols()) + " patterns");
        }
        for (std::size_t t = 0; t < resp.rows(); ++t) all.push_back({inst.id, t, resp(t, pattern)});
    }
    auto better = [](const Retrieval& a, const Retrieval& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.id != b.id) return a.id < b.id;
        return a.frame < b.frame;
    };
    const std::size_t keep = std::min(top_n, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
    all.resize(keep);
    return all;
}

} // namespace tapkit::model
