#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "tapkit/linalg/autodiff.hpp"
#include "tapkit/random.hpp"
#include "tapkit/types.hpp"

namespace tapkit::baselines {

/// Two same-padded temporal convolutions with a ReLU between them, producing
/// one boundary logit per frame.
struct TCNModel {
    std::size_t width = 9;
    Matrix w1; // (width * d_f) x hidden
    Matrix b1; // 1 x hidden
    Matrix w2; // (width * hidden) x 1
    Matrix b2; // 1 x 1

    static TCNModel initialize(std::size_t feature_dim, std::size_t width, std::size_t hidden, std::uint64_t seed) {
        if (width % 2 == 0 || width == 0) throw Error(ErrorKind::config, "TCN kernel width must be odd");
        if (hidden == 0 || feature_dim == 0) throw Error(ErrorKind::config, "TCN dimensions must be positive");
        Rng rng(seed);
        TCNModel m;
        m.width = width;
        m.w1 = uniform_matrix(width * feature_dim, hidden, 1.0 / std::sqrt(static_cast<double>(width * feature_dim)), rng);
        m.b1 = Matrix(1, hidden);
        m.w2 = uniform_matrix(width * hidden, 1, 1.0 / std::sqrt(static_cast<double>(width * hidden)), rng);
        m.b2 = Matrix(1, 1);
        return m;
    }

    std::size_t feature_dim() const { return w1.rows() / width; }

    std::vector<Matrix*> parameters() { return {&w1, &b1, &w2, &b2}; }
};

inline ad::Var tcn_logits(ad::Tape& tape, ad::Var features, const TCNModel& m, std::vector<ad::Var>* params) {
    if (features.cols() != m.feature_dim()) {
        throw Error(ErrorKind::dimension, "features " + features.value().shape_string() +
                                              " do not match TCN input width " + std::to_string(m.feature_dim()));
    }
    const bool train = params != nullptr;
    auto put = [&](const Matrix& v) { return train ? tape.variable(v) : tape.constant(v); };
    ad::Var w1 = put(m.w1), b1 = put(m.b1), w2 = put(m.w2), b2 = put(m.b2);
    if (params) *params = {w1, b1, w2, b2};
    ad::Var hidden = ad::relu(ad::linear(ad::unfold_time(features, m.width), w1, b1));
    return ad::linear(ad::unfold_time(hidden, m.width), w2, b2);
}

inline double sigmoid(double z) {
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return std::clamp(s, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

/// Per-frame boundary probabilities, strictly inside (0, 1).
inline std::vector<double> tcn_scores(const Matrix& features, const TCNModel& m) {
    if (features.rows() == 0) throw Error(ErrorKind::input, "TCN on an empty sequence");
    ad::Tape tape;
    const Matrix& z = tcn_logits(tape, tape.constant(features), m, nullptr).value();
    std::vector<double> out(z.rows());
    for (std::size_t t = 0; t < z.rows(); ++t) out[t] = sigmoid(z(t, 0));
    return out;
}

/// 1 within +-radius frames of any boundary, else 0.
inline std::vector<double> boundary_targets(const std::vector<std::size_t>& starts, std::size_t n, std::size_t radius) {
    std::vector<double> y(n, 0.0);
    for (std::size_t b : starts) {
        const std::size_t lo = b >= radius ? b - radius : 0;
        for (std::size_t t = lo; t <= b + radius && t < n; ++t) y[t] = 1.0;
    }
    return y;
}

inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// Mean over frames of pos_weight * y * -log(s) + (1 - y) * -log(1 - s),
/// with s = sigmoid(z), computed from the logits directly.
inline double weighted_bce(const std::vector<double>& logits, const std::vector<double>& targets, double pos_weight) {
    double total = 0.0;
    for (std::size_t t = 0; t < logits.size(); ++t)
        total += pos_weight * targets[t] * softplus(-logits[t]) + (1.0 - targets[t]) * softplus(logits[t]);
    return total / static_cast<double>(logits.size());
}

inline ad::Var weighted_bce(ad::Var logits, const std::vector<double>& targets, double pos_weight) {
    const Matrix& z = logits.value();
    if (z.cols() != 1 || z.rows() != targets.size()) {
        throw Error(ErrorKind::dimension, "weighted_bce expects n x 1 logits matching " +
                                              std::to_string(targets.size()) + " targets, got " + z.shape_string());
    }
    const double value = weighted_bce(z.data(), targets, pos_weight);
    return logits.tape()->record(
        Matrix(1, 1, value), {logits.id()},
        [targets, pos_weight, in = logits.id()](const ad::Tape& t, ad::NodeId, const Matrix& g, std::vector<Matrix>& grads) {
            const Matrix& zv = t.value(in);
            Matrix d(zv.rows(), 1);
            const double n = static_cast<double>(zv.rows());
            for (std::size_t i = 0; i < zv.rows(); ++i) {
                const double s = 1.0 / (1.0 + std::exp(-zv(i, 0)));
                const double y = targets[i];
                d(i, 0) = g(0, 0) * (pos_weight * y * (s - 1.0) + (1.0 - y) * s) / n;
            }
            grads[0] = std::move(d);
        });
}

struct TCNTrainConfig {
    std::size_t radius = 1;               // neighbours labeled positive around each boundary
    std::optional<double> pos_weight;     // default: negatives / positives over the training set
    double threshold = 0.5;
    std::size_t nms_radius = 5;
    std::size_t width = 9;
    std::size_t hidden = 32;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t epochs = 50;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorKind::config, "threshold must lie in (0, 1)");
        if (pos_weight && !(*pos_weight > 0.0)) throw Error(ErrorKind::config, "pos_weight must be positive");
        if (batch_size == 0) throw Error(ErrorKind::config, "batch_size must be positive");
    }
};

struct TCNExample {
    Matrix features;
    std::vector<std::size_t> starts;
};

struct TCNTrainResult {
    TCNModel model;
    double pos_weight = 1.0;
    std::vector<double> history; // mean loss per epoch
};

inline TCNTrainResult tcn_train(const std::vector<TCNExample>& data, const TCNTrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw Error(ErrorKind::input, "TCN training set is empty");
    std::vector<std::vector<double>> targets;
    double positives = 0.0, negatives = 0.0;
    for (const auto& ex : data) {
        targets.push_back(boundary_targets(ex.starts, ex.features.rows(), cfg.radius));
        for (double y : targets.back()) (y > 0.5 ? positives : negatives) += 1.0;
    }
    if (positives == 0.0) throw Error(ErrorKind::config, "training set has no positive (boundary) frames");

    TCNTrainResult result;
    result.pos_weight = cfg.pos_weight.value_or(negatives / positives);
    result.model = TCNModel::initialize(data.front().features.cols(), cfg.width, cfg.hidden, cfg.seed);
    std::vector<Matrix*> params = result.model.parameters();
    std::vector<Matrix> velocity;
    for (const Matrix* p : params) velocity.emplace_back(p->rows(), p->cols());

    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, rng);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            std::vector<Matrix> batch;
            for (const Matrix* p : params) batch.emplace_back(p->rows(), p->cols());
            for (std::size_t k = begin; k < end; ++k) {
                ad::Tape tape;
                std::vector<ad::Var> vars;
                ad::Var z = tcn_logits(tape, tape.constant(data[order[k]].features), result.model, &vars);
                ad::Var loss = weighted_bce(z, targets[order[k]], result.pos_weight);
                if (!std::isfinite(loss.value()(0, 0))) {
                    throw Error(ErrorKind::numeric, "non-finite TCN loss at epoch " + std::to_string(epoch + 1));
                }
                tape.backward(loss);
                epoch_loss += loss.value()(0, 0);
                for (std::size_t p = 0; p < vars.size(); ++p) batch[p] += vars[p].grad();
            }
            const double inv = 1.0 / static_cast<double>(end - begin);
            for (std::size_t p = 0; p < params.size(); ++p)
                for (std::size_t i = 0; i < velocity[p].size(); ++i) {
                    velocity[p][i] = cfg.momentum * velocity[p][i] + inv * batch[p][i];
                    (*params[p])[i] -= cfg.learning_rate * velocity[p][i];
                }
        }
        result.history.push_back(epoch_loss / static_cast<double>(data.size()));
    }
    return result;
}

/// Frames scoring above `threshold`, thinned by non-maximum suppression: a
/// candidate survives unless a stronger (or equally strong, earlier) kept
/// candidate lies within `nms_radius` frames. Radius 0 keeps every candidate.
inline std::vector<std::size_t> peak_pick(const std::vector<double>& scores, double threshold, std::size_t nms_radius) {
    std::vector<std::size_t> candidates;
    for (std::size_t t = 0; t < scores.size(); ++t)
        if (scores[t] > threshold) candidates.push_back(t);
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<std::size_t> kept;
    for (std::size_t c : candidates) {
        bool suppressed = false;
        for (std::size_t k : kept)
            if ((c > k ? c - k : k - c) <= nms_radius) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(c);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

inline ParseResult tcn_parse(const FeatureSequence& seq, const TCNModel& m, double threshold, std::size_t nms_radius) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorKind::input, "threshold must lie in (0, 1)");
    ParseResult out;
    out.id = seq.id;
    for (std::size_t t : peak_pick(tcn_scores(seq.frames, m), threshold, nms_radius))
        if (t > 0) out.starts.push_back(t); // frame 0 is never a boundary
    Segmentation seg{seq.id, {}, seq.length(), out.starts};
    out.representatives = seg.frame_segments();
    return out;
}

} // namespace tapkit::baselines
