#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tapkit/linalg/autodiff.hpp"
#include "tapkit/linalg/ops.hpp"
#include "tapkit/random.hpp"
#include "tapkit/types.hpp"

namespace tapkit::experiments {

/// Half-open frame range [begin, end).
using FrameRange = std::pair<std::size_t, std::size_t>;

enum class SamplingScheme { uniform, aligned, predicted };

inline const char* to_string(SamplingScheme s) {
    switch (s) {
    case SamplingScheme::uniform: return "uniform";
    case SamplingScheme::aligned: return "aligned";
    case SamplingScheme::predicted: return "predicted";
    }
    return "?";
}

/// k equal-duration ranges. When n < k some ranges would be empty; those
/// reuse the frame at their start position instead.
inline std::vector<FrameRange> uniform_segments(std::size_t n, std::size_t k) {
    std::vector<FrameRange> out;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t b = i * n / k;
        std::size_t e = (i + 1) * n / k;
        if (e <= b) {
            b = std::min(b, n - 1);
            e = b + 1;
        }
        out.emplace_back(b, e);
    }
    return out;
}

/// Ranges delimited by `starts`, brought to exactly k ranges: while too many,
/// merge the adjacent pair with the smallest combined length (leftmost on
/// ties); while too few, split the longest range (leftmost on ties) in half.
/// A single-frame range splits into two copies of itself.
inline std::vector<FrameRange> aligned_segments(std::size_t n, const std::vector<std::size_t>& starts, std::size_t k) {
    std::vector<FrameRange> segs;
    std::size_t begin = 0;
    for (std::size_t s : starts) {
        if (s > begin && s < n) {
            segs.emplace_back(begin, s);
            begin = s;
        }
    }
    segs.emplace_back(begin, n);
    auto len = [](const FrameRange& r) { return r.second - r.first; };
    while (segs.size() > k) {
        std::size_t best = 0;
        for (std::size_t i = 1; i + 1 < segs.size(); ++i)
            if (len(segs[i]) + len(segs[i + 1]) < len(segs[best]) + len(segs[best + 1])) best = i;
        segs[best].second = segs[best + 1].second;
        segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(best) + 1);
    }
    while (segs.size() < k) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < segs.size(); ++i)
            if (len(segs[i]) > len(segs[best])) best = i;
        const FrameRange r = segs[best];
        FrameRange left = r, right = r;
        if (len(r) > 1) {
            const std::size_t mid = r.first + len(r) / 2;
            left.second = mid;
            right.first = mid;
        }
        segs[best] = left;
        segs.insert(segs.begin() + static_cast<std::ptrdiff_t>(best) + 1, right);
    }
    return segs;
}

/// Mean-pools each range and concatenates the results: 1 x (k * d).
inline std::vector<double> pooled_descriptor(const Matrix& frames, const std::vector<FrameRange>& segs) {
    std::vector<double> out(segs.size() * frames.cols(), 0.0);
    for (std::size_t s = 0; s < segs.size(); ++s) {
        const auto [b, e] = segs[s];
        for (std::size_t t = b; t < e; ++t)
            for (std::size_t c = 0; c < frames.cols(); ++c) out[s * frames.cols() + c] += frames(t, c);
        for (std::size_t c = 0; c < frames.cols(); ++c) out[s * frames.cols() + c] /= static_cast<double>(e - b);
    }
    return out;
}

struct SamplingInstance {
    std::string id;
    Matrix frames;
    std::vector<std::size_t> gt_starts;
    std::size_t label = 0;
    bool train = true;
};

struct ProbeConfig {
    std::size_t epochs = 300;
    double learning_rate = 0.1;
    double momentum = 0.9;
};

struct SamplingReport {
    SamplingScheme scheme = SamplingScheme::uniform;
    double top1 = 0.0;    // fraction of test instances classified correctly
    double avg_acc = 0.0; // mean of per-class accuracies
    std::size_t test_instances = 0;
};

/// Linear softmax probe on segment-pooled descriptors. Descriptors are
/// standardized with training-split statistics; the probe is trained by
/// full-batch gradient descent with momentum from a seeded initialization.
inline SamplingReport sampling_classifier(const std::vector<SamplingInstance>& data, SamplingScheme scheme,
                                          std::size_t num_segments, std::uint64_t seed,
                                          const std::map<std::string, std::vector<std::size_t>>* predicted = nullptr,
                                          const ProbeConfig& probe = {}) {
    if (num_segments == 0) throw Error(ErrorKind::input, "num_segments must be at least 1");
    if (scheme == SamplingScheme::predicted && !predicted) {
        throw Error(ErrorKind::input, "predicted sampling needs parser output");
    }
    std::size_t num_classes = 0;
    for (const auto& inst : data) num_classes = std::max(num_classes, inst.label + 1);

    std::vector<std::vector<double>> x_train, x_test;
    std::vector<std::size_t> y_train, y_test;
    for (const auto& inst : data) {
        const std::size_t n = inst.frames.rows();
        std::vector<FrameRange> segs;
        switch (scheme) {
        case SamplingScheme::uniform: segs = uniform_segments(n, num_segments); break;
        case SamplingScheme::aligned: segs = aligned_segments(n, inst.gt_starts, num_segments); break;
        case SamplingScheme::predicted: {
            auto it = predicted->find(inst.id);
            segs = aligned_segments(n, it == predicted->end() ? std::vector<std::size_t>{} : it->second, num_segments);
            break;
        }
        }
        (inst.train ? x_train : x_test).push_back(pooled_descriptor(inst.frames, segs));
        (inst.train ? y_train : y_test).push_back(inst.label);
    }
    if (x_train.empty() || x_test.empty()) throw Error(ErrorKind::input, "sampling study needs train and test instances");

    const std::size_t dim = x_train.front().size();
    std::vector<double> mean(dim, 0.0), scale(dim, 0.0);
    for (const auto& x : x_train)
        for (std::size_t c = 0; c < dim; ++c) mean[c] += x[c] / static_cast<double>(x_train.size());
    for (const auto& x : x_train)
        for (std::size_t c = 0; c < dim; ++c) scale[c] += (x[c] - mean[c]) * (x[c] - mean[c]) / static_cast<double>(x_train.size());
    for (double& s : scale) s = s > 1e-12 ? 1.0 / std::sqrt(s) : 1.0;
    auto to_matrix = [&](const std::vector<std::vector<double>>& rows) {
        Matrix m(rows.size(), dim);
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < dim; ++c) m(r, c) = (rows[r][c] - mean[c]) * scale[c];
        return m;
    };
    const Matrix xtr = to_matrix(x_train);
    const Matrix xte = to_matrix(x_test);

    Rng rng(seed);
    Matrix w = uniform_matrix(dim, num_classes, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
    Matrix b(1, num_classes);
    Matrix vw(dim, num_classes), vb(1, num_classes);
    for (std::size_t epoch = 0; epoch < probe.epochs; ++epoch) {
        ad::Tape tape;
        ad::Var wv = tape.variable(w), bv = tape.variable(b);
        ad::Var loss = ad::cross_entropy_rows(ad::linear(tape.constant(xtr), wv, bv), y_train);
        tape.backward(loss);
        for (std::size_t i = 0; i < w.size(); ++i) {
            vw[i] = probe.momentum * vw[i] + wv.grad()[i];
            w[i] -= probe.learning_rate * vw[i];
        }
        for (std::size_t i = 0; i < b.size(); ++i) {
            vb[i] = probe.momentum * vb[i] + bv.grad()[i];
            b[i] -= probe.learning_rate * vb[i];
        }
    }

    const Matrix logits = linear(xte, w, b);
    std::vector<std::size_t> correct(num_classes, 0), total(num_classes, 0);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const bool ok = argmax(logits.row(r)) == y_test[r];
        hits += ok ? 1 : 0;
        ++total[y_test[r]];
        correct[y_test[r]] += ok ? 1 : 0;
    }
    SamplingReport report;
    report.scheme = scheme;
    report.test_instances = logits.rows();
    report.top1 = static_cast<double>(hits) / static_cast<double>(logits.rows());
    std::size_t present = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (!total[c]) continue;
        ++present;
        report.avg_acc += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    }
    report.avg_acc /= static_cast<double>(present);
    return report;
}

} // namespace tapkit::experiments
