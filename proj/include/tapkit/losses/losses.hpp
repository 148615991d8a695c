#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "tapkit/linalg/autodiff.hpp"
#include "tapkit/random.hpp"
#include "tapkit/types.hpp"

namespace tapkit::losses {

struct LossConfig {
    double lambda = 1.0;        // added to the within-segment term
    double epsilon_div = 1e-8;  // guard on the cross-segment denominator
    double w_local = 1.0;
    double w_global = 1.0;
    std::size_t max_pairs = 0;  // per pair kind; 0 enumerates every pair

    // optimizer
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t epochs = 200;
    std::size_t batch_size = 8;
    double clip_norm = 1.0; // global gradient-norm clip, 0 disables
    std::uint64_t seed = 0;

    void validate() const {
        if (!(epsilon_div > 0.0)) throw Error(ErrorKind::config, "epsilon_div must be positive");
        if (lambda < 0.0) throw Error(ErrorKind::config, "lambda must be non-negative");
        if (w_local < 0.0 || w_global < 0.0) throw Error(ErrorKind::config, "loss weights must be non-negative");
        if (!(w_local > 0.0 || w_global > 0.0)) throw Error(ErrorKind::config, "at least one loss weight must be positive");
        if (batch_size == 0) throw Error(ErrorKind::config, "batch_size must be positive");
        if (learning_rate < 0.0 || momentum < 0.0) throw Error(ErrorKind::config, "optimizer settings must be non-negative");
    }
};

/// Frame pairs entering the within- and cross-segment averages.
struct PairSet {
    std::vector<std::pair<std::size_t, std::size_t>> within;
    std::vector<std::pair<std::size_t, std::size_t>> cross;
    std::size_t nonempty_segments = 0;
};

namespace detail {
inline void subsample(std::vector<std::pair<std::size_t, std::size_t>>& pairs, std::size_t limit, Rng& rng) {
    if (limit == 0 || pairs.size() <= limit) return;
    // partial Fisher-Yates, then restore enumeration order
    for (std::size_t i = 0; i < limit; ++i) std::swap(pairs[i], pairs[uniform_index(rng, i, pairs.size() - 1)]);
    pairs.resize(limit);
    std::sort(pairs.begin(), pairs.end());
}
} // namespace detail

inline PairSet enumerate_pairs(const Segmentation& seg, std::size_t n, std::size_t max_pairs = 0,
                               std::uint64_t seed = 0) {
    for (std::size_t i = 0; i < seg.starts.size(); ++i) {
        if (seg.starts[i] >= n || (i > 0 && seg.starts[i] <= seg.starts[i - 1])) {
            throw Error(ErrorKind::input, "segmentation of '" + seg.id + "' is not strictly increasing within [0, " +
                                              std::to_string(n) + ")");
        }
    }
    Segmentation sized = seg;
    sized.length = n;
    const auto labels = sized.frame_segments();
    PairSet pairs;
    std::vector<char> seen(seg.starts.size() + 1, 0);
    for (std::size_t label : labels) seen[label] = 1;
    for (char s : seen) pairs.nonempty_segments += s ? 1 : 0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) (labels[a] == labels[b] ? pairs.within : pairs.cross).emplace_back(a, b);
    if (max_pairs > 0) {
        Rng rng(seed);
        detail::subsample(pairs.within, max_pairs, rng);
        detail::subsample(pairs.cross, max_pairs, rng);
    }
    return pairs;
}

/// (L_sim + lambda) / (L_dissim + epsilon_div), where L_sim and L_dissim are
/// mean Euclidean distances between response rows over within-segment and
/// cross-segment frame pairs. Empty pair sets contribute 0.
inline ad::Var local_loss(ad::Var responses, const PairSet& pairs, double lambda, double epsilon_div) {
    const Matrix& a = responses.value();
    const std::size_t m = a.cols();
    auto distance = [&](std::size_t i, std::size_t j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            const double d = a(i, c) - a(j, c);
            acc += d * d;
        }
        return std::sqrt(acc);
    };
    auto mean_distance = [&](const auto& list) {
        if (list.empty()) return 0.0;
        double total = 0.0;
        for (auto [i, j] : list) total += distance(i, j);
        return total / static_cast<double>(list.size());
    };
    const double sim = mean_distance(pairs.within);
    const double dissim = mean_distance(pairs.cross);
    const double value = (sim + lambda) / (dissim + epsilon_div);

    const double inv_denom = 1.0 / (dissim + epsilon_div);
    const double d_sim = inv_denom;                          // dL/dL_sim
    const double d_dissim = -(sim + lambda) * inv_denom * inv_denom; // dL/dL_dissim
    return responses.tape()->record(
        Matrix(1, 1, value), {responses.id()},
        [pairs, d_sim, d_dissim, input = responses.id()](const ad::Tape& t, ad::NodeId, const Matrix& g,
                                                          std::vector<Matrix>& grads) {
            const Matrix& resp = t.value(input);
            Matrix d(resp.rows(), resp.cols());
            auto spread = [&](const auto& list, double coeff) {
                if (list.empty()) return;
                const double w = coeff * g(0, 0) / static_cast<double>(list.size());
                std::vector<double> diff(resp.cols());
                for (auto [i, j] : list) {
                    double norm2 = 0.0;
                    for (std::size_t c = 0; c < resp.cols(); ++c) {
                        diff[c] = resp(i, c) - resp(j, c);
                        norm2 += diff[c] * diff[c];
                    }
                    // the norm's subgradient at a zero difference is taken as 0
                    if (norm2 == 0.0) continue;
                    const double k = w / std::sqrt(norm2);
                    for (std::size_t c = 0; c < resp.cols(); ++c) {
                        d(i, c) += k * diff[c];
                        d(j, c) -= k * diff[c];
                    }
                }
            };
            spread(pairs.within, d_sim);
            spread(pairs.cross, d_dissim);
            grads[0] = std::move(d);
        });
}

/// Local loss on a segmentation. Warns when the instance has fewer than two
/// non-empty segments, since there are then no cross-segment pairs.
inline ad::Var local_loss(ad::Var responses, const Segmentation& seg, const LossConfig& cfg) {
    const PairSet pairs = enumerate_pairs(seg, responses.rows(), cfg.max_pairs, cfg.seed);
    if (pairs.nonempty_segments < 2) {
        warn("instance '" + seg.id + "' has a single segment; local loss uses the epsilon_div guard");
    }
    return local_loss(responses, pairs, cfg.lambda, cfg.epsilon_div);
}

inline double local_loss(const Matrix& responses, const Segmentation& seg, const LossConfig& cfg) {
    ad::Tape tape;
    return local_loss(tape.constant(responses), seg, cfg).value()(0, 0);
}

/// NLL of softmax over the frame-averaged classifier logits.
inline ad::Var global_loss(ad::Var final_features, ad::Var classifier, std::size_t label) {
    if (label >= classifier.cols()) {
        throw Error(ErrorKind::input, "label " + std::to_string(label) + " out of range for " +
                                          std::to_string(classifier.cols()) + " classes");
    }
    return ad::cross_entropy_rows(ad::matmul(ad::mean_rows(final_features), classifier), {label});
}

inline double global_loss(const Matrix& final_features, const Matrix& classifier, std::size_t label) {
    ad::Tape tape;
    return global_loss(tape.constant(final_features), tape.constant(classifier), label).value()(0, 0);
}

} // namespace tapkit::losses
