#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tapkit/linalg/ops.hpp"
#include "tapkit/types.hpp"

namespace tapkit::parsing {

/// Per-frame argmax of the response rows; ties go to the lowest index.
inline std::vector<std::size_t> representatives(const Matrix& responses) {
    std::vector<std::size_t> reps(responses.rows());
    for (std::size_t t = 0; t < responses.rows(); ++t) reps[t] = argmax(responses.row(t));
    return reps;
}

/// Majority vote over a centered window (clipped at the sequence ends).
/// A tie keeps the previous frame's smoothed value when it is among the
/// winners, else the frame's own value, else the smallest winner.
inline std::vector<std::size_t> majority_filter(const std::vector<std::size_t>& labels, std::size_t window) {
    if (window % 2 == 0) throw Error(ErrorKind::input, "smoothing window must be odd, got " + std::to_string(window));
    const std::size_t half = window / 2;
    const std::size_t n = labels.size();
    std::vector<std::size_t> out(n);
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t t = 0; t < n; ++t) {
        counts.clear();
        const std::size_t lo = t >= half ? t - half : 0;
        const std::size_t hi = std::min(n - 1, t + half);
        for (std::size_t k = lo; k <= hi; ++k) ++counts[labels[k]];
        std::size_t best = 0;
        for (const auto& [label, count] : counts) best = std::max(best, count);
        auto wins = [&](std::size_t label) {
            auto it = counts.find(label);
            return it != counts.end() && it->second == best;
        };
        if (t > 0 && wins(out[t - 1])) {
            out[t] = out[t - 1];
        } else if (wins(labels[t])) {
            out[t] = labels[t];
        } else {
            for (const auto& [label, count] : counts)
                if (count == best) {
                    out[t] = label;
                    break;
                }
        }
    }
    return out;
}

/// Reads sub-action starts off the last unit's responses: a new sub-action
/// starts at every frame whose representative pattern differs from the
/// previous frame's. Frame 0 is never reported.
inline ParseResult extract_boundaries(const Matrix& responses, std::optional<std::size_t> smoothing_window = std::nullopt,
                                      std::string id = {}) {
    if (responses.rows() == 0 || responses.cols() == 0) {
        throw Error(ErrorKind::input, "extract_boundaries on empty responses");
    }
    ParseResult result;
    result.id = std::move(id);
    result.representatives = representatives(responses);
    if (smoothing_window) result.representatives = majority_filter(result.representatives, *smoothing_window);
    result.starts = transitions(result.representatives);
    return result;
}

} // namespace tapkit::parsing
