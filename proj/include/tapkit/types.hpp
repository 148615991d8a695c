#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tapkit/linalg/matrix.hpp"

namespace tapkit {

/// Per-frame features of one action instance, n x d_f.
struct FeatureSequence {
    std::string id;
    Matrix frames;

    std::size_t length() const noexcept { return frames.rows(); }
    std::size_t dim() const noexcept { return frames.cols(); }
};

/// Ground-truth or predicted split of an instance into sub-actions.
/// `starts` holds internal start frames only: frame 0 is implicit.
struct Segmentation {
    std::string id;
    std::string label;
    std::size_t length = 0;
    std::vector<std::size_t> starts;

    std::size_t num_segments() const noexcept { return starts.size() + 1; }

    /// Segment index of every frame, 0-based.
    std::vector<std::size_t> frame_segments() const {
        std::vector<std::size_t> out(length, 0);
        std::size_t seg = 0;
        for (std::size_t t = 0; t < length; ++t) {
            while (seg < starts.size() && starts[seg] <= t) ++seg;
            out[t] = seg;
        }
        return out;
    }
};

/// Output of any parser: internal starts in [1, n) plus the per-frame label
/// sequence (representative pattern, cluster, or segment index) they came from.
struct ParseResult {
    std::string id;
    std::vector<std::size_t> starts;
    std::vector<std::size_t> representatives;
};

/// Starts where consecutive labels differ.
inline std::vector<std::size_t> transitions(const std::vector<std::size_t>& labels) {
    std::vector<std::size_t> starts;
    for (std::size_t t = 1; t < labels.size(); ++t)
        if (labels[t] != labels[t - 1]) starts.push_back(t);
    return starts;
}

} // namespace tapkit
