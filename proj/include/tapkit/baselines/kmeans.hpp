#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "tapkit/random.hpp"
#include "tapkit/types.hpp"

namespace tapkit::baselines {

struct KMeansResult {
    std::vector<std::size_t> labels;
    Matrix centroids;
    double wcss = 0.0;
    std::size_t iterations = 0;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
}

/// Within-cluster sum of squares of a labeling, each cluster measured
/// against its own mean.
inline double within_cluster_ss(const Matrix& x, const std::vector<std::size_t>& labels, std::size_t k) {
    Matrix means(k, x.cols());
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t t = 0; t < x.rows(); ++t) {
        ++sizes[labels[t]];
        for (std::size_t c = 0; c < x.cols(); ++c) means(labels[t], c) += x(t, c);
    }
    for (std::size_t j = 0; j < k; ++j)
        if (sizes[j])
            for (double& v : means.row(j)) v /= static_cast<double>(sizes[j]);
    double total = 0.0;
    for (std::size_t t = 0; t < x.rows(); ++t) total += squared_distance(x.row(t), means.row(labels[t]));
    return total;
}

namespace detail {
inline std::size_t nearest(std::span<const double> x, const Matrix& centroids, std::size_t used) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < used; ++j) {
        const double d = squared_distance(x, centroids.row(j));
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}
} // namespace detail

/// Lloyd's algorithm. The first centre is a seeded random frame, each further
/// centre the frame farthest from its nearest centre (ties: lowest index).
/// Stops after 100 iterations or once no centre moves by 1e-6.
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, std::size_t max_iterations = 100,
                           double tolerance = 1e-6) {
    const std::size_t n = x.rows();
    if (k == 0) throw Error(ErrorKind::input, "k must be at least 1");
    if (k > n) {
        throw Error(ErrorKind::input, "k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " frames");
    }
    Rng rng(seed);
    KMeansResult r;
    r.centroids = Matrix(k, x.cols());
    auto place = [&](std::size_t j, std::size_t frame) {
        std::copy(x.row(frame).begin(), x.row(frame).end(), r.centroids.row(j).begin());
    };
    place(0, uniform_index(rng, 0, n - 1));
    for (std::size_t j = 1; j < k; ++j) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double d = squared_distance(x.row(t), r.centroids.row(detail::nearest(x.row(t), r.centroids, j)));
            if (d > far_d) {
                far_d = d;
                far = t;
            }
        }
        place(j, far);
    }

    r.labels.assign(n, 0);
    auto assign = [&] {
        for (std::size_t t = 0; t < n; ++t) r.labels[t] = detail::nearest(x.row(t), r.centroids, k);
    };
    for (r.iterations = 0; r.iterations < max_iterations;) {
        assign();
        ++r.iterations;
        Matrix sums(k, x.cols());
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t t = 0; t < n; ++t) {
            ++sizes[r.labels[t]];
            for (std::size_t c = 0; c < x.cols(); ++c) sums(r.labels[t], c) += x(t, c);
        }
        double shift = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (!sizes[j]) continue; // empty cluster keeps its centre
            for (double& v : sums.row(j)) v /= static_cast<double>(sizes[j]);
            shift = std::max(shift, std::sqrt(squared_distance(sums.row(j), r.centroids.row(j))));
            std::copy(sums.row(j).begin(), sums.row(j).end(), r.centroids.row(j).begin());
        }
        if (shift < tolerance) break;
    }
    assign();
    r.wcss = within_cluster_ss(x, r.labels, k);
    return r;
}

/// Clusters the frames and reads boundaries off label changes.
inline ParseResult kmeans_parse(const FeatureSequence& seq, std::size_t k, std::uint64_t seed) {
    KMeansResult km = kmeans(seq.frames, k, seed);
    ParseResult out;
    out.id = seq.id;
    out.starts = transitions(km.labels);
    out.representatives = std::move(km.labels);
    return out;
}

} // namespace tapkit::baselines
