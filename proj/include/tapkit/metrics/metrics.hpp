#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tapkit/error.hpp"

namespace tapkit::metrics {

/// How predictions are credited against ground truth.
///  one_to_one  - each prediction and each ground truth is used at most once;
///                the matched count is the maximum over all such pairings.
///  independent - a prediction counts when its nearest ground truth is within
///                tolerance, so one ground truth can credit many predictions.
enum class MatchMode { one_to_one, independent };

inline const char* to_string(MatchMode mode) {
    return mode == MatchMode::one_to_one ? "one-to-one" : "independent";
}

inline MatchMode parse_match_mode(const std::string& s) {
    if (s == "one-to-one") return MatchMode::one_to_one;
    if (s == "independent") return MatchMode::independent;
    throw Error(ErrorKind::input, "unknown match mode '" + s + "'");
}

namespace detail {
inline double gap(std::size_t a, std::size_t b) {
    return a > b ? static_cast<double>(a - b) : static_cast<double>(b - a);
}
inline std::vector<std::size_t> sorted(std::span<const std::size_t> v) {
    std::vector<std::size_t> out(v.begin(), v.end());
    std::sort(out.begin(), out.end());
    return out;
}
} // namespace detail

/// Number of predictions credited at tolerance d (strict: distance < d).
inline std::size_t match_boundaries(std::span<const std::size_t> pred, std::span<const std::size_t> gt, double d_frames,
                                    MatchMode mode = MatchMode::one_to_one) {
    if (d_frames < 0.0) throw Error(ErrorKind::input, "tolerance must be non-negative");
    const auto p = detail::sorted(pred);
    const auto g = detail::sorted(gt);
    std::size_t matched = 0;
    if (mode == MatchMode::independent) {
        for (std::size_t s : p) {
            double nearest = std::numeric_limits<double>::infinity();
            auto it = std::lower_bound(g.begin(), g.end(), s);
            if (it != g.end()) nearest = std::min(nearest, detail::gap(*it, s));
            if (it != g.begin()) nearest = std::min(nearest, detail::gap(*std::prev(it), s));
            if (nearest < d_frames) ++matched;
        }
        return matched;
    }
    // Every prediction admits the open window (s - d, s + d); windows share a
    // width, so sweeping predictions in order and taking the leftmost free
    // ground truth inside each window yields a maximum matching.
    std::size_t j = 0;
    for (std::size_t s : p) {
        while (j < g.size() && g[j] < s && detail::gap(g[j], s) >= d_frames) ++j;
        if (j < g.size() && detail::gap(g[j], s) < d_frames) {
            ++matched;
            ++j;
        }
    }
    return matched;
}

struct Counts {
    std::size_t matched = 0;
    std::size_t predicted = 0;
    std::size_t ground_truth = 0;

    Counts& operator+=(const Counts& o) {
        matched += o.matched;
        predicted += o.predicted;
        ground_truth += o.ground_truth;
        return *this;
    }
};

struct Scores {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};

/// Empty-set conventions: no predictions -> precision 1 iff there is no
/// ground truth; no ground truth -> recall 1 iff there are no predictions;
/// F1 is 0 whenever recall + precision is 0.
inline Scores scores_from_counts(const Counts& c) {
    Scores s;
    if (c.predicted == 0) {
        s.precision = c.ground_truth == 0 ? 1.0 : 0.0;
    } else {
        s.precision = static_cast<double>(c.matched) / static_cast<double>(c.predicted);
    }
    if (c.ground_truth == 0) {
        s.recall = c.predicted == 0 ? 1.0 : 0.0;
    } else {
        s.recall = static_cast<double>(c.matched) / static_cast<double>(c.ground_truth);
    }
    const double sum = s.recall + s.precision;
    s.f1 = sum > 0.0 ? 2.0 * s.recall * s.precision / sum : 0.0;
    return s;
}

inline Counts count(std::span<const std::size_t> pred, std::span<const std::size_t> gt, double d_frames,
                    MatchMode mode = MatchMode::one_to_one) {
    return {match_boundaries(pred, gt, d_frames, mode), pred.size(), gt.size()};
}

inline Scores recall_prec_f1(std::span<const std::size_t> pred, std::span<const std::size_t> gt, double d_frames,
                             MatchMode mode = MatchMode::one_to_one) {
    return scores_from_counts(count(pred, gt, d_frames, mode));
}

// ---------------------------------------------------------------------------
// Threshold sweeps

enum class ThresholdKind { relative, absolute };

inline const char* to_string(ThresholdKind kind) { return kind == ThresholdKind::relative ? "rel" : "abs"; }

/// 0.05, 0.10, ..., 0.50 of the sequence length.
inline std::vector<double> relative_thresholds() {
    std::vector<double> out;
    for (int k = 1; k <= 10; ++k) out.push_back(k / 20.0);
    return out;
}

/// 5, 10, ..., 50 frames.
inline std::vector<double> absolute_thresholds() {
    std::vector<double> out;
    for (int k = 1; k <= 10; ++k) out.push_back(5.0 * k);
    return out;
}

struct EvalInstance {
    std::vector<std::size_t> pred;
    std::vector<std::size_t> gt;
    std::size_t length = 0; // T, used by relative thresholds
};

struct ThresholdScore {
    ThresholdKind kind = ThresholdKind::absolute;
    double d = 0.0;
    Scores scores;
};

struct MetricReport {
    MatchMode mode = MatchMode::one_to_one;
    bool macro = false;
    std::vector<ThresholdScore> relative;
    std::vector<ThresholdScore> absolute;
    Scores avg_relative; // "avg. F1-score (rel.)" is avg_relative.f1
    Scores avg_absolute; // "avg. F1-score (abs.)" is avg_absolute.f1
};

struct SweepOptions {
    MatchMode mode = MatchMode::one_to_one;
    bool macro = false; // average per-instance scores instead of pooling counts
};

inline Scores score_at(const std::vector<EvalInstance>& data, ThresholdKind kind, double d, const SweepOptions& opt) {
    auto tolerance = [&](const EvalInstance& inst) {
        return kind == ThresholdKind::relative ? d * static_cast<double>(inst.length) : d;
    };
    if (!opt.macro) {
        Counts pooled;
        for (const auto& inst : data) pooled += count(inst.pred, inst.gt, tolerance(inst), opt.mode);
        return scores_from_counts(pooled);
    }
    Scores mean;
    for (const auto& inst : data) {
        const Scores s = recall_prec_f1(inst.pred, inst.gt, tolerance(inst), opt.mode);
        mean.recall += s.recall;
        mean.precision += s.precision;
        mean.f1 += s.f1;
    }
    const double n = static_cast<double>(data.size());
    return {mean.recall / n, mean.precision / n, mean.f1 / n};
}

inline Scores average(const std::vector<ThresholdScore>& rows) {
    Scores avg;
    for (const auto& r : rows) {
        avg.recall += r.scores.recall;
        avg.precision += r.scores.precision;
        avg.f1 += r.scores.f1;
    }
    const double n = static_cast<double>(rows.size());
    return {avg.recall / n, avg.precision / n, avg.f1 / n};
}

inline MetricReport sweep(const std::vector<EvalInstance>& data, const SweepOptions& opt = {}) {
    if (data.empty()) throw Error(ErrorKind::input, "sweep over an empty dataset");
    MetricReport report;
    report.mode = opt.mode;
    report.macro = opt.macro;
    for (double d : relative_thresholds())
        report.relative.push_back({ThresholdKind::relative, d, score_at(data, ThresholdKind::relative, d, opt)});
    for (double d : absolute_thresholds())
        report.absolute.push_back({ThresholdKind::absolute, d, score_at(data, ThresholdKind::absolute, d, opt)});
    report.avg_relative = average(report.relative);
    report.avg_absolute = average(report.absolute);
    return report;
}

inline std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// CSV with header `threshold_kind,d,recall,precision,f1`, one row per
/// threshold and a closing `avg` row per kind.
inline void write_csv(std::ostream& os, const MetricReport& report) {
    os << "threshold_kind,d,recall,precision,f1\n";
    auto emit = [&](const std::vector<ThresholdScore>& rows, const Scores& avg, ThresholdKind kind) {
        for (const auto& r : rows) {
            os << to_string(kind) << ',' << format_fixed(r.d, kind == ThresholdKind::relative ? 2 : 0) << ','
               << format_fixed(r.scores.recall, 6) << ',' << format_fixed(r.scores.precision, 6) << ','
               << format_fixed(r.scores.f1, 6) << '\n';
        }
        os << to_string(kind) << ",avg," << format_fixed(avg.recall, 6) << ',' << format_fixed(avg.precision, 6)
           << ',' << format_fixed(avg.f1, 6) << '\n';
    };
    emit(report.relative, report.avg_relative, ThresholdKind::relative);
    emit(report.absolute, report.avg_absolute, ThresholdKind::absolute);
}

} // namespace tapkit::metrics
