#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tapkit/data/annotations.hpp"

namespace tapkit::data {

inline constexpr std::size_t kPositionBins = 20;

struct ClassStats {
    std::size_t instances = 0;
    double avg_boundaries = 0.0;
    std::map<std::string, std::size_t> per_split;
};

struct DatasetStats {
    std::size_t instances = 0;
    std::map<std::string, ClassStats> classes;
    std::array<double, kPositionBins> position_histogram{}; // boundary / T, sums to 1 when any boundary exists
    std::size_t boundaries = 0;
};

inline std::size_t position_bin(std::size_t boundary, std::size_t length) {
    const auto bin = static_cast<std::size_t>(static_cast<double>(kPositionBins) * static_cast<double>(boundary) /
                                              static_cast<double>(length));
    return std::min(bin, kPositionBins - 1);
}

inline DatasetStats compute_dataset_stats(const std::vector<AnnotationRecord>& records) {
    if (records.empty()) throw Error(ErrorKind::input, "statistics of an empty dataset");
    DatasetStats s;
    s.instances = records.size();
    std::array<std::size_t, kPositionBins> counts{};
    for (const auto& r : records) {
        ClassStats& c = s.classes[r.label];
        ++c.instances;
        ++c.per_split[r.split];
        c.avg_boundaries += static_cast<double>(r.boundaries.size());
        for (std::size_t b : r.boundaries) ++counts[position_bin(b, r.length)];
        s.boundaries += r.boundaries.size();
    }
    for (auto& [label, c] : s.classes) c.avg_boundaries /= static_cast<double>(c.instances);
    for (std::size_t i = 0; i < kPositionBins; ++i)
        s.position_histogram[i] = s.boundaries ? static_cast<double>(counts[i]) / static_cast<double>(s.boundaries) : 0.0;
    return s;
}

/// Headline shape of the full TAPOS annotation set: 21 classes, the largest
/// (high jump) with more than 1,600 instances.
inline bool matches_tapos_shape(const DatasetStats& s) {
    std::size_t largest = 0;
    for (const auto& [label, c] : s.classes) largest = std::max(largest, c.instances);
    return s.classes.size() == 21 && largest > 1600;
}

inline nlohmann::json to_json(const DatasetStats& s) {
    nlohmann::json classes = nlohmann::json::object();
    for (const auto& [label, c] : s.classes)
        classes[label] = {{"instances", c.instances}, {"avg_boundaries", c.avg_boundaries}, {"per_split", c.per_split}};
    return {{"instances", s.instances},
            {"boundaries", s.boundaries},
            {"classes", classes},
            {"position_histogram", s.position_histogram}};
}

} // namespace tapkit::data
