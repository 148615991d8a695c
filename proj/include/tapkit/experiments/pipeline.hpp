#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tapkit/data/dataset.hpp"
#include "tapkit/losses/train.hpp"
#include "tapkit/metrics/metrics.hpp"
#include "tapkit/model/transparser.hpp"
#include "tapkit/parsing/parsing.hpp"

namespace tapkit::experiments {

inline std::vector<losses::TrainingExample> to_training_examples(const std::vector<data::Instance>& instances,
                                                                 const std::vector<std::string>& vocab) {
    std::vector<losses::TrainingExample> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) {
        out.push_back({inst.features.frames, inst.record.segmentation(), data::class_index(vocab, inst.record.label)});
    }
    return out;
}

inline std::vector<ParseResult> parse_instances(const model::TransParserModel& net,
                                                const std::vector<data::Instance>& instances,
                                                std::optional<std::size_t> smoothing_window = std::nullopt) {
    std::vector<ParseResult> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) {
        const auto trace = model::forward(inst.features.frames, net);
        out.push_back(parsing::extract_boundaries(trace.final_response(), smoothing_window, inst.record.id));
    }
    return out;
}

/// Pairs predictions with ground truth by id. Every prediction must refer to
/// a known instance; ground-truth instances without a prediction are skipped.
inline std::vector<metrics::EvalInstance> pair_with_ground_truth(const std::vector<ParseResult>& preds,
                                                                 const std::vector<data::AnnotationRecord>& gt) {
    std::map<std::string, const data::AnnotationRecord*> by_id;
    for (const auto& r : gt) by_id[r.id] = &r;
    std::vector<metrics::EvalInstance> out;
    for (const auto& p : preds) {
        auto it = by_id.find(p.id);
        if (it == by_id.end()) throw Error(ErrorKind::validation, "prediction for unknown instance '" + p.id + "'");
        for (std::size_t s : p.starts)
            if (s == 0 || s >= it->second->length) {
                throw Error(ErrorKind::validation, "prediction " + std::to_string(s) + " for '" + p.id +
                                                       "' lies outside [1, " + std::to_string(it->second->length) + ")");
            }
        out.push_back({p.starts, it->second->boundaries, it->second->length});
    }
    return out;
}

} // namespace tapkit::experiments
