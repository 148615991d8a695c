#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tapkit/experiments/pipeline.hpp"

namespace tapkit::experiments {

struct AblationCell {
    std::string label;
    std::size_t num_units = 1;
    bool local_loss = true;
};

/// The three rows of the units-by-local-loss study.
inline std::vector<AblationCell> default_ablation_grid() {
    return {{"x1 w/o local loss", 1, false}, {"x1 w/ local loss", 1, true}, {"x2 w/ local loss", 2, true}};
}

struct AblationBase {
    model::Hyperparameters hp;   // num_units is overridden per cell
    losses::LossConfig loss;     // w_local is zeroed for cells without local loss
    std::uint64_t model_seed = 0;
    std::optional<std::size_t> smoothing_window;
    metrics::SweepOptions sweep;
};

struct AblationRow {
    AblationCell cell;
    metrics::Scores avg_absolute; // averaged over absolute d = 5..50
    metrics::MetricReport report;
};

inline void validate_grid(const std::vector<AblationCell>& grid) {
    if (grid.empty()) throw Error(ErrorKind::config, "ablation grid is empty");
    for (const auto& c : grid)
        if (c.num_units == 0) throw Error(ErrorKind::config, "ablation cell '" + c.label + "' has zero units");
}

/// Trains one model per cell from the same seeds and sweeps it on `test`.
inline std::vector<AblationRow> run_ablation(const std::vector<data::Instance>& train,
                                             const std::vector<data::Instance>& test,
                                             const std::vector<std::string>& vocab,
                                             const std::vector<AblationCell>& grid, const AblationBase& base,
                                             const std::function<void(const AblationCell&, const losses::EpochRecord&)>&
                                                 on_epoch = nullptr) {
    validate_grid(grid);
    const auto examples = to_training_examples(train, vocab);
    std::vector<data::AnnotationRecord> gt;
    for (const auto& inst : test) gt.push_back(inst.record);

    std::vector<AblationRow> rows;
    for (const auto& cell : grid) {
        model::Hyperparameters hp = base.hp;
        hp.num_units = cell.num_units;
        losses::LossConfig cfg = base.loss;
        if (!cell.local_loss) cfg.w_local = 0.0;
        auto net = model::TransParserModel::initialize(hp, base.model_seed);
        auto result = losses::train(examples, std::move(net), cfg, [&](const losses::EpochRecord& r) {
            if (on_epoch) on_epoch(cell, r);
        });
        const auto preds = parse_instances(result.model, test, base.smoothing_window);
        auto report = metrics::sweep(pair_with_ground_truth(preds, gt), base.sweep);
        rows.push_back({cell, report.avg_absolute, std::move(report)});
    }
    return rows;
}

inline void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
    os << "setting,units,local_loss,avg_f1,avg_recall,avg_precision\n";
    for (const auto& r : rows) {
        os << r.cell.label << ',' << r.cell.num_units << ',' << (r.cell.local_loss ? 1 : 0) << ','
           << metrics::format_fixed(r.avg_absolute.f1, 6) << ',' << metrics::format_fixed(r.avg_absolute.recall, 6) << ','
           << metrics::format_fixed(r.avg_absolute.precision, 6) << '\n';
    }
}

} // namespace tapkit::experiments
