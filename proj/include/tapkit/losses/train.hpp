#pragma once

#include <cmath>
#include <functional>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "tapkit/losses/losses.hpp"
#include "tapkit/model/transparser.hpp"

namespace tapkit::losses {

struct TrainingExample {
    Matrix features;
    Segmentation segmentation;
    std::size_t label = 0;
};

struct InstanceLoss {
    double local = 0.0;
    double global = 0.0;
    double total = 0.0;
};

/// Loss of one instance; optionally fills gradients in
/// TransParserModel::parameters() order. The local term is skipped entirely
/// when its weight is zero, likewise the global term.
inline InstanceLoss evaluate_instance(const model::TransParserModel& net, const TrainingExample& ex,
                                      const LossConfig& cfg, std::vector<Matrix>* grads = nullptr) {
    model::check_input(ex.features, net.hyperparameters());
    ad::Tape tape;
    model::BoundModel bound = model::bind(tape, net, grads != nullptr);
    model::TapeForward fwd = model::forward(tape.constant(ex.features), bound);

    InstanceLoss out;
    ad::Var total;
    bool have_total = false;
    auto accumulate = [&](ad::Var term, double weight) {
        ad::Var scaled = ad::scale(term, weight);
        total = have_total ? ad::add(total, scaled) : scaled;
        have_total = true;
    };
    if (cfg.w_local > 0.0) {
        ad::Var local = local_loss(fwd.last().response, ex.segmentation, cfg);
        out.local = local.value()(0, 0);
        accumulate(local, cfg.w_local);
    }
    if (cfg.w_global > 0.0) {
        ad::Var global = global_loss(fwd.last().features, bound.classifier, ex.label);
        out.global = global.value()(0, 0);
        accumulate(global, cfg.w_global);
    }
    out.total = total.value()(0, 0);
    if (grads) {
        tape.backward(total);
        grads->clear();
        for (const ad::Var& p : bound.params) grads->push_back(p.grad());
    }
    return out;
}

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double local_loss = 0.0;
    double global_loss = 0.0;
    double total = 0.0;
};

inline nlohmann::json to_json(const EpochRecord& r) {
    return {{"epoch", r.epoch}, {"local_loss", r.local_loss}, {"global_loss", r.global_loss}, {"total", r.total}};
}

/// One JSON object per line.
inline void write_epoch_log(std::ostream& os, const std::vector<EpochRecord>& history) {
    for (const auto& r : history) os << to_json(r).dump() << '\n';
}

struct TrainResult {
    model::TransParserModel model;
    std::vector<EpochRecord> history;
};

/// Mini-batch SGD with momentum on w_local * L_local + w_global * L_global.
/// Instance order is reshuffled every epoch from cfg.seed; batch gradients are
/// averaged in a fixed order, so a run is reproducible bit for bit.
inline TrainResult train(const std::vector<TrainingExample>& data, model::TransParserModel net, const LossConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    cfg.validate();
    if (data.empty()) throw Error(ErrorKind::input, "training set is empty");
    for (const auto& ex : data) model::check_input(ex.features, net.hyperparameters());

    TrainResult result;
    std::vector<Matrix*> params = net.parameter_pointers();
    std::vector<Matrix> velocity;
    for (const Matrix* p : params) velocity.emplace_back(p->rows(), p->cols());

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<Matrix> batch_grad;
    std::vector<Matrix> grads;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle(order, rng);
        EpochRecord record{epoch, 0.0, 0.0, 0.0};
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            batch_grad.clear();
            for (const Matrix* p : params) batch_grad.emplace_back(p->rows(), p->cols());
            for (std::size_t k = begin; k < end; ++k) {
                const TrainingExample& ex = data[order[k]];
                const InstanceLoss loss = evaluate_instance(net, ex, cfg, &grads);
                bool finite = std::isfinite(loss.total);
                for (const Matrix& g : grads) finite = finite && g.all_finite();
                if (!finite) {
                    throw Error(ErrorKind::numeric, "non-finite loss or gradient at epoch " + std::to_string(epoch) +
                                                        ", instance '" + ex.segmentation.id + "'");
                }
                record.local_loss += loss.local;
                record.global_loss += loss.global;
                record.total += loss.total;
                for (std::size_t p = 0; p < grads.size(); ++p) batch_grad[p] += grads[p];
            }
            const double inv = 1.0 / static_cast<double>(end - begin);
            double norm2 = 0.0;
            for (Matrix& g : batch_grad) {
                g *= inv;
                for (double v : g.data()) norm2 += v * v;
            }
            const double clip = (cfg.clip_norm > 0.0 && norm2 > cfg.clip_norm * cfg.clip_norm)
                                    ? cfg.clip_norm / std::sqrt(norm2)
                                    : 1.0;
            for (std::size_t p = 0; p < params.size(); ++p) {
                Matrix& v = velocity[p];
                Matrix& theta = *params[p];
                for (std::size_t i = 0; i < v.size(); ++i) {
                    v[i] = cfg.momentum * v[i] + clip * batch_grad[p][i];
                    theta[i] -= cfg.learning_rate * v[i];
                }
            }
        }
        const double n = static_cast<double>(data.size());
        record.local_loss /= n;
        record.global_loss /= n;
        record.total /= n;
        result.history.push_back(record);
        if (on_epoch) on_epoch(record);
    }
    result.model = std::move(net);
    return result;
}

} // namespace tapkit::losses
