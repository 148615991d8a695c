#pragma once

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tapkit/data/annotations.hpp"
#include "tapkit/data/features.hpp"
#include "tapkit/random.hpp"

namespace tapkit::data {

/// Generator for sequences with known sub-action boundaries. Each action is a
/// fixed ordered list of prototypes; an instance holds every prototype of its
/// action for a random number of frames, with a linear cross-fade of
/// `transition_width` frames at each junction and Gaussian noise on top.
struct SynthConfig {
    std::size_t num_prototypes = 4;
    std::size_t feature_dim = 16;
    std::size_t num_actions = 4;
    std::size_t instances_per_action = 40;
    std::size_t action_len_min = 2; // segments per action
    std::size_t action_len_max = 6;
    std::size_t segment_min = 8; // frames per segment
    std::size_t segment_max = 16;
    std::size_t transition_width = 2;
    double noise = 0.1;
    double prototype_scale = 1.0;
    bool order_only = false; // all actions are permutations of one prototype set
    double train_fraction = 0.75;
    std::uint64_t seed = 0;

    void validate() const {
        auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
        if (num_prototypes < 2) fail("num_prototypes must be at least 2");
        if (feature_dim == 0) fail("feature_dim must be positive");
        if (num_actions == 0 || instances_per_action == 0) fail("num_actions and instances_per_action must be positive");
        if (action_len_min == 0 || action_len_min > action_len_max) fail("invalid action length range");
        if (segment_min == 0 || segment_min > segment_max) fail("invalid segment length range");
        if (segment_min < transition_width) {
            fail("segment_min " + std::to_string(segment_min) + " is shorter than transition_width " +
                 std::to_string(transition_width) + "; cross-fades would overlap");
        }
        if (noise < 0.0) fail("noise must be non-negative");
        if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) fail("train_fraction must lie in [0, 1]");
        if (order_only) {
            if (action_len_max > num_prototypes) fail("order_only needs action_len_max <= num_prototypes");
            double perms = 1.0;
            for (std::size_t i = 2; i <= action_len_max; ++i) perms *= static_cast<double>(i);
            if (perms < static_cast<double>(num_actions)) fail("order_only: not enough distinct orderings for num_actions");
        }
    }
};

inline nlohmann::json to_json(const SynthConfig& c) {
    return {{"num_prototypes", c.num_prototypes}, {"feature_dim", c.feature_dim},
            {"num_actions", c.num_actions},       {"instances_per_action", c.instances_per_action},
            {"action_len_min", c.action_len_min}, {"action_len_max", c.action_len_max},
            {"segment_min", c.segment_min},       {"segment_max", c.segment_max},
            {"transition_width", c.transition_width}, {"noise", c.noise},
            {"prototype_scale", c.prototype_scale}, {"order_only", c.order_only},
            {"train_fraction", c.train_fraction}, {"seed", c.seed}};
}

struct SynthDataset {
    std::vector<FeatureSequence> features;
    std::vector<AnnotationRecord> records;
    Matrix prototypes; // P x d_f
    std::vector<std::vector<std::size_t>> actions; // prototype order per action
};

/// Weight of the incoming prototype at `offset` frames past a junction. The
/// first frame with weight above 0.5 is the junction itself.
inline double crossfade_weight(long offset, std::size_t width) {
    if (width == 0) return offset >= 0 ? 1.0 : 0.0;
    const double w = (static_cast<double>(offset) + 0.5) / static_cast<double>(width) + 0.5;
    return std::clamp(w, 0.0, 1.0);
}

namespace detail {
inline std::vector<std::vector<std::size_t>> make_actions(const SynthConfig& cfg, Rng& rng) {
    std::vector<std::vector<std::size_t>> actions;
    if (cfg.order_only) {
        std::vector<std::size_t> base(cfg.num_prototypes);
        std::iota(base.begin(), base.end(), std::size_t{0});
        shuffle(base, rng);
        base.resize(cfg.action_len_max);
        std::set<std::vector<std::size_t>> used;
        while (actions.size() < cfg.num_actions) {
            std::vector<std::size_t> perm = base;
            shuffle(perm, rng);
            if (used.insert(perm).second) actions.push_back(perm);
        }
        return actions;
    }
    for (std::size_t a = 0; a < cfg.num_actions; ++a) {
        const std::size_t len = uniform_index(rng, cfg.action_len_min, cfg.action_len_max);
        std::vector<std::size_t> seq;
        for (std::size_t i = 0; i < len; ++i) {
            std::size_t p = uniform_index(rng, 0, cfg.num_prototypes - 1);
            while (!seq.empty() && p == seq.back()) p = uniform_index(rng, 0, cfg.num_prototypes - 1);
            seq.push_back(p);
        }
        actions.push_back(seq);
    }
    return actions;
}

inline std::string instance_id(std::size_t action, std::size_t k) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "a%02zu_%04zu", action, k);
    return buf;
}
} // namespace detail

inline SynthDataset generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    SynthDataset out;
    out.prototypes = round_to_storage(normal_matrix(cfg.num_prototypes, cfg.feature_dim, cfg.prototype_scale, rng));
    out.actions = detail::make_actions(cfg, rng);

    const auto train_count = static_cast<std::size_t>(cfg.train_fraction * static_cast<double>(cfg.instances_per_action));
    for (std::size_t a = 0; a < cfg.num_actions; ++a) {
        const auto& order = out.actions[a];
        for (std::size_t k = 0; k < cfg.instances_per_action; ++k) {
            std::vector<std::size_t> starts{0};
            std::size_t length = 0;
            for (std::size_t s = 0; s < order.size(); ++s) {
                length += uniform_index(rng, cfg.segment_min, cfg.segment_max);
                starts.push_back(length);
            }
            starts.pop_back(); // starts[s] = first frame of segment s

            Matrix frames(length, cfg.feature_dim);
            std::size_t seg = 0;
            for (std::size_t t = 0; t < length; ++t) {
                while (seg + 1 < starts.size() && starts[seg + 1] <= t) ++seg;
                auto proto = [&](std::size_t s) { return out.prototypes.row(order[s]); };
                std::size_t from = seg, to = seg;
                double weight = 1.0; // of `to`
                if (seg > 0) {
                    const double in = crossfade_weight(static_cast<long>(t) - static_cast<long>(starts[seg]), cfg.transition_width);
                    if (in < 1.0) {
                        from = seg - 1;
                        weight = in;
                    }
                }
                if (seg + 1 < starts.size()) {
                    const double next = crossfade_weight(static_cast<long>(t) - static_cast<long>(starts[seg + 1]),
                                                         cfg.transition_width);
                    if (next > 0.0) {
                        to = seg + 1;
                        weight = next;
                    }
                }
                for (std::size_t c = 0; c < cfg.feature_dim; ++c) {
                    const double clean = (1.0 - weight) * proto(from)[c] + weight * proto(to)[c];
                    frames(t, c) = clean + cfg.noise * normal01(rng);
                }
            }

            AnnotationRecord rec;
            rec.id = detail::instance_id(a, k);
            rec.video_id = rec.id;
            rec.label = "action" + std::to_string(a);
            rec.length = length;
            rec.boundaries.assign(starts.begin() + 1, starts.end());
            rec.split = k < train_count ? "train" : "test";
            out.features.push_back({rec.id, round_to_storage(std::move(frames))});
            out.records.push_back(std::move(rec));
        }
    }
    return out;
}

} // namespace tapkit::data
