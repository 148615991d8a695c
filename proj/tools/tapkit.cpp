#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "tapkit/data/predictions.hpp"
#include "tapkit/tapkit.hpp"

namespace fs = std::filesystem;
using namespace tapkit;

namespace {

constexpr const char* kVersion = "1.0.0";

// Exit codes: 0 success, 1 unexpected failure, 2 usage, 10+ library error kinds.
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 1;

struct ModelOptions {
    std::size_t units = 2;
    std::size_t num_patterns = 32;
    std::size_t pattern_dim = 64;
    std::size_t attn_dim = 32;
    std::size_t value_dim = 32;
    std::size_t hidden_dim = 128;
    bool layer_norm = false;

    model::Hyperparameters to_hp(std::size_t feature_dim, std::size_t num_classes) const {
        model::Hyperparameters hp;
        hp.feature_dim = feature_dim;
        hp.pattern_dim = pattern_dim;
        hp.num_patterns = num_patterns;
        hp.attn_dim = attn_dim;
        hp.value_dim = value_dim;
        hp.hidden_dim = hidden_dim;
        hp.num_classes = num_classes;
        hp.num_units = units;
        hp.layer_norm = layer_norm;
        return hp;
    }
};

struct LossOptions {
    losses::LossConfig cfg;
    bool no_local = false;
};

void add_model_options(CLI::App* cmd, ModelOptions& m) {
    cmd->add_option("--sps-units", m.units, "stacked SPS units")->capture_default_str();
    cmd->add_option("--num-patterns", m.num_patterns, "pattern miner rows (m)")->capture_default_str();
    cmd->add_option("--pattern-dim", m.pattern_dim, "pattern dimension")->capture_default_str();
    cmd->add_option("--attn-dim", m.attn_dim, "query/key dimension")->capture_default_str();
    cmd->add_option("--value-dim", m.value_dim, "value dimension")->capture_default_str();
    cmd->add_option("--hidden-dim", m.hidden_dim, "FFN hidden width")->capture_default_str();
    cmd->add_flag("--layer-norm", m.layer_norm, "normalize each unit's output");
}

void add_loss_options(CLI::App* cmd, LossOptions& l) {
    auto& c = l.cfg;
    cmd->add_option("--lambda", c.lambda, "local loss offset")->capture_default_str();
    cmd->add_option("--w-local", c.w_local, "local loss weight")->capture_default_str();
    cmd->add_option("--w-global", c.w_global, "global loss weight")->capture_default_str();
    cmd->add_option("--max-pairs", c.max_pairs, "subsample frame pairs per kind, 0 = all")->capture_default_str();
    cmd->add_option("--epochs", c.epochs)->capture_default_str();
    cmd->add_option("--batch-size", c.batch_size)->capture_default_str();
    cmd->add_option("--lr", c.learning_rate)->capture_default_str();
    cmd->add_option("--momentum", c.momentum)->capture_default_str();
    cmd->add_option("--clip-norm", c.clip_norm, "global gradient-norm clip, 0 disables")->capture_default_str();
}

fs::path annotations_of(const std::string& p) {
    const fs::path path(p);
    return fs::is_directory(path) ? data::annotations_path(path) : path;
}


void write_text(const std::string& path, const std::string& text) {
    auto out = io::open_out(path);
    out << text;
    if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
    data::SynthConfig cfg;
    std::string out;
};

void run_synth(const SynthArgs& a) {
    const auto ds = data::generate_synthetic(a.cfg);
    data::write_dataset(a.out, ds, &a.cfg);
    std::cout << "wrote " << ds.records.size() << " instances to " << a.out << '\n';
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
    std::optional<std::string> data;
    std::string model_out;
    std::string log;
    std::string split = "train";
    ModelOptions model;
    LossOptions loss;
    std::uint64_t seed = 0;
};

void run_train(TrainArgs a) {
    const auto ds = data::Dataset::open(data::resolve_data_root(a.data));
    const auto instances = ds.load_split(a.split);
    if (instances.empty()) throw Error(ErrorKind::input, "split '" + a.split + "' has no instances");
    const auto vocab = ds.labels();
    auto cfg = a.loss.cfg;
    cfg.seed = a.seed;
    if (a.loss.no_local) cfg.w_local = 0.0;
    const auto hp = a.model.to_hp(instances.front().features.frames.cols(), vocab.size());
    const auto examples = experiments::to_training_examples(instances, vocab);

    const std::string log_path = a.log.empty() ? a.model_out + ".log.jsonl" : a.log;
    auto log = io::open_out(log_path);
    auto result = losses::train(examples, model::TransParserModel::initialize(hp, a.seed), cfg,
                                [&](const losses::EpochRecord& r) { log << losses::to_json(r).dump() << '\n' << std::flush; });
    model::save_checkpoint({std::move(result.model), vocab}, a.model_out);
    const auto& last = result.history.back();
    std::cout << "epochs " << last.epoch << " local " << last.local_loss << " global " << last.global_loss << " total "
              << last.total << '\n';
}

// ---- parse ---------------------------------------------------------------

struct ParseArgs {
    std::optional<std::string> data;
    std::string model;
    std::string out;
    std::string split = "test";
    std::optional<std::size_t> smooth_window;
    std::uint64_t seed = 0; // parsing is deterministic; accepted for uniformity
};

void run_parse(const ParseArgs& a) {
    const auto ds = data::Dataset::open(data::resolve_data_root(a.data));
    const auto ckpt = model::load_checkpoint(a.model);
    const auto preds = experiments::parse_instances(ckpt.model, ds.load_split(a.split), a.smooth_window);
    data::save_predictions(preds, a.out);
    std::cout << "wrote " << preds.size() << " predictions to " << a.out << '\n';
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string mode = "one-to-one";
    bool macro = false;
    std::string out;
    std::vector<double> at_abs;
    std::vector<double> at_rel;
    std::uint64_t seed = 0;
};

void print_scores(const std::string& label, const metrics::Scores& s) {
    std::cout << label << " recall " << metrics::format_fixed(s.recall, 4) << " precision "
              << metrics::format_fixed(s.precision, 4) << " F1 " << metrics::format_fixed(s.f1, 4) << '\n';
}

void run_eval(const EvalArgs& a) {
    const auto preds = data::load_predictions(a.pred);
    const auto gt = data::load_annotations(annotations_of(a.gt).string());
    const auto inst = experiments::pair_with_ground_truth(preds, gt);
    const metrics::SweepOptions opt{metrics::parse_match_mode(a.mode), a.macro};
    const auto report = metrics::sweep(inst, opt);
    if (!a.out.empty()) {
        auto out = io::open_out(a.out);
        metrics::write_csv(out, report);
    }
    print_scores("relative avg", report.avg_relative);
    print_scores("absolute avg", report.avg_absolute);
    for (double d : a.at_abs) {
        const auto s = metrics::score_at(inst, metrics::ThresholdKind::absolute, d, opt);
        print_scores("abs d=" + metrics::format_fixed(d, d == std::floor(d) ? 0 : 2), s);
    }
    for (double d : a.at_rel) {
        const auto s = metrics::score_at(inst, metrics::ThresholdKind::relative, d, opt);
        print_scores("rel d=" + metrics::format_fixed(d, 2), s);
    }
}

// ---- baselines -----------------------------------------------------------

struct KMeansArgs {
    std::optional<std::string> data;
    std::string out;
    std::string split = "test";
    std::size_t k = 64;
    std::uint64_t seed = 0;
};

void run_kmeans(const KMeansArgs& a) {
    const auto ds = data::Dataset::open(data::resolve_data_root(a.data));
    std::vector<ParseResult> preds;
    for (const auto& inst : ds.load_split(a.split)) {
        // sequences shorter than k are clustered with one cluster per frame
        const std::size_t k = std::min(a.k, inst.features.frames.rows());
        if (k < a.k) warn("'" + inst.record.id + "' has fewer frames than k; using k=" + std::to_string(k));
        preds.push_back(baselines::kmeans_parse(inst.features, k, a.seed));
    }
    data::save_predictions(preds, a.out);
    std::cout << "wrote " << preds.size() << " predictions to " << a.out << '\n';
}

struct TCNArgs {
    std::optional<std::string> data;
    std::string out;
    std::string split = "test";
    std::string train_split = "train";
    baselines::TCNTrainConfig cfg;
    double pos_weight = 0.0;
    std::uint64_t seed = 0;
};

void run_tcn(TCNArgs a) {
    const auto ds = data::Dataset::open(data::resolve_data_root(a.data));
    std::vector<baselines::TCNExample> train;
    for (const auto& inst : ds.load_split(a.train_split)) train.push_back({inst.features.frames, inst.record.boundaries});
    a.cfg.seed = a.seed;
    if (a.pos_weight > 0.0) a.cfg.pos_weight = a.pos_weight;
    const auto trained = baselines::tcn_train(train, a.cfg);
    std::vector<ParseResult> preds;
    for (const auto& inst : ds.load_split(a.split))
        preds.push_back(baselines::tcn_parse(inst.features, trained.model, a.cfg.threshold, a.cfg.nms_radius));
    data::save_predictions(preds, a.out);
    std::cout << "pos_weight " << trained.pos_weight << " final loss " << trained.history.back() << "; wrote "
              << preds.size() << " predictions to " << a.out << '\n';
}

// ---- stats ---------------------------------------------------------------

struct StatsArgs {
    std::optional<std::string> data;
    std::string out;
    std::uint64_t seed = 0;
};

void run_stats(const StatsArgs& a) {
    const auto root = data::resolve_data_root(a.data);
    const auto records = data::load_annotations(annotations_of(root.string()).string());
    const auto stats = data::compute_dataset_stats(records);
    auto j = data::to_json(stats);
    j["tapos_shape"] = data::matches_tapos_shape(stats);
    const std::string text = j.dump(2) + "\n";
    if (a.out.empty()) std::cout << text;
    else write_text(a.out, text);
}

// ---- ablate --------------------------------------------------------------

struct AblateArgs {
    std::optional<std::string> data;
    std::string out;
    std::string train_split = "train";
    std::string split = "test";
    ModelOptions model;
    LossOptions loss;
    std::optional<std::size_t> smooth_window;
    std::uint64_t seed = 0;
};

void run_ablate(const AblateArgs& a) {
    const auto ds = data::Dataset::open(data::resolve_data_root(a.data));
    const auto train = ds.load_split(a.train_split);
    const auto test = ds.load_split(a.split);
    if (train.empty() || test.empty()) throw Error(ErrorKind::input, "ablation needs non-empty train and test splits");
    experiments::AblationBase base;
    base.hp = a.model.to_hp(train.front().features.frames.cols(), ds.labels().size());
    base.loss = a.loss.cfg;
    base.loss.seed = a.seed;
    base.model_seed = a.seed;
    base.smoothing_window = a.smooth_window;
    const auto rows = experiments::run_ablation(train, test, ds.labels(), experiments::default_ablation_grid(), base);
    std::ostringstream csv;
    experiments::write_ablation_csv(csv, rows);
    write_text(a.out, csv.str());
    std::cout << csv.str();
}

// ---- compare-sampling ----------------------------------------------------

struct SamplingArgs {
    std::optional<std::string> data;
    std::optional<std::string> pred;
    std::size_t segments = 3;
    std::string out;
    experiments::ProbeConfig probe;
    std::uint64_t seed = 0;
};

void run_compare_sampling(const SamplingArgs& a) {
    const auto ds = data::Dataset::open(data::resolve_data_root(a.data));
    std::vector<experiments::SamplingInstance> inst;
    for (const auto& r : ds.records()) {
        if (r.split == "val") continue;
        auto loaded = ds.load(r);
        inst.push_back({r.id, std::move(loaded.features.frames), r.boundaries, data::class_index(ds.labels(), r.label),
                        r.split == "train"});
    }
    std::vector<experiments::SamplingScheme> schemes{experiments::SamplingScheme::uniform,
                                                     experiments::SamplingScheme::aligned};
    std::map<std::string, std::vector<std::size_t>> predicted;
    if (a.pred) {
        for (auto& p : data::load_predictions(*a.pred)) predicted[p.id] = std::move(p.starts);
        schemes.push_back(experiments::SamplingScheme::predicted);
    }
    std::ostringstream csv;
    csv << "scheme,segments,top1_acc,avg_acc\n";
    for (auto s : schemes) {
        const auto rep = experiments::sampling_classifier(inst, s, a.segments, a.seed, a.pred ? &predicted : nullptr, a.probe);
        csv << experiments::to_string(s) << ',' << a.segments << ',' << metrics::format_fixed(rep.top1, 6) << ','
            << metrics::format_fixed(rep.avg_acc, 6) << '\n';
    }
    if (!a.out.empty()) write_text(a.out, csv.str());
    std::cout << csv.str();
}

// ---- patterns ------------------------------------------------------------

struct PatternArgs {
    std::optional<std::string> data;
    std::string model;
    std::string split = "all";
    std::size_t pattern = 0;
    std::size_t top = 10;
    std::uint64_t seed = 0;
};

void run_patterns(const PatternArgs& a) {
    const auto ds = data::Dataset::open(data::resolve_data_root(a.data));
    const auto ckpt = model::load_checkpoint(a.model);
    std::vector<model::TracedInstance> pool;
    for (const auto& inst : ds.load_split(a.split))
        pool.push_back({inst.record.id, model::forward(inst.features.frames, ckpt.model)});
    const auto top = model::retrieve_top_frames(pool, a.pattern, a.top);
    std::cout << "id,frame,score\n";
    for (const auto& r : top)
        std::cout << r.id << ',' << r.frame << ',' << metrics::format_fixed(r.score, 6) << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal action parsing toolkit"};
    app.set_config("--config", "", "TOML/INI file; [command] sections supply defaults for flags");
    app.set_version_flag("--version", std::string("tapkit ") + kVersion + " (features FSEQ v1, checkpoint TPSR v" +
                                          std::to_string(model::kCheckpointFormatVersion) +
                                          ", annotations jsonl v1, predictions jsonl v1)");
    app.require_subcommand(1);
    app.fallthrough();

    auto add_seed = [](CLI::App* cmd, std::uint64_t& seed) {
        cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    };
    auto add_data = [](CLI::App* cmd, std::optional<std::string>& data) {
        cmd->add_option("--data", data, "dataset directory (default $TAPKIT_DATA_DIR)");
    };
    std::function<void()> action;

    SynthArgs synth;
    auto* cs = app.add_subcommand("synth", "generate a synthetic dataset");
    {
        auto& c = synth.cfg;
        cs->add_option("--out", synth.out, "output directory")->required();
        cs->add_option("--num-prototypes", c.num_prototypes)->capture_default_str();
        cs->add_option("--feature-dim", c.feature_dim)->capture_default_str();
        cs->add_option("--num-actions", c.num_actions)->capture_default_str();
        cs->add_option("--instances-per-action", c.instances_per_action)->capture_default_str();
        cs->add_option("--action-len-min", c.action_len_min)->capture_default_str();
        cs->add_option("--action-len-max", c.action_len_max)->capture_default_str();
        cs->add_option("--segment-min", c.segment_min)->capture_default_str();
        cs->add_option("--segment-max", c.segment_max)->capture_default_str();
        cs->add_option("--transition-width", c.transition_width)->capture_default_str();
        cs->add_option("--noise", c.noise)->capture_default_str();
        cs->add_option("--prototype-scale", c.prototype_scale)->capture_default_str();
        cs->add_flag("--order-only", c.order_only, "actions differ only in prototype order");
        cs->add_option("--train-fraction", c.train_fraction)->capture_default_str();
        add_seed(cs, c.seed);
        cs->callback([&] { action = [&] { run_synth(synth); }; });
    }

    TrainArgs train;
    auto* ct = app.add_subcommand("train", "train a parser and write a checkpoint");
    add_data(ct, train.data);
    ct->add_option("--model-out", train.model_out, "checkpoint path")->required();
    ct->add_option("--log", train.log, "epoch log (default <model-out>.log.jsonl)");
    ct->add_option("--split", train.split)->capture_default_str();
    ct->add_flag("--no-local-loss", train.loss.no_local);
    add_model_options(ct, train.model);
    add_loss_options(ct, train.loss);
    add_seed(ct, train.seed);
    ct->callback([&] { action = [&] { run_train(train); }; });

    ParseArgs parse;
    auto* cp = app.add_subcommand("parse", "predict sub-action starts with a trained parser");
    add_data(cp, parse.data);
    cp->add_option("--model", parse.model)->required();
    cp->add_option("--out", parse.out, "predictions JSONL")->required();
    cp->add_option("--split", parse.split, "train, val, test or all")->capture_default_str();
    cp->add_option("--smooth-window", parse.smooth_window, "odd majority-filter window");
    add_seed(cp, parse.seed);
    cp->callback([&] { action = [&] { run_parse(parse); }; });

    EvalArgs eval;
    auto* ce = app.add_subcommand("eval", "score predictions against ground truth");
    ce->add_option("--pred", eval.pred)->required();
    ce->add_option("--gt", eval.gt, "dataset directory or annotations file")->required();
    ce->add_option("--mode", eval.mode)->check(CLI::IsMember({"one-to-one", "independent"}))->capture_default_str();
    ce->add_flag("--macro", eval.macro, "average per-instance scores");
    ce->add_option("--out", eval.out, "CSV report");
    ce->add_option("--at-abs", eval.at_abs, "also report at these absolute tolerances");
    ce->add_option("--at-rel", eval.at_rel, "also report at these relative tolerances");
    add_seed(ce, eval.seed);
    ce->callback([&] { action = [&] { run_eval(eval); }; });

    auto* cb = app.add_subcommand("baseline", "run a baseline parser");
    cb->require_subcommand(1);
    cb->fallthrough();
    KMeansArgs km;
    auto* ck = cb->add_subcommand("kmeans", "cluster frames, boundaries at label changes");
    add_data(ck, km.data);
    ck->add_option("--k", km.k)->capture_default_str();
    ck->add_option("--out", km.out)->required();
    ck->add_option("--split", km.split)->capture_default_str();
    add_seed(ck, km.seed);
    ck->callback([&] { action = [&] { run_kmeans(km); }; });

    TCNArgs tcn;
    auto* cc = cb->add_subcommand("tcn", "train a boundary detector and peak-pick its scores");
    add_data(cc, tcn.data);
    cc->add_option("--out", tcn.out)->required();
    cc->add_option("--split", tcn.split)->capture_default_str();
    cc->add_option("--train-split", tcn.train_split)->capture_default_str();
    cc->add_option("--radius", tcn.cfg.radius, "frames around a boundary labeled positive")->capture_default_str();
    cc->add_option("--pos-weight", tcn.pos_weight, "positive class weight (default negatives/positives)");
    cc->add_option("--threshold", tcn.cfg.threshold)->capture_default_str();
    cc->add_option("--nms-radius", tcn.cfg.nms_radius)->capture_default_str();
    cc->add_option("--width", tcn.cfg.width)->capture_default_str();
    cc->add_option("--hidden", tcn.cfg.hidden)->capture_default_str();
    cc->add_option("--epochs", tcn.cfg.epochs)->capture_default_str();
    cc->add_option("--batch-size", tcn.cfg.batch_size)->capture_default_str();
    cc->add_option("--lr", tcn.cfg.learning_rate)->capture_default_str();
    cc->add_option("--momentum", tcn.cfg.momentum)->capture_default_str();
    add_seed(cc, tcn.seed);
    cc->callback([&] { action = [&] { run_tcn(tcn); }; });

    StatsArgs stats;
    auto* cst = app.add_subcommand("stats", "dataset statistics as JSON");
    add_data(cst, stats.data);
    cst->add_option("--out", stats.out, "write JSON here instead of stdout");
    add_seed(cst, stats.seed);
    cst->callback([&] { action = [&] { run_stats(stats); }; });

    AblateArgs ablate;
    auto* ca = app.add_subcommand("ablate", "units x local-loss study");
    add_data(ca, ablate.data);
    ca->add_option("--out", ablate.out, "CSV")->required();
    ca->add_option("--split", ablate.split, "evaluation split")->capture_default_str();
    ca->add_option("--train-split", ablate.train_split)->capture_default_str();
    ca->add_option("--smooth-window", ablate.smooth_window);
    add_model_options(ca, ablate.model);
    add_loss_options(ca, ablate.loss);
    add_seed(ca, ablate.seed);
    ca->callback([&] { action = [&] { run_ablate(ablate); }; });

    SamplingArgs sampling;
    auto* cm = app.add_subcommand("compare-sampling", "classification accuracy under segment sampling schemes");
    add_data(cm, sampling.data);
    cm->add_option("--pred", sampling.pred, "parser predictions for the predicted scheme");
    cm->add_option("--segments", sampling.segments)->capture_default_str();
    cm->add_option("--out", sampling.out, "CSV");
    cm->add_option("--probe-epochs", sampling.probe.epochs)->capture_default_str();
    cm->add_option("--probe-lr", sampling.probe.learning_rate)->capture_default_str();
    add_seed(cm, sampling.seed);
    cm->callback([&] { action = [&] { run_compare_sampling(sampling); }; });

    PatternArgs patterns;
    auto* cq = app.add_subcommand("patterns", "frames responding most strongly to one pattern");
    add_data(cq, patterns.data);
    cq->add_option("--model", patterns.model)->required();
    cq->add_option("--pattern", patterns.pattern)->required();
    cq->add_option("--top", patterns.top)->capture_default_str();
    cq->add_option("--split", patterns.split)->capture_default_str();
    add_seed(cq, patterns.seed);
    cq->callback([&] { action = [&] { run_patterns(patterns); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        action();
        return 0;
    } catch (const Error& e) {
        std::cerr << "tapkit: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "tapkit: internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}
