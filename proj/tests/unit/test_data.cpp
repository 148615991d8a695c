#include "helpers.hpp"

#include <filesystem>
#include <sstream>

#include "tapkit/data/predictions.hpp"

using namespace tapkit;
using namespace tapkit::data;
using tapkit::testing::random_matrix;
using tapkit::testing::throws_kind;
using tapkit::testing::WarningLog;

namespace {

using Frames = std::vector<std::size_t>;

std::vector<AnnotationRecord> parse(const std::string& text) {
    std::istringstream is(text);
    return read_annotations(is);
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("tapkit_test_data_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

SynthConfig noiseless(std::size_t prototypes) {
    SynthConfig cfg;
    cfg.num_prototypes = prototypes;
    cfg.feature_dim = 8;
    cfg.num_actions = 3;
    cfg.instances_per_action = 10;
    cfg.noise = 0.0;
    cfg.transition_width = 0;
    cfg.seed = 21;
    return cfg;
}

} // namespace

TEST(Features, RoundTripIsBitwiseAtStoragePrecision) {
    Rng rng(1);
    const Matrix m = round_to_storage(random_matrix(3, 4, rng));
    std::stringstream ss;
    write_features(ss, m);
    EXPECT_EQ(ss.str().size(), 4u + 3 * 4u + 3 * 4 * 4u);
    EXPECT_EQ(ss.str().substr(0, 4), "FSEQ");
    const Matrix back = read_features(ss);
    EXPECT_TRUE(back == m);
}

TEST(Features, RoundTripThroughFile) {
    const auto dir = scratch_dir("features");
    Rng rng(2);
    const Matrix m = round_to_storage(random_matrix(7, 5, rng, 100.0));
    save_features(m, (dir / "x.fseq").string());
    EXPECT_TRUE(load_features((dir / "x.fseq").string()) == m);
    EXPECT_TRUE(throws_kind([&] { load_features((dir / "missing.fseq").string()); }, ErrorKind::io));
}

TEST(Features, StorageRoundsToFloat) {
    Matrix m(1, 1, 0.1);
    std::stringstream ss;
    write_features(ss, m);
    EXPECT_EQ(read_features(ss)(0, 0), static_cast<double>(0.1f));
}

TEST(Features, TruncationIsFormatError) {
    Rng rng(3);
    std::stringstream ss;
    write_features(ss, random_matrix(3, 4, rng));
    const std::string full = ss.str();
    for (std::size_t cut : {0u, 3u, 6u, 12u, 20u, static_cast<unsigned>(full.size() - 1)}) {
        std::istringstream is(full.substr(0, cut));
        EXPECT_TRUE(throws_kind([&] { read_features(is); }, ErrorKind::format)) << cut;
    }
    std::istringstream bad_magic("FSEX" + full.substr(4));
    EXPECT_TRUE(throws_kind([&] { read_features(bad_magic); }, ErrorKind::format));
}

TEST(Features, ZeroFramesRejectedOnSave) {
    std::stringstream ss;
    EXPECT_TRUE(throws_kind([&] { write_features(ss, Matrix(0, 4)); }, ErrorKind::input));
}

TEST(Annotations, EmptyInputGivesEmptyList) {
    EXPECT_TRUE(parse("").empty());
    EXPECT_TRUE(parse("\n  \n").empty());
}

TEST(Annotations, UnsortedBoundariesAreSortedWithWarning) {
    WarningLog log;
    const auto r = parse(R"({"id":"a","label":"jump","length":50,"boundaries":[30,10]})");
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].boundaries, (Frames{10, 30}));
    EXPECT_EQ(r[0].split, "train");
    EXPECT_EQ(r[0].video_id, "a");
    EXPECT_EQ(log.messages.size(), 1u);
}

TEST(Annotations, RoundTripOfRandomRecords) {
    Rng rng(4);
    std::vector<AnnotationRecord> records;
    const char* splits[] = {"train", "val", "test"};
    for (std::size_t i = 0; i < 100; ++i) {
        AnnotationRecord r;
        r.id = "inst" + std::to_string(i);
        r.video_id = "vid" + std::to_string(i / 3);
        r.label = "class" + std::to_string(uniform_index(rng, 0, 5));
        r.length = uniform_index(rng, 2, 400);
        for (std::size_t t = 1; t < r.length; ++t)
            if (uniform01(rng) < 0.05) r.boundaries.push_back(t);
        r.split = splits[(i / 3) % 3];
        records.push_back(r);
    }
    std::stringstream ss;
    write_annotations(ss, records);
    EXPECT_EQ(read_annotations(ss), records);
}

TEST(Annotations, ParseErrorNamesLine) {
    try {
        parse("{\"id\":\"a\",\"label\":\"x\",\"length\":5,\"boundaries\":[]}\n{not json\n");
        FAIL() << "expected a parse error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse);
        EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
    }
    EXPECT_TRUE(throws_kind([] { parse(R"({"id":"a","length":5,"boundaries":[]})"); }, ErrorKind::parse));
}

TEST(Annotations, ValidationErrors) {
    auto bad = [](const std::string& text) { return throws_kind([&] { parse(text); }, ErrorKind::validation); };
    EXPECT_TRUE(bad(R"({"id":"a","label":"x","length":5,"boundaries":[0]})"));
    EXPECT_TRUE(bad(R"({"id":"a","label":"x","length":5,"boundaries":[5]})"));
    EXPECT_TRUE(bad(R"({"id":"a","label":"x","length":0,"boundaries":[]})"));
    EXPECT_TRUE(bad(R"({"id":"a","label":"x","length":5,"boundaries":[2,2]})"));
    EXPECT_TRUE(bad(R"({"id":"a","label":"x","length":5,"boundaries":[],"split":"dev"})"));
    EXPECT_TRUE(bad("{\"id\":\"a\",\"label\":\"x\",\"length\":5,\"boundaries\":[]}\n"
                    "{\"id\":\"a\",\"label\":\"x\",\"length\":5,\"boundaries\":[]}"));
    // one video may not straddle splits
    EXPECT_TRUE(bad("{\"id\":\"a\",\"video_id\":\"v\",\"label\":\"x\",\"length\":5,\"boundaries\":[],\"split\":\"train\"}\n"
                    "{\"id\":\"b\",\"video_id\":\"v\",\"label\":\"x\",\"length\":5,\"boundaries\":[],\"split\":\"test\"}"));
}

TEST(Annotations, LabelVocabulary) {
    const auto r = parse("{\"id\":\"a\",\"label\":\"vault\",\"length\":5,\"boundaries\":[]}\n"
                         "{\"id\":\"b\",\"label\":\"beam\",\"length\":5,\"boundaries\":[]}\n"
                         "{\"id\":\"c\",\"label\":\"vault\",\"length\":5,\"boundaries\":[]}");
    const auto vocab = label_vocabulary(r);
    EXPECT_EQ(vocab, (std::vector<std::string>{"beam", "vault"}));
    EXPECT_EQ(class_index(vocab, "vault"), 1u);
    EXPECT_TRUE(throws_kind([&] { class_index(vocab, "rings"); }, ErrorKind::validation));
}

TEST(Synthetic, NoiselessTwoSegments) {
    SynthConfig cfg;
    cfg.num_prototypes = 2;
    cfg.feature_dim = 3;
    cfg.num_actions = 1;
    cfg.instances_per_action = 1;
    cfg.action_len_min = cfg.action_len_max = 2;
    cfg.segment_min = cfg.segment_max = 3;
    cfg.transition_width = 0;
    cfg.noise = 0.0;
    const auto ds = generate_synthetic(cfg);
    ASSERT_EQ(ds.records.size(), 1u);
    EXPECT_EQ(ds.records[0].boundaries, (Frames{3}));
    EXPECT_EQ(ds.records[0].length, 6u);
    const auto& order = ds.actions[0];
    ASSERT_EQ(order.size(), 2u);
    EXPECT_NE(order[0], order[1]);
    const Matrix& f = ds.features[0].frames;
    for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(f(t, c), ds.prototypes(order[t < 3 ? 0 : 1], c));
}

TEST(Synthetic, SameSeedIsBitIdentical) {
    SynthConfig cfg;
    cfg.instances_per_action = 5;
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    EXPECT_EQ(a.records, b.records);
    ASSERT_EQ(a.features.size(), b.features.size());
    for (std::size_t i = 0; i < a.features.size(); ++i) EXPECT_TRUE(a.features[i].frames == b.features[i].frames);
    cfg.seed = 1;
    EXPECT_NE(generate_synthetic(cfg).records, a.records);
}

TEST(Synthetic, CrossfadeJunctionIsFirstMajorityFrame) {
    for (std::size_t w : {0u, 1u, 2u, 3u, 4u}) {
        EXPECT_LE(crossfade_weight(-1, w), 0.5) << w;
        EXPECT_GT(crossfade_weight(0, w), 0.5) << w;
        for (long k = -6; k < 6; ++k) EXPECT_LE(crossfade_weight(k, w), crossfade_weight(k + 1, w));
    }
    EXPECT_EQ(crossfade_weight(-1, 0), 0.0);
    EXPECT_EQ(crossfade_weight(0, 0), 1.0);
}

TEST(Synthetic, RecordsAreValidAndSplit) {
    SynthConfig cfg;
    const auto ds = generate_synthetic(cfg);
    EXPECT_EQ(ds.records.size(), cfg.num_actions * cfg.instances_per_action);
    std::size_t train = 0;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& r = ds.records[i];
        EXPECT_EQ(r.length, ds.features[i].frames.rows());
        EXPECT_EQ(r.id, ds.features[i].id);
        EXPECT_GE(r.boundaries.size() + 1, cfg.action_len_min);
        EXPECT_LE(r.boundaries.size() + 1, cfg.action_len_max);
        train += r.split == "train";
    }
    EXPECT_EQ(train, 30u * cfg.num_actions);
    // the writer's output passes the reader's validation
    std::stringstream ss;
    write_annotations(ss, ds.records);
    EXPECT_EQ(read_annotations(ss), ds.records);
}

TEST(Synthetic, OrderOnlyActionsPermuteOneSet) {
    SynthConfig cfg;
    cfg.order_only = true;
    cfg.num_prototypes = 4;
    cfg.action_len_min = cfg.action_len_max = 4;
    cfg.num_actions = 12;
    const auto ds = generate_synthetic(cfg);
    std::set<std::vector<std::size_t>> distinct;
    for (auto order : ds.actions) {
        distinct.insert(order);
        std::sort(order.begin(), order.end());
        EXPECT_EQ(order, (Frames{0, 1, 2, 3}));
    }
    EXPECT_EQ(distinct.size(), 12u);
    cfg.num_actions = 25;
    EXPECT_TRUE(throws_kind([&] { generate_synthetic(cfg); }, ErrorKind::config));
}

TEST(Synthetic, ConfigErrors) {
    SynthConfig cfg;
    cfg.segment_min = 1;
    cfg.transition_width = 2;
    EXPECT_TRUE(throws_kind([&] { cfg.validate(); }, ErrorKind::config));
    cfg = {};
    cfg.num_prototypes = 1;
    EXPECT_TRUE(throws_kind([&] { cfg.validate(); }, ErrorKind::config));
    cfg = {};
    cfg.noise = -0.1;
    EXPECT_TRUE(throws_kind([&] { cfg.validate(); }, ErrorKind::config));
}

TEST(Synthetic, NoiselessKMeansRecoversEveryBoundary) {
    for (std::size_t p : {3u, 4u, 6u}) {
        const auto ds = generate_synthetic(noiseless(p));
        std::vector<metrics::EvalInstance> data;
        for (std::size_t i = 0; i < ds.records.size(); ++i) {
            const auto r = baselines::kmeans_parse(ds.features[i], p, 0);
            // any boundary missed or added would break exact equality
            EXPECT_EQ(r.starts, ds.records[i].boundaries) << ds.records[i].id;
            data.push_back({r.starts, ds.records[i].boundaries, ds.records[i].length});
        }
        for (double d : {1.0, 2.0, 5.0, 50.0})
            EXPECT_EQ(metrics::score_at(data, metrics::ThresholdKind::absolute, d, {}).f1, 1.0);
    }
}

TEST(Dataset, WriteOpenAndLoad) {
    const auto dir = scratch_dir("dataset");
    SynthConfig cfg;
    cfg.instances_per_action = 4;
    const auto ds = generate_synthetic(cfg);
    write_dataset(dir, ds, &cfg);
    const auto opened = Dataset::open(dir);
    EXPECT_EQ(opened.records(), ds.records);
    EXPECT_EQ(opened.labels().size(), cfg.num_actions);
    EXPECT_EQ(opened.split("train").size(), 3u * cfg.num_actions);
    EXPECT_EQ(opened.split("all").size(), ds.records.size());
    const auto test = opened.load_split("test");
    ASSERT_EQ(test.size(), cfg.num_actions);
    for (const auto& inst : test) {
        const auto it = std::find_if(ds.features.begin(), ds.features.end(),
                                     [&](const FeatureSequence& f) { return f.id == inst.record.id; });
        ASSERT_NE(it, ds.features.end());
        EXPECT_TRUE(it->frames == inst.features.frames);
    }
    EXPECT_TRUE(std::filesystem::exists(dir / "synth_config.json"));
    EXPECT_TRUE(throws_kind([&] { Dataset::open(dir / "nope"); }, ErrorKind::io));
}

TEST(Dataset, LengthMismatchIsValidationError) {
    const auto dir = scratch_dir("mismatch");
    SynthConfig cfg;
    cfg.instances_per_action = 1;
    cfg.num_actions = 1;
    auto ds = generate_synthetic(cfg);
    write_dataset(dir, ds);
    save_features(Matrix(3, cfg.feature_dim), features_path(dir, ds.records[0].id).string());
    const auto opened = Dataset::open(dir);
    EXPECT_TRUE(throws_kind([&] { opened.load(opened.records()[0]); }, ErrorKind::validation));
}

TEST(Stats, SingleRecordExample) {
    AnnotationRecord r{"a", "a", "jump", 100, {25, 50}, "train"};
    const auto s = compute_dataset_stats({r});
    EXPECT_EQ(s.instances, 1u);
    EXPECT_EQ(s.boundaries, 2u);
    EXPECT_EQ(s.classes.at("jump").avg_boundaries, 2.0);
    EXPECT_EQ(s.classes.at("jump").per_split.at("train"), 1u);
    for (std::size_t b = 0; b < kPositionBins; ++b) EXPECT_EQ(s.position_histogram[b], (b == 5 || b == 10) ? 0.5 : 0.0);
    EXPECT_TRUE(throws_kind([] { compute_dataset_stats({}); }, ErrorKind::input));
}

TEST(Stats, UniformBoundariesGiveFlatHistogram) {
    Rng rng(5);
    std::vector<AnnotationRecord> records;
    for (std::size_t i = 0; i < 4000; ++i) {
        AnnotationRecord r{"r" + std::to_string(i), "", "c" + std::to_string(i % 3), 1000, {}, "train"};
        r.video_id = r.id;
        std::set<std::size_t> b;
        while (b.size() < 5) b.insert(uniform_index(rng, 1, 999));
        r.boundaries.assign(b.begin(), b.end());
        records.push_back(r);
    }
    const auto s = compute_dataset_stats(records);
    const double n = static_cast<double>(s.boundaries), expected = n / kPositionBins;
    double chi2 = 0.0;
    for (double p : s.position_histogram) chi2 += (p * n - expected) * (p * n - expected) / expected;
    // 19 degrees of freedom, 0.1% upper tail
    EXPECT_LT(chi2, 43.82);
}

TEST(Stats, TaposShapeCheck) {
    std::vector<AnnotationRecord> records;
    for (std::size_t c = 0; c < 21; ++c) {
        const std::size_t count = c == 0 ? 1601 : 200;
        for (std::size_t i = 0; i < count; ++i)
            records.push_back({"c" + std::to_string(c) + "_" + std::to_string(i), "", "class" + std::to_string(c), 10,
                               {5}, "train"});
    }
    EXPECT_TRUE(matches_tapos_shape(compute_dataset_stats(records)));
    records.resize(records.size() - 200);
    EXPECT_FALSE(matches_tapos_shape(compute_dataset_stats(records)));
    EXPECT_FALSE(matches_tapos_shape(compute_dataset_stats(generate_synthetic(SynthConfig{}).records)));
}

TEST(Predictions, RoundTripAndErrors) {
    std::vector<ParseResult> preds(2);
    preds[0].id = "a";
    preds[0].starts = {3, 9};
    preds[1].id = "b";
    std::stringstream ss;
    write_predictions(ss, preds);
    const auto back = read_predictions(ss);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].id, "a");
    EXPECT_EQ(back[0].starts, (Frames{3, 9}));
    EXPECT_TRUE(back[1].starts.empty());
    std::istringstream bad("{\"id\":\"a\",\"starts\":[-1]}");
    EXPECT_TRUE(throws_kind([&] { read_predictions(bad); }, ErrorKind::validation));
    std::istringstream junk("[");
    EXPECT_TRUE(throws_kind([&] { read_predictions(junk); }, ErrorKind::parse));
}
