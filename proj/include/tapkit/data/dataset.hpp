#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tapkit/data/annotations.hpp"
#include "tapkit/data/features.hpp"
#include "tapkit/data/synthetic.hpp"

namespace tapkit::data {

// Dataset directory layout:
//   <root>/annotations.jsonl      one AnnotationRecord per line
//   <root>/features/<id>.fseq     per-instance features
//   <root>/prototypes.fseq        synthetic datasets only
//   <root>/synth_config.json      synthetic datasets only

inline std::filesystem::path annotations_path(const std::filesystem::path& root) { return root / "annotations.jsonl"; }

inline std::filesystem::path features_path(const std::filesystem::path& root, const std::string& id) {
    return root / "features" / (id + ".fseq");
}

/// `explicit_root` if given, else $TAPKIT_DATA_DIR.
inline std::filesystem::path resolve_data_root(const std::optional<std::string>& explicit_root) {
    if (explicit_root && !explicit_root->empty()) return *explicit_root;
    if (const char* env = std::getenv("TAPKIT_DATA_DIR"); env && *env) return env;
    throw Error(ErrorKind::input, "no dataset directory given and TAPKIT_DATA_DIR is unset");
}

struct Instance {
    AnnotationRecord record;
    FeatureSequence features;
};

class Dataset {
public:
    static Dataset open(const std::filesystem::path& root) {
        if (!std::filesystem::is_directory(root)) {
            throw Error(ErrorKind::io, "dataset directory '" + root.string() + "' does not exist");
        }
        Dataset ds;
        ds.root_ = root;
        ds.records_ = load_annotations(annotations_path(root).string());
        ds.vocab_ = label_vocabulary(ds.records_);
        return ds;
    }

    const std::filesystem::path& root() const noexcept { return root_; }
    const std::vector<AnnotationRecord>& records() const noexcept { return records_; }
    const std::vector<std::string>& labels() const noexcept { return vocab_; }

    /// Records of one split; "all" selects everything.
    std::vector<AnnotationRecord> split(const std::string& name) const {
        std::vector<AnnotationRecord> out;
        for (const auto& r : records_)
            if (name == "all" || r.split == name) out.push_back(r);
        return out;
    }

    Instance load(const AnnotationRecord& rec) const {
        Matrix frames = load_features(features_path(root_, rec.id).string());
        if (frames.rows() != rec.length) {
            throw Error(ErrorKind::validation, "features of '" + rec.id + "' have " + std::to_string(frames.rows()) +
                                                   " frames, annotation says " + std::to_string(rec.length));
        }
        return {rec, {rec.id, std::move(frames)}};
    }

    std::vector<Instance> load_split(const std::string& name) const {
        std::vector<Instance> out;
        for (const auto& r : split(name)) out.push_back(load(r));
        return out;
    }

private:
    std::filesystem::path root_;
    std::vector<AnnotationRecord> records_;
    std::vector<std::string> vocab_;
};

inline void write_dataset(const std::filesystem::path& root, const SynthDataset& ds, const SynthConfig* cfg = nullptr) {
    std::filesystem::create_directories(root / "features");
    save_annotations(ds.records, annotations_path(root).string());
    for (const auto& f : ds.features) save_features(f.frames, features_path(root, f.id).string());
    save_features(ds.prototypes, (root / "prototypes.fseq").string());
    if (cfg) {
        auto out = io::open_out((root / "synth_config.json").string());
        out << to_json(*cfg).dump(2) << '\n';
    }
}

} // namespace tapkit::data
