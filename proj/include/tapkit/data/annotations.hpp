#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tapkit/data/binary_io.hpp"
#include "tapkit/types.hpp"

namespace tapkit::data {

struct AnnotationRecord {
    std::string id;
    std::string video_id;
    std::string label;
    std::size_t length = 0;
    std::vector<std::size_t> boundaries; // internal starts, strictly inside (0, length)
    std::string split = "train";

    Segmentation segmentation() const { return {id, label, length, boundaries}; }

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

inline nlohmann::json to_json(const AnnotationRecord& r) {
    return {{"id", r.id},         {"video_id", r.video_id},     {"label", r.label},
            {"length", r.length}, {"boundaries", r.boundaries}, {"split", r.split}};
}

/// One JSON object per line, fields as in AnnotationRecord.
inline void write_annotations(std::ostream& os, const std::vector<AnnotationRecord>& records) {
    for (const auto& r : records) os << to_json(r).dump() << '\n';
}

inline void save_annotations(const std::vector<AnnotationRecord>& records, const std::string& path) {
    auto out = io::open_out(path);
    write_annotations(out, records);
}

namespace detail {
inline const std::set<std::string>& known_splits() {
    static const std::set<std::string> splits{"train", "val", "test"};
    return splits;
}
} // namespace detail

/// Parses and validates JSON-lines annotations. Unsorted boundaries are
/// sorted with a warning; duplicate ids or boundaries, boundaries outside
/// (0, length), and videos spread over several splits are rejected.
inline std::vector<AnnotationRecord> read_annotations(std::istream& is, const std::string& context = "annotations") {
    std::vector<AnnotationRecord> records;
    std::set<std::string> ids;
    std::map<std::string, std::string> video_split;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = context + ":" + std::to_string(line_no);
        AnnotationRecord r;
        try {
            const auto j = nlohmann::json::parse(line);
            r.id = j.at("id").get<std::string>();
            r.video_id = j.contains("video_id") ? j.at("video_id").get<std::string>() : r.id;
            r.label = j.at("label").get<std::string>();
            const auto length = j.at("length").get<long long>();
            if (length <= 0) throw Error(ErrorKind::validation, where + ": length must be positive");
            r.length = static_cast<std::size_t>(length);
            for (const auto& b : j.at("boundaries")) {
                const auto v = b.get<long long>();
                if (v <= 0 || static_cast<std::size_t>(v) >= r.length) {
                    throw Error(ErrorKind::validation, where + ": boundary " + std::to_string(v) +
                                                           " outside (0, " + std::to_string(r.length) + ")");
                }
                r.boundaries.push_back(static_cast<std::size_t>(v));
            }
            r.split = j.contains("split") ? j.at("split").get<std::string>() : "train";
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::parse, where + ": " + e.what());
        }
        if (!detail::known_splits().count(r.split)) {
            throw Error(ErrorKind::validation, where + ": unknown split '" + r.split + "'");
        }
        if (!std::is_sorted(r.boundaries.begin(), r.boundaries.end())) {
            warn(where + ": boundaries of '" + r.id + "' were not sorted; sorting");
            std::sort(r.boundaries.begin(), r.boundaries.end());
        }
        if (std::adjacent_find(r.boundaries.begin(), r.boundaries.end()) != r.boundaries.end()) {
            throw Error(ErrorKind::validation, where + ": duplicate boundary in '" + r.id + "'");
        }
        if (!ids.insert(r.id).second) throw Error(ErrorKind::validation, where + ": duplicate id '" + r.id + "'");
        auto [it, fresh] = video_split.emplace(r.video_id, r.split);
        if (!fresh && it->second != r.split) {
            throw Error(ErrorKind::validation, where + ": video '" + r.video_id + "' appears in splits '" +
                                                   it->second + "' and '" + r.split + "'");
        }
        records.push_back(std::move(r));
    }
    return records;
}

inline std::vector<AnnotationRecord> load_annotations(const std::string& path) {
    auto in = io::open_in(path);
    return read_annotations(in, path);
}

/// Sorted distinct labels; a label's class index is its position here.
inline std::vector<std::string> label_vocabulary(const std::vector<AnnotationRecord>& records) {
    std::set<std::string> labels;
    for (const auto& r : records) labels.insert(r.label);
    return {labels.begin(), labels.end()};
}

inline std::size_t class_index(const std::vector<std::string>& vocab, const std::string& label) {
    auto it = std::lower_bound(vocab.begin(), vocab.end(), label);
    if (it == vocab.end() || *it != label) throw Error(ErrorKind::validation, "unknown label '" + label + "'");
    return static_cast<std::size_t>(it - vocab.begin());
}

} // namespace tapkit::data
