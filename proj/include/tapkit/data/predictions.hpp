#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tapkit/data/binary_io.hpp"
#include "tapkit/types.hpp"

namespace tapkit::data {

// One prediction per line: {"id": "...", "starts": [int, ...]}

inline void write_predictions(std::ostream& os, const std::vector<ParseResult>& preds) {
    for (const auto& p : preds) os << nlohmann::json{{"id", p.id}, {"starts", p.starts}}.dump() << '\n';
}

inline void save_predictions(const std::vector<ParseResult>& preds, const std::string& path) {
    auto out = io::open_out(path);
    write_predictions(out, preds);
    if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

inline std::vector<ParseResult> read_predictions(std::istream& is, const std::string& context = "predictions") {
    std::vector<ParseResult> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = context + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::parse, where + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("starts") ||
            !j["starts"].is_array()) {
            throw Error(ErrorKind::validation, where + ": expected {\"id\": string, \"starts\": [int, ...]}");
        }
        ParseResult p;
        p.id = j["id"].get<std::string>();
        for (const auto& s : j["starts"]) {
            if (!s.is_number_unsigned()) throw Error(ErrorKind::validation, where + ": starts must be non-negative integers");
            p.starts.push_back(s.get<std::size_t>());
        }
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<ParseResult> load_predictions(const std::string& path) {
    auto in = io::open_in(path);
    return read_predictions(in, path);
}

} // namespace tapkit::data
