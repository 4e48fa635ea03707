#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "ctxsearch/error.hpp"
#include "ctxsearch/scene.hpp"

namespace ctxsearch {

using Json = nlohmann::json;

inline Json to_json(const BBox& b) {
    return Json{{"x_min", b.x_min}, {"y_min", b.y_min}, {"x_max", b.x_max}, {"y_max", b.y_max}};
}

inline BBox bbox_from_json(const Json& j) {
    return {j.at("x_min").get<double>(), j.at("y_min").get<double>(), j.at("x_max").get<double>(),
            j.at("y_max").get<double>()};
}

inline Json to_json(const Region& r, const ClassCatalog& catalog) {
    return Json{{"id", r.id},
                {"bbox", to_json(r.bbox)},
                {"proposal_rank", r.proposal_rank},
                {"objectness_score", r.objectness_score},
                {"mean_depth", r.mean_depth},
                {"mean_dist_back", r.mean_dist_back},
                {"min_height", r.min_height},
                {"max_height", r.max_height},
                {"gt_class", catalog.name(r.gt_class)}};
}

inline Json to_json(const Detection& d, const ClassCatalog& catalog) {
    return Json{{"region_id", d.region_id}, {"predicted_class", catalog.name(d.predicted_class)}, {"confidence", d.confidence}};
}

inline Detection detection_from_json(const Json& j, const ClassCatalog& catalog) {
    Detection d;
    d.region_id = j.at("region_id").get<int>();
    d.predicted_class = catalog.find(j.at("predicted_class").get<std::string>());
    d.confidence = j.at("confidence").get<double>();
    return d;
}

inline Json to_json(const Scene& s) {
    Json regions = Json::array();
    for (const auto& r : s.regions) regions.push_back(to_json(r, s.catalog));
    const auto& cm = s.noise.confidence;
    return Json{{"id", s.id},
                {"image_width", s.image_width},
                {"image_height", s.image_height},
                {"room_depth", s.room_depth},
                {"room_height", s.room_height},
                {"seed", s.seed},
                {"catalog", s.catalog.names()},
                {"noise",
                 {{"confusion", s.noise.confusion},
                  {"confidence",
                   {{"correct_mean", cm.correct_mean},
                    {"correct_sd", cm.correct_sd},
                    {"wrong_mean", cm.wrong_mean},
                    {"wrong_sd", cm.wrong_sd}}}}},
                {"regions", regions}};
}

/// Parses and validates one scene record; structural problems raise SchemaError.
inline Scene scene_from_json(const Json& j) {
    try {
        Scene s;
        s.id = j.at("id").get<int>();
        s.image_width = j.at("image_width").get<int>();
        s.image_height = j.at("image_height").get<int>();
        s.room_depth = j.at("room_depth").get<double>();
        s.room_height = j.at("room_height").get<double>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.catalog = ClassCatalog(j.at("catalog").get<std::vector<std::string>>());
        const Json& noise = j.at("noise");
        s.noise.confusion = noise.at("confusion").get<std::vector<std::vector<double>>>();
        const Json& cm = noise.at("confidence");
        s.noise.confidence = {cm.at("correct_mean").get<double>(), cm.at("correct_sd").get<double>(),
                              cm.at("wrong_mean").get<double>(), cm.at("wrong_sd").get<double>()};
        const std::size_t n = s.catalog.size();
        if (s.noise.confusion.size() != n + 1) throw SchemaError("confusion matrix must be (C+1) x (C+1)");
        for (const auto& row : s.noise.confusion)
            if (row.size() != n + 1) throw SchemaError("confusion matrix must be (C+1) x (C+1)");

        for (const Json& jr : j.at("regions")) {
            Region r;
            r.id = jr.at("id").get<int>();
            r.bbox = bbox_from_json(jr.at("bbox"));
            r.proposal_rank = jr.at("proposal_rank").get<int>();
            r.objectness_score = jr.at("objectness_score").get<double>();
            r.mean_depth = jr.at("mean_depth").get<double>();
            r.mean_dist_back = jr.at("mean_dist_back").get<double>();
            r.min_height = jr.at("min_height").get<double>();
            r.max_height = jr.at("max_height").get<double>();
            r.gt_class = s.catalog.find(jr.at("gt_class").get<std::string>());
            if (!r.bbox.valid()) throw SchemaError("region " + std::to_string(r.id) + " has a degenerate bbox");
            if (r.min_height > r.max_height) throw SchemaError("region " + std::to_string(r.id) + " has min_height > max_height");
            if (r.proposal_rank != static_cast<int>(s.regions.size()))
                throw SchemaError("regions must be sorted by proposal_rank starting at 0");
            s.regions.push_back(r);
        }
        return s;
    } catch (const Json::exception& e) {
        throw SchemaError(std::string("malformed scene record: ") + e.what());
    } catch (const LookupError& e) {
        throw SchemaError(std::string("malformed scene record: ") + e.what());
    }
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& s : corpus) out << to_json(s).dump() << '\n';
}

inline Corpus read_corpus(std::istream& in) {
    Corpus corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw SchemaError("corpus line " + std::to_string(corpus.size() + 1) + ": " + e.what());
        }
        corpus.push_back(scene_from_json(j));
    }
    return corpus;
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write '" + path + "'");
    write_corpus(out, corpus);
}

inline Corpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot read '" + path + "'");
    return read_corpus(in);
}

}  // namespace ctxsearch
