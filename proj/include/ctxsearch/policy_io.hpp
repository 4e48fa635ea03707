#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ctxsearch/error.hpp"
#include "ctxsearch/policy.hpp"

namespace ctxsearch {

inline constexpr const char* kModelFormat = "ctxsearch-model";
inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json policy_to_json(const Policy& p) {
    return nlohmann::json{{"format", kModelFormat},
                          {"format_version", kModelFormatVersion},
                          {"feature_schema_version", kFeatureSchemaVersion},
                          {"feature_schema", schema_name(p.schema)},
                          {"catalog", p.catalog.names()},
                          {"mean", p.mean},
                          {"scale", p.scale},
                          {"weights", p.weights},
                          {"threshold", p.threshold}};
}

/// Rejects files from another format or feature-schema version.
inline Policy policy_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kModelFormat) throw SchemaError("not a model file");
        if (j.at("format_version").get<int>() != kModelFormatVersion)
            throw SchemaError("unsupported model format version " + std::to_string(j.at("format_version").get<int>()));
        const auto version = j.at("feature_schema_version").get<std::string>();
        if (version != kFeatureSchemaVersion)
            throw SchemaError("model feature schema '" + version + "' does not match '" + kFeatureSchemaVersion + "'");
        Policy p;
        p.schema = parse_schema_name(j.at("feature_schema").get<std::string>());
        p.catalog = ClassCatalog(j.at("catalog").get<std::vector<std::string>>());
        p.mean = j.at("mean").get<std::vector<double>>();
        p.scale = j.at("scale").get<std::vector<double>>();
        p.weights = j.at("weights").get<std::vector<double>>();
        p.threshold = j.at("threshold").get<double>();
        p.check_consistent();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed model file: ") + e.what());
    } catch (const ConfigError& e) {
        throw SchemaError(std::string("malformed model catalog: ") + e.what());
    }
}

inline void save_policy(const std::string& path, const Policy& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write '" + path + "'");
    out << policy_to_json(p).dump(2) << '\n';
}

inline Policy load_policy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot read '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("model file '" + path + "' is not JSON: " + e.what());
    }
    return policy_from_json(j);
}

}  // namespace ctxsearch
