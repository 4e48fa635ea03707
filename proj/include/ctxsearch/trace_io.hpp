#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxsearch/dagger.hpp"
#include "ctxsearch/scene_io.hpp"
#include "ctxsearch/search.hpp"

namespace ctxsearch {

inline nlohmann::json trace_to_json(const ExplorationTrace& t, const ClassCatalog& catalog) {
    nlohmann::json steps = nlohmann::json::array();
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
        const auto& s = t.steps[i];
        steps.push_back({{"step", i},
                         {"region_id", s.region_id},
                         {"belief", s.belief ? nlohmann::json(*s.belief) : nlohmann::json(nullptr)},
                         {"detection", to_json(s.detection, catalog)}});
    }
    return {{"scene_id", t.scene_id},
            {"query", catalog.name(t.query)},
            {"classification_calls", t.classification_calls},
            {"rescoring_events", t.rescoring_events},
            {"steps", steps}};
}

inline ExplorationTrace trace_from_json(const nlohmann::json& j, const ClassCatalog& catalog) {
    try {
        ExplorationTrace t;
        t.scene_id = j.at("scene_id").get<int>();
        t.query = catalog.find(j.at("query").get<std::string>());
        t.classification_calls = j.at("classification_calls").get<std::size_t>();
        t.rescoring_events = j.at("rescoring_events").get<std::size_t>();
        for (const auto& js : j.at("steps")) {
            TraceStep s;
            s.region_id = js.at("region_id").get<int>();
            if (!js.at("belief").is_null()) s.belief = js.at("belief").get<double>();
            s.detection = detection_from_json(js.at("detection"), catalog);
            t.steps.push_back(s);
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed trace record: ") + e.what());
    } catch (const LookupError& e) {
        throw SchemaError(std::string("malformed trace record: ") + e.what());
    }
}

inline void write_traces(std::ostream& out, const std::vector<ExplorationTrace>& traces, const ClassCatalog& catalog) {
    for (const auto& t : traces) out << trace_to_json(t, catalog).dump() << '\n';
}

inline std::vector<ExplorationTrace> read_traces(std::istream& in, const ClassCatalog& catalog) {
    std::vector<ExplorationTrace> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(trace_from_json(nlohmann::json::parse(line), catalog));
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaError("trace line " + std::to_string(out.size() + 1) + ": " + e.what());
        }
    }
    return out;
}

inline void write_diagnostics_csv(std::ostream& out, const std::vector<IterationDiagnostics>& diags, int selected) {
    std::ostringstream s;
    s.precision(10);
    s << "iteration,beta,examples_added,aggregate_size,mean_hamming,validation_hamming,selected\n";
    for (const auto& d : diags)
        s << d.iteration << ',' << d.beta << ',' << d.examples_added << ',' << d.aggregate_size << ',' << d.mean_hamming << ','
          << d.validation_hamming << ',' << (d.iteration == selected ? 1 : 0) << '\n';
    out << s.str();
}

}  // namespace ctxsearch
