#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ctxsearch/error.hpp"
#include "ctxsearch/scene.hpp"

namespace ctxsearch {

/// Per-class placement and appearance priors.
struct ClassProfile {
    double presence = 0.3;     ///< base probability the class appears in a scene
    int instances = 1;         ///< instances placed when present
    double objectness = 0.6;   ///< mean objectness of its proposals
    double depth = 3.0;        ///< mean depth (m)
    double min_height = 0.0;   ///< mean lowest point above the floor (m)
    double max_height = 1.0;   ///< mean highest point above the floor (m)
    double width = 100.0;      ///< mean box width (px)
    double height = 100.0;     ///< mean box height (px)
    double center_y = 0.6;     ///< mean centroid row as a fraction of image height
};

struct Proximity {
    double mean = 50.0;    ///< target centroid distance (px)
    double spread = 10.0;  ///< standard deviation (px)
};

/// Generative model of synthetic indoor scenes and of the noisy region classifier.
struct GenConfig {
    ClassCatalog catalog;
    int top_k = 100;
    int n_scenes = 100;
    int image_width = 640;
    int image_height = 480;
    double room_depth = 6.0;
    double room_height = 3.0;

    std::vector<ClassProfile> profiles;
    /// cooccur[a][b] = P(b present | a present).
    std::vector<std::vector<double>> cooccur;
    /// Symmetric centroid-distance rules between class pairs.
    std::vector<std::vector<std::optional<Proximity>>> proximity;

    int background_min = 100;  ///< clamped to the room left by objects
    int background_max = 100;
    double objectness_sd = 0.12;
    double background_objectness = 0.4;
    double rank_noise = 0.1;

    ClassifierNoise noise;

    std::size_t n_classes() const noexcept { return catalog.size(); }
};

namespace detail {

inline ClassProfile builtin_profile(const std::string& name) {
    // presence, instances, objectness, depth, min_h, max_h, width, height, center_y
    static const std::map<std::string, ClassProfile> table = {
        {"bed", {0.5, 1, 0.85, 3.5, 0.0, 0.6, 260, 140, 0.70}},
        {"sofa", {0.4, 1, 0.80, 3.8, 0.0, 0.9, 240, 120, 0.65}},
        {"table", {0.4, 1, 0.65, 3.0, 0.0, 0.75, 160, 90, 0.70}},
        {"lamp", {0.25, 1, 0.45, 4.0, 0.5, 1.6, 40, 90, 0.35}},
        {"pillow", {0.15, 1, 0.40, 3.5, 0.4, 0.7, 60, 40, 0.60}},
        {"nightstand", {0.15, 1, 0.55, 4.2, 0.0, 0.6, 70, 70, 0.65}},
        {"counter", {0.3, 1, 0.60, 4.5, 0.0, 0.95, 280, 90, 0.60}},
        {"chair", {0.3, 2, 0.55, 2.8, 0.0, 0.9, 70, 110, 0.70}},
    };
    auto it = table.find(name);
    return it == table.end() ? ClassProfile{} : it->second;
}

struct BuiltinRule {
    const char* a;
    const char* b;
    double p;
    Proximity prox;
};

inline const std::vector<BuiltinRule>& builtin_rules() {
    static const std::vector<BuiltinRule> rules = {
        {"bed", "pillow", 0.9, {35, 10}},      {"bed", "nightstand", 0.7, {170, 30}},
        {"nightstand", "lamp", 0.7, {60, 15}}, {"table", "chair", 0.85, {90, 25}},
        {"sofa", "table", 0.5, {120, 30}},     {"sofa", "pillow", 0.4, {40, 15}},
        {"counter", "chair", 0.3, {120, 30}},
    };
    return rules;
}

inline std::vector<std::vector<double>> default_confusion(std::size_t n, double accuracy, double background_accuracy) {
    std::vector<std::vector<double>> m(n + 1, std::vector<double>(n + 1, 0.0));
    for (std::size_t c = 0; c < n; ++c) {
        m[c][c] = accuracy;
        m[c][n] = 1.0 - accuracy;
    }
    m[n][n] = background_accuracy;
    if (n > 0)
        for (std::size_t c = 0; c < n; ++c) m[n][c] = (1.0 - background_accuracy) / static_cast<double>(n);
    else
        m[n][n] = 1.0;
    return m;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a real number, got '" + v + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long long d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<int>(d);
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an integer, got '" + v + "'");
    }
}

}  // namespace detail

/// Builds a config for `catalog`. With `builtin_structure`, known class names get the
/// built-in co-occurrence and proximity rules; otherwise no pair structure is planted.
inline GenConfig make_gen_config(ClassCatalog catalog, bool builtin_structure = true) {
    GenConfig cfg;
    cfg.catalog = std::move(catalog);
    const std::size_t n = cfg.catalog.size();
    for (const auto& name : cfg.catalog.names()) cfg.profiles.push_back(detail::builtin_profile(name));
    cfg.cooccur.assign(n, std::vector<double>(n, 0.0));
    cfg.proximity.assign(n, std::vector<std::optional<Proximity>>(n));
    if (builtin_structure) {
        for (const auto& rule : detail::builtin_rules()) {
            if (!cfg.catalog.contains(rule.a) || !cfg.catalog.contains(rule.b)) continue;
            const auto a = static_cast<std::size_t>(to_index(cfg.catalog.find(rule.a)));
            const auto b = static_cast<std::size_t>(to_index(cfg.catalog.find(rule.b)));
            cfg.cooccur[a][b] = rule.p;
            cfg.proximity[a][b] = rule.prox;
            cfg.proximity[b][a] = rule.prox;
        }
    }
    cfg.noise.confusion = detail::default_confusion(n, 0.85, 0.96);
    return cfg;
}

inline ClassCatalog default_catalog() {
    return ClassCatalog({"bed", "sofa", "table", "lamp", "pillow", "nightstand", "counter", "chair"});
}

inline GenConfig default_gen_config() { return make_gen_config(default_catalog()); }

inline void validate(const GenConfig& cfg) {
    const std::size_t n = cfg.n_classes();
    auto prob = [](const std::string& field, double p) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(field, "probability must lie in [0,1]");
    };
    if (n == 0) throw ConfigError("classes", "catalog is empty");
    if (cfg.top_k < 1) throw ConfigError("top_k", "must be >= 1");
    if (cfg.n_scenes < 1) throw ConfigError("n_scenes", "must be >= 1");
    if (cfg.image_width < 8) throw ConfigError("image.width", "must be >= 8");
    if (cfg.image_height < 8) throw ConfigError("image.height", "must be >= 8");
    if (!(cfg.room_depth > 0.0)) throw ConfigError("room.depth", "must be > 0");
    if (!(cfg.room_height > 0.0)) throw ConfigError("room.height", "must be > 0");
    if (cfg.profiles.size() != n) throw ConfigError("class", "one profile per class required");
    if (cfg.cooccur.size() != n) throw ConfigError("cooccur", "matrix must be C x C");
    if (cfg.proximity.size() != n) throw ConfigError("proximity", "matrix must be C x C");
    for (std::size_t a = 0; a < n; ++a) {
        const auto& an = cfg.catalog.names()[a];
        const auto& p = cfg.profiles[a];
        prob("presence." + an, p.presence);
        prob("class." + an + ".objectness", p.objectness);
        prob("class." + an + ".center_y", p.center_y);
        if (p.instances < 0) throw ConfigError("instances." + an, "must be >= 0");
        if (!(p.depth > 0.0)) throw ConfigError("class." + an + ".depth", "must be > 0");
        if (p.min_height < 0.0) throw ConfigError("class." + an + ".min_height", "must be >= 0");
        if (p.max_height < p.min_height) throw ConfigError("class." + an + ".max_height", "must be >= min_height");
        if (!(p.width > 0.0)) throw ConfigError("class." + an + ".width", "must be > 0");
        if (!(p.height > 0.0)) throw ConfigError("class." + an + ".height", "must be > 0");
        if (cfg.cooccur[a].size() != n) throw ConfigError("cooccur", "matrix must be C x C");
        if (cfg.proximity[a].size() != n) throw ConfigError("proximity", "matrix must be C x C");
        for (std::size_t b = 0; b < n; ++b) {
            const auto& bn = cfg.catalog.names()[b];
            prob("cooccur." + an + "." + bn, cfg.cooccur[a][b]);
            if (const auto& pr = cfg.proximity[a][b]) {
                if (pr->mean < 0.0) throw ConfigError("proximity." + an + "." + bn + ".mean", "must be >= 0");
                if (pr->spread < 0.0) throw ConfigError("proximity." + an + "." + bn + ".spread", "must be >= 0");
            }
        }
    }
    if (cfg.background_min < 0) throw ConfigError("background.min", "must be >= 0");
    if (cfg.background_max < cfg.background_min) throw ConfigError("background.max", "must be >= background.min");
    if (cfg.objectness_sd < 0.0) throw ConfigError("objectness.sd", "must be >= 0");
    prob("objectness.background", cfg.background_objectness);
    if (cfg.rank_noise < 0.0) throw ConfigError("objectness.rank_noise", "must be >= 0");

    const auto& m = cfg.noise.confusion;
    if (m.size() != n + 1) throw ConfigError("confusion", "matrix must be (C+1) x (C+1)");
    for (std::size_t r = 0; r <= n; ++r) {
        const std::string rn = r == n ? kBackgroundName : cfg.catalog.names()[r];
        if (m[r].size() != n + 1) throw ConfigError("confusion." + rn, "row must have C+1 entries");
        double sum = 0.0;
        for (std::size_t c = 0; c <= n; ++c) {
            const std::string cn = c == n ? kBackgroundName : cfg.catalog.names()[c];
            prob("confusion." + rn + "." + cn, m[r][c]);
            sum += m[r][c];
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("confusion." + rn, "row must sum to 1");
    }
    const auto& conf = cfg.noise.confidence;
    prob("confidence.correct.mean", conf.correct_mean);
    prob("confidence.wrong.mean", conf.wrong_mean);
    if (conf.correct_sd < 0.0) throw ConfigError("confidence.correct.sd", "must be >= 0");
    if (conf.wrong_sd < 0.0) throw ConfigError("confidence.wrong.sd", "must be >= 0");
}

/// Parses flat `key=value` text (dotted namespaces, `#` comments). Unknown or
/// duplicated keys are configuration errors naming the key.
inline GenConfig parse_gen_config(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::map<std::string, std::string> by_key;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no), "expected key=value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "empty key");
        if (by_key.count(key)) throw ConfigError(key, "duplicate key");
        by_key[key] = value;
        entries.emplace_back(std::move(key), std::move(value));
    }

    ClassCatalog catalog = default_catalog();
    if (auto it = by_key.find("classes"); it != by_key.end()) {
        std::vector<std::string> names;
        for (const auto& s : detail::split(it->second, ',')) names.push_back(detail::trim(s));
        catalog = ClassCatalog(std::move(names));
    }
    bool builtin = true;
    if (auto it = by_key.find("structure"); it != by_key.end()) {
        if (it->second == "none")
            builtin = false;
        else if (it->second != "default")
            throw ConfigError("structure", "expected 'default' or 'none'");
    }
    GenConfig cfg = make_gen_config(catalog, builtin);
    const std::size_t n = cfg.n_classes();

    double accuracy = 0.85, bg_accuracy = 0.96;
    if (auto it = by_key.find("classifier.accuracy"); it != by_key.end())
        accuracy = detail::parse_double(it->first, it->second);
    if (auto it = by_key.find("classifier.background_accuracy"); it != by_key.end())
        bg_accuracy = detail::parse_double(it->first, it->second);
    cfg.noise.confusion = detail::default_confusion(n, accuracy, bg_accuracy);

    auto cls = [&](const std::string& key, const std::string& name) -> std::size_t {
        if (!catalog.contains(name)) throw ConfigError(key, "unknown class '" + name + "'");
        return static_cast<std::size_t>(to_index(catalog.find(name)));
    };
    auto cls_or_bg = [&](const std::string& key, const std::string& name) -> std::size_t {
        if (name == kBackgroundName) return n;
        return cls(key, name);
    };

    std::vector<bool> explicit_row(n + 1, false);
    for (const auto& [key, value] : entries) {
        const auto parts = detail::split(key, '.');
        auto num = [&] { return detail::parse_double(key, value); };
        auto integer = [&] { return detail::parse_int(key, value); };
        const std::size_t np = parts.size();

        if (key == "classes" || key == "structure" || key == "classifier.accuracy" ||
            key == "classifier.background_accuracy") {
            continue;
        } else if (key == "top_k") {
            cfg.top_k = integer();
        } else if (key == "n_scenes") {
            cfg.n_scenes = integer();
        } else if (key == "image.width") {
            cfg.image_width = integer();
        } else if (key == "image.height") {
            cfg.image_height = integer();
        } else if (key == "room.depth") {
            cfg.room_depth = num();
        } else if (key == "room.height") {
            cfg.room_height = num();
        } else if (key == "background.min") {
            cfg.background_min = integer();
        } else if (key == "background.max") {
            cfg.background_max = integer();
        } else if (key == "objectness.sd") {
            cfg.objectness_sd = num();
        } else if (key == "objectness.background") {
            cfg.background_objectness = num();
        } else if (key == "objectness.rank_noise") {
            cfg.rank_noise = num();
        } else if (key == "confidence.correct.mean") {
            cfg.noise.confidence.correct_mean = num();
        } else if (key == "confidence.correct.sd") {
            cfg.noise.confidence.correct_sd = num();
        } else if (key == "confidence.wrong.mean") {
            cfg.noise.confidence.wrong_mean = num();
        } else if (key == "confidence.wrong.sd") {
            cfg.noise.confidence.wrong_sd = num();
        } else if (np == 2 && parts[0] == "presence") {
            cfg.profiles[cls(key, parts[1])].presence = num();
        } else if (np == 2 && parts[0] == "instances") {
            cfg.profiles[cls(key, parts[1])].instances = integer();
        } else if (np == 3 && parts[0] == "class") {
            auto& p = cfg.profiles[cls(key, parts[1])];
            const auto& field = parts[2];
            if (field == "objectness") p.objectness = num();
            else if (field == "depth") p.depth = num();
            else if (field == "min_height") p.min_height = num();
            else if (field == "max_height") p.max_height = num();
            else if (field == "width") p.width = num();
            else if (field == "height") p.height = num();
            else if (field == "center_y") p.center_y = num();
            else throw ConfigError(key, "unknown class attribute '" + field + "'");
        } else if (np == 3 && parts[0] == "cooccur") {
            cfg.cooccur[cls(key, parts[1])][cls(key, parts[2])] = num();
        } else if (np == 4 && parts[0] == "proximity") {
            const auto a = cls(key, parts[1]);
            const auto b = cls(key, parts[2]);
            Proximity pr = cfg.proximity[a][b].value_or(Proximity{});
            if (parts[3] == "mean") pr.mean = num();
            else if (parts[3] == "spread") pr.spread = num();
            else throw ConfigError(key, "expected .mean or .spread");
            cfg.proximity[a][b] = pr;
            cfg.proximity[b][a] = pr;
        } else if (np == 3 && parts[0] == "confusion") {
            const auto r = cls_or_bg(key, parts[1]);
            const auto c = cls_or_bg(key, parts[2]);
            if (!explicit_row[r]) {
                std::fill(cfg.noise.confusion[r].begin(), cfg.noise.confusion[r].end(), 0.0);
                explicit_row[r] = true;
            }
            cfg.noise.confusion[r][c] = num();
        } else {
            throw ConfigError(key, "unknown configuration key");
        }
    }
    validate(cfg);
    return cfg;
}

inline GenConfig parse_gen_config(const std::string& text) {
    std::istringstream in(text);
    return parse_gen_config(in);
}

inline GenConfig load_gen_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    return parse_gen_config(in);
}

}  // namespace ctxsearch
