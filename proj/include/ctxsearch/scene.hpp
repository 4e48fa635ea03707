#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxsearch/error.hpp"
#include "ctxsearch/geometry.hpp"

namespace ctxsearch {

/// Index into a ClassCatalog, or `background`.
enum class ClassId : int { background = -1 };

constexpr ClassId class_id(int index) noexcept { return static_cast<ClassId>(index); }
constexpr int to_index(ClassId c) noexcept { return static_cast<int>(c); }
constexpr bool is_background(ClassId c) noexcept { return c == ClassId::background; }

inline constexpr const char* kBackgroundName = "background";

/// Ordered class names. The order is the canonical class index used by every
/// feature layout; background is implicit and never listed.
class ClassCatalog {
public:
    ClassCatalog() = default;
    explicit ClassCatalog(std::vector<std::string> names) : names_(std::move(names)) {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i].empty()) throw ConfigError("classes", "empty class name");
            if (names_[i] == kBackgroundName)
                throw ConfigError("classes", "'background' is reserved and may not be listed");
            for (std::size_t j = 0; j < i; ++j)
                if (names_[j] == names_[i]) throw ConfigError("classes", "duplicate class '" + names_[i] + "'");
        }
    }

    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    const std::string& name(ClassId c) const {
        static const std::string bg = kBackgroundName;
        if (is_background(c)) return bg;
        if (to_index(c) < 0 || static_cast<std::size_t>(to_index(c)) >= names_.size())
            throw LookupError("class index " + std::to_string(to_index(c)) + " out of range");
        return names_[static_cast<std::size_t>(to_index(c))];
    }

    /// Accepts "background" as well as catalog names.
    ClassId find(const std::string& name) const {
        if (name == kBackgroundName) return ClassId::background;
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return class_id(static_cast<int>(i));
        throw LookupError("unknown class '" + name + "'; catalog: " + joined());
    }

    bool contains(const std::string& name) const {
        for (const auto& n : names_)
            if (n == name) return true;
        return false;
    }

    std::string joined() const {
        std::string out;
        for (const auto& n : names_) {
            if (!out.empty()) out += ",";
            out += n;
        }
        return out;
    }

    friend bool operator==(const ClassCatalog&, const ClassCatalog&) = default;

private:
    std::vector<std::string> names_;
};

struct Region {
    int id = 0;
    BBox bbox;
    int proposal_rank = 0;
    double objectness_score = 0.0;
    double mean_depth = 1.0;
    double mean_dist_back = 0.0;
    double min_height = 0.0;
    double max_height = 0.0;
    ClassId gt_class = ClassId::background;

    friend bool operator==(const Region&, const Region&) = default;
};

struct Detection {
    int region_id = 0;
    ClassId predicted_class = ClassId::background;
    double confidence = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct ConfidenceModel {
    double correct_mean = 0.8;
    double correct_sd = 0.1;
    double wrong_mean = 0.4;
    double wrong_sd = 0.15;

    friend bool operator==(const ConfidenceModel&, const ConfidenceModel&) = default;
};

/// Simulated region classifier. `confusion` is (C+1) x (C+1): row = groundtruth,
/// column = prediction, with background at index C in both.
struct ClassifierNoise {
    std::vector<std::vector<double>> confusion;
    ConfidenceModel confidence;

    friend bool operator==(const ClassifierNoise&, const ClassifierNoise&) = default;
};

inline std::size_t confusion_index(ClassId c, std::size_t n_classes) noexcept {
    return is_background(c) ? n_classes : static_cast<std::size_t>(to_index(c));
}

/// One image: the top-k proposals sorted by rank plus generation metadata.
struct Scene {
    int id = 0;
    int image_width = 640;
    int image_height = 480;
    double room_depth = 6.0;
    double room_height = 3.0;
    std::uint64_t seed = 0;
    ClassCatalog catalog;
    ClassifierNoise noise;
    std::vector<Region> regions;

    std::size_t index_of(int region_id) const {
        for (std::size_t i = 0; i < regions.size(); ++i)
            if (regions[i].id == region_id) return i;
        throw LookupError("scene " + std::to_string(id) + " has no region " + std::to_string(region_id));
    }

    const Region& region(int region_id) const { return regions[index_of(region_id)]; }

    std::size_t count_class(ClassId c) const {
        std::size_t n = 0;
        for (const auto& r : regions) n += (r.gt_class == c);
        return n;
    }

    friend bool operator==(const Scene&, const Scene&) = default;
};

using Corpus = std::vector<Scene>;

}  // namespace ctxsearch
