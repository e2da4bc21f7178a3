#include "embtune/tuner.hpp"

#include <cmath>
#include <stdexcept>

namespace embtune {

std::size_t KnobSpace::grid_size() const {
    std::size_t n = 1;
    for (const auto& k : knobs) {
        if (k.candidates.empty()) throw std::invalid_argument("knob " + k.name + " has no candidates");
        if (n > std::size_t(-1) / k.candidates.size()) return std::size_t(-1);
        n *= k.candidates.size();
    }
    return n;
}

nlohmann::ordered_json KnobSpace::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    nlohmann::ordered_json ks = nlohmann::ordered_json::array();
    for (const auto& k : knobs) {
        ks.push_back({{"name", k.name}, {"category", k.category}, {"candidates", k.candidates}});
    }
    j["knobs"] = ks;
    return j;
}

KnobSpace KnobSpace::from_json(const nlohmann::ordered_json& j) {
    KnobSpace s;
    for (const auto& kj : j.at("knobs")) {
        Knob k;
        k.name = kj.at("name").get<std::string>();
        k.category = kj.value("category", std::string("unspecified"));
        k.candidates = kj.at("candidates").get<std::vector<double>>();
        if (k.candidates.empty()) {
            throw std::invalid_argument("knob " + k.name + " has no candidates");
        }
        s.knobs.push_back(std::move(k));
    }
    if (s.knobs.empty()) throw std::invalid_argument("knob space is empty");
    return s;
}

namespace {

template <typename Visit>
void walk_grid(const KnobSpace& space, Visit&& visit) {
    const std::size_t s = space.knobs.size();
    std::vector<std::size_t> idx(s, 0);
    std::vector<double> cfg(s);
    for (std::size_t q = 0; q < s; ++q) cfg[q] = space.knobs[q].candidates[0];
    for (;;) {
        visit(cfg);
        // odometer advance, last knob fastest
        std::size_t q = s;
        bool advanced = false;
        while (q > 0) {
            --q;
            if (++idx[q] < space.knobs[q].candidates.size()) {
                cfg[q] = space.knobs[q].candidates[idx[q]];
                advanced = true;
                break;
            }
            idx[q] = 0;
            cfg[q] = space.knobs[q].candidates[0];
        }
        if (!advanced) return;
    }
}

}  // namespace

std::vector<std::vector<double>> enumerate_grid(const KnobSpace& space, std::size_t cap) {
    const std::size_t n = space.grid_size();
    if (n > cap) {
        throw std::invalid_argument("grid size " + std::to_string(n) + " exceeds cap " +
                                    std::to_string(cap));
    }
    std::vector<std::vector<double>> out;
    out.reserve(n);
    walk_grid(space, [&](const std::vector<double>& cfg) { out.push_back(cfg); });
    return out;
}

Recommendation recommend(const std::function<double(const std::vector<double>&)>& predict,
                         const KnobSpace& space, std::size_t top_m, std::size_t cap) {
    if (top_m == 0) throw std::invalid_argument("recommend: top_m must be > 0");
    const std::size_t n = space.grid_size();
    if (n > cap) {
        throw std::invalid_argument("grid size " + std::to_string(n) + " exceeds cap " +
                                    std::to_string(cap));
    }

    Recommendation rec;
    walk_grid(space, [&](const std::vector<double>& cfg) {
        const double y = predict(cfg);
        if (!std::isfinite(y)) {
            ++rec.skipped_non_finite;
            return;
        }
        // Insert into the running top-M; strict < keeps the earlier
        // (lexicographically smaller) config on ties.
        std::size_t pos = rec.predicted.size();
        while (pos > 0 && y < rec.predicted[pos - 1]) --pos;
        if (pos >= top_m) return;
        rec.predicted.insert(rec.predicted.begin() + static_cast<long>(pos), y);
        rec.configs.insert(rec.configs.begin() + static_cast<long>(pos), cfg);
        if (rec.predicted.size() > top_m) {
            rec.predicted.pop_back();
            rec.configs.pop_back();
        }
    });
    if (rec.configs.empty()) {
        throw std::runtime_error("recommend: every prediction was non-finite");
    }
    return rec;
}

nlohmann::ordered_json Recommendation::to_json(const KnobSpace& space) const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    nlohmann::ordered_json ranked = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < configs.size(); ++i) {
        nlohmann::ordered_json cfg;
        for (std::size_t q = 0; q < space.knobs.size(); ++q) {
            cfg[space.knobs[q].name] = configs[i][q];
        }
        ranked.push_back({{"rank", i + 1}, {"config", cfg}, {"predicted_latency", predicted[i]}});
    }
    j["recommendations"] = ranked;
    j["skipped_non_finite"] = skipped_non_finite;
    return j;
}

double improvement(double initial, double optimized) {
    if (!(initial > 0.0)) throw std::invalid_argument("improvement: initial must be positive");
    return 1.0 - optimized / initial;
}

}  // namespace embtune
