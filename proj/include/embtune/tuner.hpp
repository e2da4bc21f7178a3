#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace embtune {

// Finite candidate grid over the tunable knobs.
struct KnobSpace {
    struct Knob {
        std::string name;
        std::string category;  // informational (resource, optimizer, ...)
        std::vector<double> candidates;
    };
    std::vector<Knob> knobs;

    std::size_t grid_size() const;  // product of candidate counts

    nlohmann::ordered_json to_json() const;
    static KnobSpace from_json(const nlohmann::ordered_json& j);
};

// Full lexicographic enumeration (first knob slowest). Throws when the
// grid exceeds `cap`.
std::vector<std::vector<double>> enumerate_grid(const KnobSpace& space,
                                                std::size_t cap = 1000000);

struct Recommendation {
    // Ranked ascending by predicted latency; enumeration order breaks
    // ties, so the lexicographically first config wins.
    std::vector<std::vector<double>> configs;
    std::vector<double> predicted;
    std::size_t skipped_non_finite = 0;

    const std::vector<double>& best() const { return configs.front(); }
    double best_latency() const { return predicted.front(); }

    nlohmann::ordered_json to_json(const KnobSpace& space) const;
};

Recommendation recommend(const std::function<double(const std::vector<double>&)>& predict,
                         const KnobSpace& space, std::size_t top_m = 5,
                         std::size_t cap = 1000000);

// Fractional latency reduction: 1 - optimized/initial.
double improvement(double initial, double optimized);

}  // namespace embtune
