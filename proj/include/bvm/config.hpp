#pragma once

#include <filesystem>
#include <string>

#include "bvm/harness.hpp"

#include <nlohmann/json_fwd.hpp>

namespace bvm {

// Experiment description parsed from a versioned JSON config (schema 1).
// Defaults: burn-in 20% of steps, thinning 1, alpha 0.1.
struct ParsedConfig {
    ExperimentConfig experiment;
    std::uint64_t seed = 0;
    int kato_reps = 200;
    std::vector<int> expand_dims{2, 5};
    std::vector<int> expand_ns{50, 500};
    std::vector<double> expand_ts{-2.0, 1.0, 3.0};
    int expand_cases = 100;
    bool has_functional = false;
    bool has_da = false;
    bool has_prior = false;
};

ParsedConfig parse_config(const std::filesystem::path& path);
ParsedConfig parse_config_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

// Round-trip serialization of everything parse_config_json consumes.
nlohmann::json config_to_json(const ParsedConfig& config);

FunctionalSpec functional_from_json(const nlohmann::json& j);
nlohmann::json functional_to_json(const FunctionalSpec& f);

}  // namespace bvm
