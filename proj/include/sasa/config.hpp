#pragma once

// Text formats for grids, mixture models and experiment specifications.
//
// Grid descriptors (CLI and config files):
//   axis   := "lo:hi:count" | "v1,v2,...,vk"
//   grid   := axis | axis "/" axis      second axis = standard deviations
//
// Model and experiment files are YAML; see README.md for the schema.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sasa/harness.hpp"

namespace sasa {

std::vector<double> parse_axis_spec(std::string_view text);
Grid parse_grid_spec(std::string_view text);
/// Comma-separated list of numbers.
std::vector<double> parse_number_list(std::string_view text);
/// Comma-separated items, each "v" or "v:w".
std::vector<std::pair<double, std::optional<double>>> parse_number_list_pairs(
    std::string_view text);

MixtureModelSpec parse_model_spec(const std::string& yaml_text);
MixtureModelSpec load_model_spec(const std::string& path);

/// Defaults when a field is absent: Poisson experiments use 101 equispaced
/// rates on [0, 20] with rho = 15 / S; location-scale experiments use 40
/// locations on [-2, 2] and 25 scales on [0.1, 4.0] without a penalty.
/// `model_file` paths are resolved relative to `base_dir`.
ExperimentSpec parse_experiment_spec(const std::string& yaml_text,
                                     const std::string& base_dir = ".");
ExperimentSpec load_experiment_spec(const std::string& path);

}  // namespace sasa
