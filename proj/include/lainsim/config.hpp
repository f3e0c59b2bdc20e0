#pragma once

#include <string>

#include "lainsim/experiments.hpp"

namespace lain {

// Parses the commented-JSON experiment config. Missing keys fall back to
// the documented defaults.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& text);

// A fully commented configuration template.
std::string config_template();

}  // namespace lain
