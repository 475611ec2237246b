#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "e2d/dataset.hpp"
#include "e2d/events.hpp"
#include "e2d/model.hpp"
#include "e2d/trainer.hpp"

namespace e2d::app {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsage = 2 };

/// Every configurable value, addressable by flat dotted keys such as
/// "train.lambda" or "model.base_channels".
struct AppConfig {
  NetworkConfig model;
  TrainConfig train;
  SampleOptions data;
  SimulatorConfig simulator;
  std::vector<Stage> stages;  // empty: one stage over --data for train.epochs
};

/// Applies one key; throws ConfigError for unknown keys or ill-typed values.
void set_config_value(AppConfig& config, const std::string& key, const std::string& json_value);
/// Flat JSON object of dotted keys.
void apply_config_json(AppConfig& config, const std::string& text);
/// "key=value"; the value is parsed as JSON and falls back to a plain string.
void apply_override(AppConfig& config, const std::string& assignment);
std::vector<std::string> config_keys();

/// Runs the command line; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace e2d::app
