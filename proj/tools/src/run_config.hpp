#pragma once

// Run configuration for the promix command-line tool.
//
// A config file is a JSON object overlaid on the built-in defaults. Every key
// must already exist in the defaults and carry a compatible type; anything
// else is rejected with the JSON pointer of the offending value.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "promix/error.hpp"
#include "promix/harness.hpp"
#include "promix/report_json.hpp"

namespace promix::cli {

class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string pointer, const std::string& message)
      : InvalidArgument((pointer.empty() ? std::string("/") : pointer) + ": " + message),
        pointer_(std::move(pointer)) {}

  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

Json default_config();

// Merges `patch` into `base` in place. Objects merge key by key; every other
// value replaces the default wholesale.
void overlay(Json& base, const Json& patch, const std::string& pointer = "");

// `path=value` with a dotted or slash-separated path. The value is parsed as
// JSON when possible and taken as a string otherwise.
void apply_set(Json& config, std::string_view assignment);

struct ConfigSources {
  std::optional<std::filesystem::path> file;
  std::vector<std::string> sets;
  std::optional<std::string> env_seed;  // PROMIX_SEED
  std::optional<std::filesystem::path> out_dir;
};

// Defaults, then the file, then each --set, then the seed override.
Json load_config(const ConfigSources& sources);

struct RunConfig {
  DataSource data;
  PartitionSpec partition;
  HyperParams hyper;
  LossConfig loss;
  OptimizerConfig opt;
  OutclassStrategy outclass;
  Parameterization weights = Parameterization::kTwoStage;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  double tau = kDefaultTemperature;
  std::size_t vocab_pool_size = 256;

  BaseToNewConfig base_to_new;
  FscilConfig fscil;
  AssumptionConfig assume;
  ConfusingGainConfig confusing;
  BoundSweepConfig bound;
  LossZooConfig losses;

  Json json;  // effective configuration
};

RunConfig parse_run_config(const Json& config);

// Hash of the effective configuration without the output directory.
std::string run_config_hash(const Json& config);

}  // namespace promix::cli
