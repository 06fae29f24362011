#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtrl/bounds.hpp"
#include "mtrl/datagen.hpp"
#include "mtrl/erm.hpp"

namespace mtrl::app {

inline constexpr int kSchemaVersion = 1;

struct PopulationConfig {
  datagen::LinearInstanceOptions instance;
  std::optional<std::uint64_t> instance_seed;  // fixed instance across replicates when set
};

struct SampleConfig {
  std::size_t n = 100;
  std::size_t n_prime = 100;
  std::optional<std::size_t> burn_in;
};

enum class FitClass { Linear, Tanh };

struct FitConfig {
  FitClass cls = FitClass::Linear;
  erm::LinearFitOptions linear;
  erm::ParametricFitOptions parametric;
};

enum class SweepAxis { T, N, NPrime };

const char* to_string(SweepAxis axis) noexcept;

struct SweepConfig {
  SweepAxis axis = SweepAxis::T;
  std::vector<std::size_t> grid;
  std::size_t replicates = 1;
};

struct DiagnosticsConfig {
  std::size_t mc_samples = 200000;
};

/// Bound configuration plus the problem constants (mu_x, C_Z, ...) that feed
/// the transfer bound; unset constants default to 1.
struct BoundsSection {
  bounds::BoundConfig config;
  bounds::TransferInputs inputs;
};

struct MixcheckConfig {
  std::optional<Matrix> markov_p;
  std::size_t max_lag = 10;
  std::optional<Matrix> lds_a;
  std::size_t mc_samples = 100000;
  std::optional<std::size_t> block_m;  // block-length selection for the LDS profile
  double delta = 0.1;
  bool smallball = false;
  std::size_t smallball_m = 64;
  std::size_t smallball_replicates = 5000;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  PopulationConfig population;
  SampleConfig samples;
  FitConfig fit;
  SweepConfig sweep;
  DiagnosticsConfig diagnostics;
  BoundsSection bounds;
  MixcheckConfig mixcheck;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  unsigned threads = 1;
  nlohmann::json source;  // the parsed document, for hashing
};

/// Parses and validates a config document. Unknown keys, a missing or
/// mismatched schema_version, and out-of-range values throw InvalidArgument.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

/// FNV-1a 64 of the canonical (sorted-key) dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

}  // namespace mtrl::app
