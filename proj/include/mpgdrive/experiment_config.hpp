#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpgdrive/data_ingest.hpp"
#include "mpgdrive/evaluation.hpp"
#include "mpgdrive/training.hpp"

namespace mpgdrive {

struct EvaluationSettings {
  int scenarios = 50;
  std::uint64_t scenario_seed = 12345;
  PolicyKind ego = PolicyKind::kNetwork;
  PolicyKind others = PolicyKind::kNetwork;
};

struct IngestSettings {
  ingest::ColumnMap columns;
  ingest::SmoothingConfig smoothing{21, 3, {0.0, 3.7, 7.4}};
  int ramp_lane = 0;
  int target_lane = 1;
  /// Conflict point of the recorded site, in the file's longitudinal frame.
  double conflict_x = 180.0;
};

/// Everything the command-line tool reads from its configuration file.
struct ExperimentConfig {
  MergeEnvironment env;
  TrainerConfig trainer;
  EvaluationSettings evaluation;
  IngestSettings ingest;

  /// Replay query for the ingest settings and the scenario's player set.
  ingest::ReplayQuery replay_query() const;
  void validate() const;
};

/// Every key this tool understands, with its resolved value.
nlohmann::json to_json(const ExperimentConfig& config);

/// Overlays `doc` on the defaults. Throws ConfigError naming every unknown key
/// and every value of the wrong type.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

const char* policy_kind_name(PolicyKind kind);
PolicyKind parse_policy_kind(const std::string& name);

}  // namespace mpgdrive
