#include "mpgdrive/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpgdrive/data_ingest.hpp"
#include "mpgdrive/errors.hpp"
#include "mpgdrive/experiment_config.hpp"
#include "mpgdrive/game_generators.hpp"
#include "mpgdrive/game_io.hpp"
#include "mpgdrive/merge_abstraction.hpp"

namespace mpgdrive::cli {

using nlohmann::json;

namespace {

// Raised for problems in the invocation itself; mapped to kExitUsage.
struct UsageError : Error {
  using Error::Error;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  return out;
}

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out = open_output(path);
  out << doc.dump(2) << '\n';
}

void echo_config(const std::string& artifact, const ExperimentConfig& config) {
  write_json_file(artifact + ".config.json", to_json(config));
}

ExperimentConfig resolve_config(const std::string& path) {
  return path.empty() ? config_from_json(json::object()) : load_config(path);
}

const char* lane_name(Lane l) { return l == Lane::kRamp ? "ramp" : "target"; }

// One JSON line per simulation step, then one for the final state.
void write_trace(std::ostream& out, const MergeEnvironment& env, int scenario, std::uint64_t seed,
                 const Trajectory& traj) {
  const MergeRewardSpec& r = env.reward;
  for (int t = 0; t < traj.length(); ++t) {
    const StepRecord& rec = traj.steps[t];
    json vehicles = json::array();
    for (int k = 0; k < rec.state.size(); ++k) {
      const VehicleState& s = rec.state.vehicles[k];
      const double speed_term = r.w_speed * speed_tracking_reward(s.v, r.desired_speed);
      const double comfort_term = r.w_comfort * comfort_reward(rec.accel[k]);
      vehicles.push_back({{"id", k},
                          {"x", s.x},
                          {"y", s.y},
                          {"v", s.v},
                          {"lane", lane_name(rec.state.lanes[k])},
                          {"accel", rec.accel[k]},
                          {"policy_accel", rec.policy_accel[k]},
                          {"reward", rec.rewards[k]},
                          {"speed_term", speed_term},
                          {"comfort_term", comfort_term},
                          {"interaction_term", rec.rewards[k] - speed_term - comfort_term}});
    }
    out << json{{"scenario", scenario},
                {"seed", seed},
                {"step", t},
                {"time", t * env.scenario.dt},
                {"potential", rec.potential},
                {"vehicles", vehicles}}
               .dump()
        << '\n';
  }
  json vehicles = json::array();
  for (int k = 0; k < traj.final_state.size(); ++k) {
    const VehicleState& s = traj.final_state.vehicles[k];
    vehicles.push_back({{"id", k}, {"x", s.x}, {"y", s.y}, {"v", s.v}, {"lane", lane_name(traj.final_state.lanes[k])}});
  }
  json final_line = {{"scenario", scenario},
                     {"seed", seed},
                     {"step", traj.length()},
                     {"time", traj.length() * env.scenario.dt},
                     {"final", true},
                     {"cause", traj.cause == Termination::kCollision ? "collision" : "horizon"},
                     {"vehicles", vehicles}};
  final_line["collision"] = traj.collision ? json{traj.collision->first, traj.collision->second} : json(nullptr);
  out << final_line.dump() << '\n';
}

json metrics_json(const MetricsReport& rep) {
  json per = json::array();
  for (const ScenarioMetrics& m : rep.per_scenario) {
    per.push_back({{"scenario", m.id},
                   {"seed", m.seed},
                   {"ego_collision", m.ego_collision},
                   {"other_collision", m.other_collision},
                   {"failure", m.failure},
                   {"min_distance", m.min_distance},
                   {"mean_speed", m.mean_speed},
                   {"mean_abs_accel", m.mean_abs_accel},
                   {"mean_abs_jerk", m.mean_abs_jerk},
                   {"steps", m.steps}});
  }
  return {{"scenarios", rep.scenarios},
          {"seeds", rep.seeds},
          {"collisions", rep.collisions},
          {"failures", rep.failures},
          {"collision_rate", rep.collision_rate},
          {"failure_rate", rep.failure_rate},
          {"avg_min_distance", rep.avg_min_distance},
          {"avg_ego_speed", rep.avg_ego_speed},
          {"avg_ego_speed_pooled", rep.avg_ego_speed_pooled},
          {"avg_accel_magnitude", rep.avg_accel_magnitude},
          {"avg_jerk_magnitude", rep.avg_jerk_magnitude},
          {"per_scenario", per}};
}

void print_metrics(std::ostream& out, const MetricsReport& rep) {
  out << "scenarios " << rep.scenarios << " x seeds " << rep.seeds.size() << '\n'
      << "  collisions        " << rep.collisions << " (rate " << rep.collision_rate << ")\n"
      << "  failures          " << rep.failures << " (rate " << rep.failure_rate << ")\n"
      << "  avg min distance  " << rep.avg_min_distance << " m\n"
      << "  avg ego speed     " << rep.avg_ego_speed << " m/s\n"
      << "  avg |accel|       " << rep.avg_accel_magnitude << " m/s^2\n"
      << "  avg |jerk|        " << rep.avg_jerk_magnitude << " m/s^3\n";
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::string game_file;
  std::string generate;
  double tol = 1e-8;
  int samples = 200;
  std::uint64_t seed = 0;
  std::string profiles = "local";
  std::string report;
  std::string write_game;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  if (a.game_file.empty() == a.generate.empty()) throw UsageError("verify: give exactly one of --game or --generate");
  using namespace tabular;
  TabularGame game;
  std::optional<StatePotential> phi;
  std::string potential_source;
  if (!a.game_file.empty()) {
    GameFile file = read_game_file(a.game_file);
    game = std::move(file.game);
    if (file.potential) {
      phi = std::move(file.potential);
      potential_source = "file";
    } else if (game.factored() && (game.structure.has_self() || game.structure.has_pair())) {
      phi = build_mixed_potential(game, game.structure.alpha, game.structure.beta);
      potential_source = "declared reward structure";
    } else {
      throw FormatError(a.game_file + ": no potential and no reward decomposition to build one from");
    }
  } else {
    std::mt19937_64 rng(a.seed);
    if (a.generate == "theorem3") {
      game = random_self_game(random_small_shape(rng), rng);
      phi = build_self_potential(game);
    } else if (a.generate == "theorem4") {
      game = random_pairwise_game(random_small_shape(rng), rng);
      phi = build_pairwise_potential(game);
    } else if (a.generate == "theorem5") {
      const GameShape shape = random_small_shape(rng);
      const double alpha = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
      game = random_mixed_game(shape, alpha, {}, rng);
      phi = build_mixed_potential(game, game.structure.alpha, game.structure.beta);
    } else if (a.generate == "counterexample") {
      game = zero_sum_counterexample(rng);
      phi = game.rewards[0];
    } else if (a.generate == "merge") {
      MergeAbstraction m = export_merge_abstraction();
      game = std::move(m.game);
      phi = std::move(m.potential);
    } else {
      throw UsageError("verify: unknown generator '" + a.generate +
                       "' (theorem3, theorem4, theorem5, counterexample, merge)");
    }
    potential_source = a.generate == "counterexample" ? "agent 0 reward" : "constructed";
  }
  if (!a.write_game.empty()) {
    std::ofstream gout = open_output(a.write_game);
    write_game(gout, game, phi);
  }

  VerifyOptions opt;
  opt.samples = a.samples;
  opt.tol = a.tol;
  opt.seed = a.seed;
  if (a.profiles == "global") opt.profiles = ProfileClass::kGlobal;
  else if (a.profiles != "local") throw UsageError("verify: --profiles must be local or global");
  const VerifyReport rep = verify_mpg(game, *phi, opt);

  json doc = {{"agents", game.n_agents},
              {"states", game.states},
              {"actions", game.actions},
              {"potential", potential_source},
              {"profiles", a.profiles},
              {"samples", rep.samples},
              {"tol", a.tol},
              {"max_violation", rep.max_violation},
              {"worst_sample", rep.worst_sample},
              {"is_mpg_on_samples", rep.is_mpg_on_samples}};
  if (game.factored()) doc["transition_independent"] = verify_transition_independence(game);
  out << doc.dump(2) << '\n';
  if (!a.report.empty()) write_json_file(a.report, doc);
  return rep.is_mpg_on_samples ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------
// train / train-single

struct TrainArgs {
  std::string config;
  std::string out;
  std::string log;
};

int cmd_train(const TrainArgs& a, TrainingMode mode, std::ostream& out) {
  const ExperimentConfig config = resolve_config(a.config);
  std::ofstream log;
  if (!a.log.empty()) {
    log = open_output(a.log);
    echo_config(a.log, config);
  }
  const char* mode_name = mode == TrainingMode::kPotential ? "potential" : "single_agent";
  const auto on_epoch = [&](const EpochLog& e) {
    if (!log.is_open()) return;
    json line = {{"mode", mode_name},
                 {"seed", e.seed},
                 {"epoch", e.epoch},
                 {"mean_objective", e.mean_objective},
                 {"frozen_objective", e.frozen_objective},
                 {"action_difference", e.action_difference},
                 {"grad_norm", e.grad_norm},
                 {"step_size", e.step_size},
                 {"collisions", e.collisions}};
    if (e.wall_time) line["wall_time"] = *e.wall_time;
    log << line.dump() << '\n';
  };
  const TrainResult res = train(config.env, config.trainer, mode, on_epoch);
  save_policy_bundle(a.out, res.bundle);
  echo_config(a.out, config);

  for (std::uint64_t seed : config.trainer.seeds) {
    const EpochLog* first = nullptr;
    const EpochLog* last = nullptr;
    for (const EpochLog& e : res.logs) {
      if (e.seed != seed) continue;
      if (!first) first = &e;
      last = &e;
    }
    out << "seed " << seed;
    if (first) out << "  frozen objective " << first->frozen_objective << " -> " << last->frozen_objective;
    out << '\n';
  }
  out << "wrote " << a.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval / replay

struct EvalArgs {
  std::string config;
  std::string policy;
  std::string others_policy;
  std::string ego;
  std::string others;
  std::string scenarios;
  std::string input;
  std::string report;
  std::string trace;
  bool require_safe = false;
};

std::optional<PolicyBundle> load_bundle(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_policy_bundle(path);
}

int evaluate(const EvalArgs& a, ExperimentConfig config, const std::vector<ScenarioInstance>& scenarios,
             std::ostream& out) {
  const std::optional<PolicyBundle> ego_bundle = load_bundle(a.policy);
  const std::optional<PolicyBundle> others_bundle = a.others_policy.empty() ? ego_bundle : load_bundle(a.others_policy);
  const PolicyKind ego = config.evaluation.ego;
  const PolicyKind others = config.evaluation.others;
  if (ego == PolicyKind::kNetwork && !ego_bundle) throw UsageError("a network ego needs --policy");
  if (others == PolicyKind::kNetwork && !others_bundle) throw UsageError("network surroundings need --policy");
  if (scenarios.empty()) throw UsageError("no scenarios to evaluate");

  // Evaluation seeds select bundle members; without a bundle the configured seeds are kept.
  std::vector<std::uint64_t> seeds = config.trainer.seeds;
  if (ego == PolicyKind::kNetwork) seeds = ego_bundle->seeds;
  else if (others == PolicyKind::kNetwork) seeds = others_bundle->seeds;

  std::ofstream trace;
  if (!a.trace.empty()) {
    trace = open_output(a.trace);
    echo_config(a.trace, config);
  }
  const auto on_traj = [&](const ScenarioInstance& sc, std::uint64_t seed, const Trajectory& t) {
    if (trace.is_open()) write_trace(trace, config.env, sc.id, seed, t);
  };
  const MetricsReport rep =
      run_evaluation(config.env, {ego, ego_bundle ? &*ego_bundle : nullptr},
                     {others, others_bundle ? &*others_bundle : nullptr}, scenarios, seeds, on_traj);
  out << "ego " << policy_kind_name(ego) << ", others " << policy_kind_name(others) << '\n';
  print_metrics(out, rep);
  if (!a.report.empty()) {
    json doc = metrics_json(rep);
    doc["ego"] = policy_kind_name(ego);
    doc["others"] = policy_kind_name(others);
    write_json_file(a.report, doc);
    echo_config(a.report, config);
  }
  if (a.require_safe && (rep.collisions > 0.0 || rep.failures > 0.0)) return kExitFailure;
  return kExitOk;
}

void apply_policy_overrides(const EvalArgs& a, ExperimentConfig& config) {
  if (!a.ego.empty()) config.evaluation.ego = parse_policy_kind(a.ego);
  if (!a.others.empty()) config.evaluation.others = parse_policy_kind(a.others);
  config.validate();
}

ingest::ReplaySet replay_set_from_input(const std::string& input, const ExperimentConfig& config) {
  const ingest::ParseResult parsed = ingest::parse_trajectory_file(input, config.ingest.columns);
  const ingest::ProcessResult processed = ingest::process_tracks(parsed.tracks, config.ingest.smoothing);
  return ingest::build_replay_scenarios(processed.tracks, config.replay_query());
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  ExperimentConfig config = resolve_config(a.config);
  apply_policy_overrides(a, config);
  std::vector<ScenarioInstance> scenarios;
  if (!a.scenarios.empty()) {
    scenarios = ingest::load_scenarios(a.scenarios).scenarios;
  } else if (!a.input.empty()) {
    scenarios = replay_set_from_input(a.input, config).scenarios;
  } else {
    if (config.evaluation.others == PolicyKind::kReplay) throw UsageError("replayed surroundings need --scenarios");
    if (config.evaluation.scenarios > 0) {
      scenarios = sampled_instances(config.env.scenario, config.evaluation.scenarios, config.evaluation.scenario_seed);
    }
  }
  return evaluate(a, std::move(config), scenarios, out);
}

int cmd_replay(const EvalArgs& a, std::ostream& out) {
  ExperimentConfig config = resolve_config(a.config);
  config.evaluation.others = PolicyKind::kReplay;
  if (!a.ego.empty()) config.evaluation.ego = parse_policy_kind(a.ego);
  config.validate();
  if (a.scenarios.empty() == a.input.empty()) throw UsageError("replay: give exactly one of --scenarios or --input");
  const ingest::ReplaySet set =
      a.scenarios.empty() ? replay_set_from_input(a.input, config) : ingest::load_scenarios(a.scenarios);
  for (const ingest::SkippedScenario& s : set.skipped) out << "skipped ramp vehicle " << s.ego_id << ": " << s.reason << '\n';
  return evaluate(a, std::move(config), set.scenarios, out);
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string config;
  std::string input;
  std::string tracks;
  std::string scenarios;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
  const ExperimentConfig config = resolve_config(a.config);
  const ingest::ParseResult parsed = ingest::parse_trajectory_file(a.input, config.ingest.columns);
  const ingest::ProcessResult processed = ingest::process_tracks(parsed.tracks, config.ingest.smoothing);
  out << "rows " << parsed.rows << ", malformed " << parsed.malformed_rows << ", duplicate frames "
      << parsed.duplicate_rows << '\n'
      << "tracks " << parsed.tracks.size() << ", kept " << processed.tracks.size() << ", shorter than the window "
      << processed.excluded.size() << '\n';
  ingest::save_tracks(a.tracks, processed.tracks);
  echo_config(a.tracks, config);
  if (!a.scenarios.empty()) {
    const ingest::ReplaySet set = ingest::build_replay_scenarios(processed.tracks, config.replay_query());
    for (const ingest::SkippedScenario& s : set.skipped) {
      out << "skipped ramp vehicle " << s.ego_id << ": " << s.reason << '\n';
    }
    out << "scenarios " << set.scenarios.size() << '\n';
    ingest::save_scenarios(a.scenarios, set);
    echo_config(a.scenarios, config);
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Markov potential game toolkit for highway forced merges", "mpgdrive"};
  app.require_subcommand(1);

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Check the potential-game identity on a tabular game");
  verify->add_option("--game", va.game_file, "Tabular game file")->check(CLI::ExistingFile);
  verify->add_option("--generate", va.generate, "theorem3 | theorem4 | theorem5 | counterexample | merge");
  verify->add_option("--tol", va.tol, "Violation tolerance")->capture_default_str();
  verify->add_option("--samples", va.samples, "Unilateral deviations to sample")->capture_default_str();
  verify->add_option("--seed", va.seed, "Generator and sampling seed")->capture_default_str();
  verify->add_option("--profiles", va.profiles, "local | global")->capture_default_str();
  verify->add_option("--report", va.report, "Write the report as JSON");
  verify->add_option("--write-game", va.write_game, "Write the checked game and potential");

  TrainArgs ta, sa;
  auto* train_cmd = app.add_subcommand("train", "Potential-based gradient ascent with a shared policy");
  auto* single_cmd = app.add_subcommand("train-single", "Train only the ego against IDM surroundings");
  for (auto [cmd, args] : {std::pair{train_cmd, &ta}, std::pair{single_cmd, &sa}}) {
    cmd->add_option("--config", args->config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--out", args->out, "Policy parameter file to write")->required();
    cmd->add_option("--log", args->log, "Per-epoch JSON-lines log");
  }

  EvalArgs ea, ra;
  auto* eval_cmd = app.add_subcommand("eval", "Roll out scenarios and report the merge metrics");
  auto* replay_cmd = app.add_subcommand("replay", "Evaluate the ego against recorded surrounding traffic");
  for (auto [cmd, args] : {std::pair{eval_cmd, &ea}, std::pair{replay_cmd, &ra}}) {
    cmd->add_option("--config", args->config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--policy", args->policy, "Ego policy parameters")->check(CLI::ExistingFile);
    cmd->add_option("--ego", args->ego, "network | idm | constant");
    cmd->add_option("--scenarios", args->scenarios, "Scenario manifest from `ingest`")->check(CLI::ExistingFile);
    cmd->add_option("--input", args->input, "Raw trajectory file to build replay scenarios from")
        ->check(CLI::ExistingFile);
    cmd->add_option("--report", args->report, "Metrics report (JSON)");
    cmd->add_option("--trace", args->trace, "Per-step JSON-lines trace");
    cmd->add_flag("--require-safe", args->require_safe, "Exit 1 on any ego collision or failure");
  }
  eval_cmd->add_option("--others", ea.others, "network | idm | constant | replay");
  eval_cmd->add_option("--others-policy", ea.others_policy, "Parameters for network surroundings")
      ->check(CLI::ExistingFile);

  IngestArgs ia;
  auto* ingest_cmd = app.add_subcommand("ingest", "Smooth recorded trajectories and build replay scenarios");
  ingest_cmd->add_option("--config", ia.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  ingest_cmd->add_option("--input", ia.input, "Delimited trajectory file")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--tracks", ia.tracks, "Processed tracks to write")->required();
  ingest_cmd->add_option("--scenarios", ia.scenarios, "Replay scenario manifest to write");

  std::string config_path;
  auto* config_cmd = app.add_subcommand("config", "Print the resolved configuration");
  config_cmd->add_option("--config", config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*verify) return cmd_verify(va, out);
    if (*train_cmd) return cmd_train(ta, TrainingMode::kPotential, out);
    if (*single_cmd) return cmd_train(sa, TrainingMode::kSingleAgent, out);
    if (*eval_cmd) return cmd_eval(ea, out);
    if (*replay_cmd) return cmd_replay(ra, out);
    if (*ingest_cmd) return cmd_ingest(ia, out);
    if (*config_cmd) {
      out << to_json(resolve_config(config_path)).dump(2) << '\n';
      return kExitOk;
    }
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mpgdrive::cli
