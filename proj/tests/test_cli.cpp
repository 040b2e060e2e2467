#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpgdrive/cli.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kFixture = std::string(MPGDRIVE_TEST_DATA) + "/merge_fixture.csv";

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "mpgdrive");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = mpgdrive::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("mpgdrive_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string file(const std::string& name) const { return (dir / name).string(); }

  std::string write_config(const json& doc, const std::string& name = "config.json") const {
    std::ofstream(file(name)) << doc.dump(2);
    return file(name);
  }

  // A configuration small enough to train in well under a second.
  json tiny_config() const {
    return {{"scenario", {{"leaders", 1}, {"followers", 1}, {"horizon", 1.0}}},
            {"network", {{"hidden1", 4}, {"hidden2", 4}}},
            {"trainer", {{"epochs", 3}, {"batch_size", 2}, {"frozen_batch_size", 2}, {"probe_states", 3}}},
            {"evaluation", {{"scenarios", 4}}},
            {"seeds", {0, 1}}};
  }

  fs::path dir;
};

}  // namespace

TEST_F(Cli, VerifyConstructedGamesSucceed) {
  for (const char* gen : {"theorem3", "theorem4", "theorem5", "merge"}) {
    const Outcome o = run({"verify", "--generate", gen, "--seed", "3", "--report", file("r.json")});
    EXPECT_EQ(o.code, mpgdrive::cli::kExitOk) << gen << "\n" << o.err;
    const json rep = json::parse(slurp(file("r.json")));
    EXPECT_LT(rep.at("max_violation").get<double>(), 1e-8) << gen;
    EXPECT_TRUE(rep.at("is_mpg_on_samples").get<bool>());
  }
}

TEST_F(Cli, VerifyCounterexampleFails) {
  const Outcome o = run({"verify", "--generate", "counterexample"});
  EXPECT_EQ(o.code, mpgdrive::cli::kExitFailure);
  EXPECT_GT(json::parse(o.out).at("max_violation").get<double>(), 1e-2);
}

TEST_F(Cli, VerifyWrittenGameRoundTrips) {
  ASSERT_EQ(run({"verify", "--generate", "theorem4", "--seed", "5", "--write-game", file("g.json")}).code, 0);
  const Outcome o = run({"verify", "--game", file("g.json")});
  EXPECT_EQ(o.code, mpgdrive::cli::kExitOk) << o.err;
  EXPECT_EQ(json::parse(o.out).at("potential"), "file");
}

TEST_F(Cli, VerifyInputErrorsAreUsageErrors) {
  EXPECT_EQ(run({"verify", "--game", file("missing.json")}).code, mpgdrive::cli::kExitUsage);
  EXPECT_EQ(run({"verify"}).code, mpgdrive::cli::kExitUsage);
  EXPECT_EQ(run({"verify", "--generate", "theorem9"}).code, mpgdrive::cli::kExitUsage);
  std::ofstream(file("bad.json")) << "{\"agents\": 2";
  EXPECT_EQ(run({"verify", "--game", file("bad.json")}).code, mpgdrive::cli::kExitUsage);
  EXPECT_EQ(run({"verify", "--generate", "theorem3", "--profiles", "sideways"}).code, mpgdrive::cli::kExitUsage);
}

TEST_F(Cli, NoCommandAndHelp) {
  EXPECT_EQ(run({}).code, mpgdrive::cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, mpgdrive::cli::kExitOk);
  EXPECT_EQ(run({"frobnicate"}).code, mpgdrive::cli::kExitUsage);
}

TEST_F(Cli, UnknownConfigKeysAreReported) {
  json doc = tiny_config();
  doc["trainer"]["epochz"] = 4;
  doc["colour"] = "blue";
  const Outcome o = run({"config", "--config", write_config(doc)});
  EXPECT_EQ(o.code, mpgdrive::cli::kExitUsage);
  EXPECT_NE(o.err.find("trainer.epochz"), std::string::npos) << o.err;
  EXPECT_NE(o.err.find("colour"), std::string::npos) << o.err;
}

TEST_F(Cli, WrongConfigTypesAreReported) {
  json doc = tiny_config();
  doc["scenario"]["horizon"] = "long";
  const Outcome o = run({"train", "--config", write_config(doc), "--out", file("p.json")});
  EXPECT_EQ(o.code, mpgdrive::cli::kExitUsage);
  EXPECT_NE(o.err.find("scenario.horizon"), std::string::npos) << o.err;
  EXPECT_FALSE(fs::exists(file("p.json")));
}

TEST_F(Cli, InvalidConfigValuesAreUsageErrors) {
  json doc = tiny_config();
  doc["scenario"]["gamma"] = 1.0;
  EXPECT_EQ(run({"config", "--config", write_config(doc)}).code, mpgdrive::cli::kExitUsage);
  doc = tiny_config();
  doc["evaluation"]["ego"] = "replay";
  EXPECT_EQ(run({"config", "--config", write_config(doc)}).code, mpgdrive::cli::kExitUsage);
}

TEST_F(Cli, ConfigPrintsResolvedDefaults) {
  const Outcome o = run({"config"});
  ASSERT_EQ(o.code, 0);
  const json doc = json::parse(o.out);
  EXPECT_EQ(doc.at("scenario").at("leaders"), 4);
  EXPECT_EQ(doc.at("scenario").at("gamma"), 0.99);
  EXPECT_EQ(doc.at("idm").at("desired_speed"), 15.0);
  EXPECT_EQ(doc.at("seeds").size(), 5u);
  // The printed document is itself a valid config.
  const Outcome again = run({"config", "--config", write_config(doc)});
  EXPECT_EQ(again.code, 0);
  EXPECT_EQ(json::parse(again.out), doc);
}

TEST_F(Cli, EvalWithoutScenariosIsUsageError) {
  json doc = tiny_config();
  doc["evaluation"]["scenarios"] = 0;
  const Outcome o = run({"eval", "--config", write_config(doc), "--ego", "idm", "--others", "idm"});
  EXPECT_EQ(o.code, mpgdrive::cli::kExitUsage);
  EXPECT_EQ(run({"eval", "--ego", "network", "--others", "idm"}).code, mpgdrive::cli::kExitUsage);
  EXPECT_EQ(run({"eval", "--ego", "idm", "--others", "replay"}).code, mpgdrive::cli::kExitUsage);
}

TEST_F(Cli, TrainLogsAreByteIdentical) {
  const std::string cfg = write_config(tiny_config());
  ASSERT_EQ(run({"train", "--config", cfg, "--out", file("a.json"), "--log", file("a.jsonl")}).code, 0);
  ASSERT_EQ(run({"train", "--config", cfg, "--out", file("b.json"), "--log", file("b.jsonl")}).code, 0);
  const std::string a = slurp(file("a.jsonl"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(file("b.jsonl")));
  EXPECT_EQ(slurp(file("a.json")), slurp(file("b.json")));

  std::istringstream lines(a);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const json e = json::parse(line);
    for (const char* key : {"seed", "epoch", "mean_objective", "frozen_objective", "action_difference"}) {
      EXPECT_TRUE(e.contains(key)) << key;
    }
    EXPECT_FALSE(e.contains("wall_time"));
    ++count;
  }
  EXPECT_EQ(count, 6);
  EXPECT_TRUE(fs::exists(file("a.jsonl.config.json")));
}

TEST_F(Cli, TrainSingleAndEvalAreReproducible) {
  const std::string cfg = write_config(tiny_config());
  ASSERT_EQ(run({"train-single", "--config", cfg, "--out", file("p.json"), "--log", file("p.jsonl")}).code, 0);
  EXPECT_NE(slurp(file("p.jsonl")).find("single_agent"), std::string::npos);
  for (const char* tag : {"1", "2"}) {
    const Outcome o = run({"eval", "--config", cfg, "--policy", file("p.json"), "--others", "idm", "--report",
                           file(std::string("r") + tag + ".json"), "--trace", file(std::string("t") + tag + ".jsonl")});
    ASSERT_EQ(o.code, 0) << o.err;
  }
  EXPECT_EQ(slurp(file("r1.json")), slurp(file("r2.json")));
  EXPECT_EQ(slurp(file("t1.jsonl")), slurp(file("t2.jsonl")));

  const json rep = json::parse(slurp(file("r1.json")));
  for (const char* key : {"collision_rate", "failure_rate", "avg_min_distance", "avg_ego_speed", "avg_accel_magnitude",
                          "avg_jerk_magnitude"}) {
    EXPECT_TRUE(rep.contains(key)) << key;
  }
  EXPECT_EQ(rep.at("scenarios"), 4);
  EXPECT_EQ(rep.at("seeds"), json({0, 1}));
  EXPECT_EQ(rep.at("per_scenario").size(), 8u);
}

TEST_F(Cli, RequireSafeFlagsCollisions) {
  json doc = tiny_config();
  doc["scenario"]["horizon"] = 20.0;
  doc["scenario"]["speed"] = {0.0, 30.0};
  doc["scenario"]["min_ttc"] = 0.1;
  doc["scenario"]["min_headway"] = 5.0;
  doc["scenario"]["slot_length"] = 10.0;
  doc["evaluation"]["scenarios"] = 30;
  const std::string cfg = write_config(doc);
  const Outcome loose = run({"eval", "--config", cfg, "--ego", "constant", "--others", "constant", "--report", file("r.json")});
  ASSERT_EQ(loose.code, 0) << loose.err;
  ASSERT_GT(json::parse(slurp(file("r.json"))).at("collisions").get<double>(), 0.0);
  EXPECT_EQ(run({"eval", "--config", cfg, "--ego", "constant", "--others", "constant", "--require-safe"}).code,
            mpgdrive::cli::kExitFailure);
}

TEST_F(Cli, IngestAndReplayFixture) {
  const Outcome ing = run({"ingest", "--input", kFixture, "--tracks", file("tracks.json"), "--scenarios", file("sc.json")});
  ASSERT_EQ(ing.code, 0) << ing.err;
  EXPECT_NE(ing.out.find("rows 731, malformed 1"), std::string::npos) << ing.out;
  EXPECT_NE(ing.out.find("kept 9, shorter than the window 1"), std::string::npos) << ing.out;
  EXPECT_NE(ing.out.find("scenarios 1"), std::string::npos) << ing.out;

  json doc;
  doc["scenario"] = {{"horizon", 6.0}};
  doc["seeds"] = {0};
  const std::string cfg = write_config(doc);
  const Outcome rep =
      run({"replay", "--config", cfg, "--scenarios", file("sc.json"), "--ego", "idm", "--trace", file("trace.jsonl")});
  ASSERT_EQ(rep.code, 0) << rep.err;
  std::ifstream trace(file("trace.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(trace, line)) {
    EXPECT_EQ(json::parse(line).at("vehicles").size(), 9u);
    ++lines;
  }
  EXPECT_GT(lines, 1);

  const Outcome direct = run({"replay", "--config", cfg, "--input", kFixture, "--ego", "idm"});
  EXPECT_EQ(direct.code, 0) << direct.err;
  EXPECT_EQ(run({"replay", "--config", cfg, "--ego", "idm"}).code, mpgdrive::cli::kExitUsage);
}

TEST_F(Cli, IngestMissingColumnIsUsageError) {
  std::ofstream(file("bad.csv")) << "Vehicle_ID,Frame_ID,Local_X\n1,1,0\n";
  EXPECT_EQ(run({"ingest", "--input", file("bad.csv"), "--tracks", file("t.json")}).code, mpgdrive::cli::kExitUsage);
}
