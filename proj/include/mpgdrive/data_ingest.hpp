#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mpgdrive/evaluation.hpp"

namespace mpgdrive::ingest {

inline constexpr double kFeetToMeters = 0.3048;
inline constexpr int kOffRoad = -1;

/// Names of the columns to read from a delimited trajectory file.
struct ColumnMap {
  std::string vehicle_id = "Vehicle_ID";
  std::string frame = "Frame_ID";
  std::string x = "Local_Y";  // longitudinal
  std::string y = "Local_X";  // lateral
  char delimiter = ',';
  bool feet = false;
  double frame_rate = 10.0;  // Hz
};

/// One vehicle's samples, sorted by frame.
struct RawTrack {
  std::int64_t id = 0;
  std::vector<std::int64_t> frames;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> t;  // frame / frame_rate
  double frame_rate = 10.0;

  std::size_t size() const { return frames.size(); }
};

struct ParseResult {
  std::vector<RawTrack> tracks;  // ordered by vehicle id
  long rows = 0;
  long malformed_rows = 0;
  /// Frames seen twice for one vehicle; the first occurrence is kept.
  long duplicate_rows = 0;
};

/// Reads a delimited file with a header row. Throws FormatError when a mapped
/// column is missing or the file cannot be opened.
ParseResult parse_trajectory_file(const std::string& path, const ColumnMap& columns = {});
ParseResult parse_trajectory_text(const std::string& text, const ColumnMap& columns = {});

/// Least-squares weights that evaluate, at sample `at` of an n-point window,
/// the degree-`order` polynomial fitted to the window.
std::vector<double> savitzky_golay_weights(int n, int order, int at);

/// Local polynomial smoothing with a symmetric window. Near the ends the fit
/// uses the truncated window (widened inward if it has fewer than order + 1
/// samples). Returns nullopt when the series is shorter than the window.
std::optional<std::vector<double>> savitzky_golay(const std::vector<double>& series, int window, int order);

/// Central differences inside, one-sided differences at both ends.
std::vector<double> differentiate(const std::vector<double>& positions, double dt);

/// Lane k covers (b_k, b_{k+1}], lane 0 also includes b_0, so a point on a
/// shared boundary belongs to the lower lane. Outside every lane: kOffRoad.
std::vector<int> reassign_lanes(const std::vector<double>& lateral, const std::vector<double>& boundaries);

struct SmoothingConfig {
  int window = 21;
  int order = 3;
  std::vector<double> lane_boundaries;
};

struct SmoothTrack {
  std::int64_t id = 0;
  std::vector<std::int64_t> frames;
  std::vector<double> t;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> v;  // speed from the differentiated smoothed positions
  std::vector<int> lanes;

  std::size_t size() const { return frames.size(); }
};

struct ProcessResult {
  std::vector<SmoothTrack> tracks;
  std::vector<std::int64_t> excluded;  // shorter than the window
};

/// Smooths, recomputes speeds and reassigns lanes. Tracks with gaps in their
/// frame sequence are processed as if contiguous.
ProcessResult process_tracks(const std::vector<RawTrack>& raw, const SmoothingConfig& config);

struct ReplayQuery {
  int ramp_lane = 0;
  int target_lane = 1;
  int leaders = 4;
  int followers = 4;
  double dt = 0.1;
  int steps = 300;
  /// Ramp vehicles first seen at or beyond this position are not used as egos.
  double conflict_x = 180.0;
  RoadGeometry road;
};

struct SkippedScenario {
  std::int64_t ego_id = 0;
  std::string reason;
};

struct ReplaySet {
  std::vector<ScenarioInstance> scenarios;
  std::vector<std::int64_t> ego_ids;
  /// The recorded motion of each scenario's ego, on the same time grid.
  std::vector<std::vector<VehicleState>> ego_recordings;
  std::vector<SkippedScenario> skipped;
};

/// One scenario per recorded ramp vehicle: the ego starts at that vehicle's
/// first processed sample, and the nearest target-lane vehicles ahead and
/// behind at that instant replay their recordings, resampled every dt.
ReplaySet build_replay_scenarios(const std::vector<SmoothTrack>& tracks, const ReplayQuery& query);

void save_tracks(const std::string& path, const std::vector<SmoothTrack>& tracks);
std::vector<SmoothTrack> load_tracks(const std::string& path);

void save_scenarios(const std::string& path, const ReplaySet& set);
ReplaySet load_scenarios(const std::string& path);

}  // namespace mpgdrive::ingest
