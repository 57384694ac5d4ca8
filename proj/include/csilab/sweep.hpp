#pragma once

#include <string>
#include <vector>

#include "csilab/channel.hpp"
#include "csilab/training.hpp"
#include "csilab/types.hpp"

namespace csilab::harness {

struct ChainPlan {
  int t = 5;
  double cr_t1 = 0.5;
  std::vector<std::string> plan{"ista"};
};

/// One experiment sweep: grid over pattern (dr_f, d), compression ratio and
/// phase-augmentation factor; modes "p2d" (estimator only), "codec" (single
/// feedback codec at t = 1) and "chain" (differential encoding over t slots,
/// grid cr acting as cr_rest).
struct ExperimentConfig {
  channel::ChannelConfig chan;
  std::size_t n_samples = 500;
  std::size_t n_timeslots = 1;
  double train_fraction = 0.75;
  std::string dataset_path; // load instead of generating when non-empty

  std::vector<double> dr_f{0.125};
  std::vector<int> d{1};
  double delta = 1e-3;
  std::vector<double> cr{0.25};
  std::vector<int> n_phase{1};

  std::string mode = "p2d"; // p2d | codec | chain
  std::string codec_kind = "ista";
  int k = 9;
  Index hidden = 0;
  ChainPlan chain;
  training::TrainConfig train;

  std::string output_dir;
  bool stable_timing = false; // write wall_seconds as 0 for bit-exact reruns
  int workers = 1;

  void validate() const;
};

ExperimentConfig config_from_json_file(const std::string& path);
ExperimentConfig config_from_json_string(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

/// Applies a named profile to the channel/sample-count defaults.
/// "desk" keeps runs laptop-sized; "paper" is the full-scale setup.
void apply_profile(ExperimentConfig& cfg, const std::string& profile);

/// Re-seeds channel and training deterministically from one master seed.
void apply_master_seed(ExperimentConfig& cfg, std::uint64_t seed);

struct MetricRow {
  double dr_f = 1.0;
  int d = 1;
  double cr = 1.0;
  int timeslot = 1;
  std::string codec = "p2d";
  double nmse_db = 0.0;
  double wall_seconds = 0.0;
};

void write_csv(const std::vector<MetricRow>& rows, const std::string& path);
std::vector<MetricRow> read_csv(const std::string& path);

/// Runs every grid point on a bounded worker pool, merging rows in grid
/// order, then writes results.csv, the SVG charts and a manifest into
/// cfg.output_dir. Re-running with an identical config reproduces
/// results.csv bit-exactly (enable stable_timing so the timing column is
/// deterministic too).
std::vector<MetricRow> run_sweep(const ExperimentConfig& cfg);

/// Chart emission used by run_sweep and the `plot` CLI subcommand.
void write_charts(const std::vector<MetricRow>& rows, const std::string& dir);

} // namespace csilab::harness
