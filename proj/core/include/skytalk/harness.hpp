#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skytalk/backends.hpp"
#include "skytalk/engine.hpp"
#include "skytalk/perception.hpp"
#include "skytalk/scene.hpp"

namespace skytalk {

/// Where the anomaly sits relative to the spawn view. None is the
/// anomaly-free variant of an environment.
enum class Placement { None, Near, Far, Occluded };
std::string_view placement_name(Placement placement);
Placement parse_placement(std::string_view name);

struct MatrixEnvironment {
  std::string name;
  std::map<Placement, std::filesystem::path> scenes;
};

struct ExperimentMatrix {
  std::vector<MatrixEnvironment> environments;
  std::vector<Placement> placements{Placement::None, Placement::Near, Placement::Far, Placement::Occluded};
  int seeds = 10;
  std::uint64_t first_seed = 0;
  NoiseModel noise{};
  EpisodeConfig episode{};
  PolicyConfig policy{};
};

class MatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scene paths are resolved relative to the matrix file.
ExperimentMatrix load_matrix_file(const std::filesystem::path& path);
ExperimentMatrix load_matrix_text(std::string_view text, const std::filesystem::path& base_dir = {});

struct BaselineResult {
  double score = 0.0;
  bool detected = false;
  std::string caption;
};

/// One "What do you see?" at spawn. Noise is keyed by baseline_sample_key(seed),
/// a stream disjoint from the episode's.
BaselineResult eval_baseline(const Scene& scene, PerceptionBackend& perception, std::uint64_t seed,
                             const std::vector<std::string>& anomaly_lexicon = default_anomaly_lexicon());
std::uint64_t baseline_sample_key(std::uint64_t seed);

struct TrialResult {
  std::string environment;
  Placement placement = Placement::None;
  std::uint64_t seed = 0;
  double baseline_score = 0.0;
  double proposed_score = 0.0;
  bool baseline_detected = false;
  bool proposed_detected = false;
  int active_steps = 0;
  int total_queries = 0;
  int validation_queries = 0;
  int validation_positions = 0;
  int validation_targets = 0;
  int validation_samples = 0;

  bool failed = false;
  std::string failure;

  std::string final_description;
  std::string final_caption;
  std::vector<TurnRecord> transcript;
  std::vector<ExplanationPair> explanation_pairs;

  std::string episode_id() const;
};

struct TrialBackends {
  ControllerBackend& controller;
  PerceptionBackend& perception;
};

TrialResult run_trial(const Scene& scene, const std::string& environment, Placement placement, std::uint64_t seed,
                      const EpisodeConfig& config, TrialBackends backends);

struct PlacementSummary {
  Placement placement = Placement::None;
  int trials = 0;
  double baseline_detection = 0.0;
  double proposed_detection = 0.0;
  double mean_active_steps = 0.0;
};

struct EnvironmentSummary {
  std::string environment;
  int score_trials = 0;
  double baseline_score = 0.0;
  double proposed_score = 0.0;
  int detection_trials = 0;
  double baseline_detection = 0.0;
  double proposed_detection = 0.0;
  std::vector<PlacementSummary> placements;
};

struct ExperimentReport {
  std::vector<EnvironmentSummary> environments;  // in first-appearance order
  std::vector<TrialResult> trials;
  int failed_trials = 0;

  const EnvironmentSummary* find(std::string_view environment) const;
};

/// Scores average the anomaly-free trials of an environment (all trials when
/// it has none); detection averages the trials with an anomaly. Failed trials
/// are left out of every mean.
ExperimentReport aggregate(std::vector<TrialResult> trials);

struct RunOptions {
  int parallel = 1;
  /// "scripted" or "remote:<base url>".
  std::string backend = "scripted";
  std::optional<int> seeds;
  /// Called once per finished trial, from worker threads.
  std::function<void(const TrialResult&)> on_trial;
};

/// Runs every (environment, placement, seed) cell. Results come back in
/// matrix order whatever the worker count.
std::vector<TrialResult> run_matrix(const ExperimentMatrix& matrix, const RunOptions& options = {});

std::string report_csv(const ExperimentReport& report);
std::string report_json(const ExperimentReport& report);

/// report.csv, report.json, transcripts/<episode>.jsonl and
/// salience/<episode>_<step>.pgm under `out_dir`.
void write_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

/// Every violated invariant as one line; empty when the report is sound.
std::vector<std::string> check_report(const ExperimentReport& report, bool scripted);

}  // namespace skytalk
