#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "oracles.hpp"
#include "skytalk/harness.hpp"

using namespace skytalk;
namespace fs = std::filesystem;

namespace {

TrialResult row(std::string env, Placement p, double base, double prop, bool bd = false, bool pd = false) {
  TrialResult t;
  t.environment = std::move(env);
  t.placement = p;
  t.baseline_score = base;
  t.proposed_score = prop;
  t.baseline_detected = bd;
  t.proposed_detected = pd;
  return t;
}

Scene ahead_scene(bool hide) {
  Scene s;
  s.name = "ahead";
  s.bounds = {{-50, -50, 0}, {50, 50, 40}};
  s.spawn = {{0, 0, 10}, 0.0};
  s.camera = {90, 100};
  SceneObject fire;
  fire.id = "fire";
  fire.label = "tree";
  fire.attributes = {"burning"};
  fire.center = {5, 0, 2};
  fire.extent = {1, 1, 2};
  fire.is_anomaly = true;
  s.objects.push_back(fire);
  if (hide) {
    SceneObject wall;
    wall.id = "wall";
    wall.label = "wall";
    wall.center = {2.5, 0, 10};
    wall.extent = {0.5, 10, 10};
    wall.is_occluder = true;
    s.objects.push_back(wall);
  }
  return s;
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Aggregate, SingleTrial) {
  const auto report = aggregate({row("lake", Placement::None, 0.25, 0.75)});
  ASSERT_EQ(report.environments.size(), 1u);
  EXPECT_DOUBLE_EQ(report.environments[0].baseline_score, 0.25);
  EXPECT_DOUBLE_EQ(report.environments[0].proposed_score, 0.75);
  EXPECT_EQ(report.environments[0].detection_trials, 0);
}

TEST(Aggregate, MeansAndSets) {
  std::vector<TrialResult> rows{row("lake", Placement::None, 0.2, 0.2), row("lake", Placement::None, 0.4, 0.4),
                                row("lake", Placement::None, 0.6, 0.6),
                                row("lake", Placement::Near, 0.0, 0.0, false, true),
                                row("lake", Placement::Far, 0.0, 0.0, true, true),
                                row("snow", Placement::Far, 0.3, 0.9, false, false)};
  TrialResult broken = row("lake", Placement::Near, 1.0, 1.0, true, true);
  broken.failed = true;
  rows.push_back(broken);
  const auto report = aggregate(rows);
  ASSERT_EQ(report.environments.size(), 2u);
  EXPECT_EQ(report.failed_trials, 1);
  const auto* lake = report.find("lake");
  ASSERT_TRUE(lake);
  EXPECT_EQ(lake->score_trials, 3);
  EXPECT_NEAR(lake->baseline_score, 0.4, 1e-12);
  EXPECT_EQ(lake->detection_trials, 2);
  EXPECT_DOUBLE_EQ(lake->baseline_detection, 0.5);
  EXPECT_DOUBLE_EQ(lake->proposed_detection, 1.0);
  // No anomaly-free rows: scores fall back to every trial.
  const auto* snow = report.find("snow");
  ASSERT_TRUE(snow);
  EXPECT_DOUBLE_EQ(snow->proposed_score, 0.9);
  EXPECT_EQ(report.environments[0].environment, "lake");
  EXPECT_EQ(report.find("mars"), nullptr);
}

TEST(Baseline, SeesAnomalyAheadAtZeroNoise) {
  for (bool hide : {false, true}) {
    auto scene = std::make_shared<const Scene>(ahead_scene(hide));
    OraclePerception oracle(NoiseModel::none());
    oracle.add_scene(scene);
    const auto b = eval_baseline(*scene, oracle, 0);
    EXPECT_EQ(b.detected, !hide) << b.caption;
    if (!hide) {
      EXPECT_DOUBLE_EQ(b.score, 1.0);
      EXPECT_EQ(b.caption, "a burning tree");
    }
  }
}

TEST(Baseline, KeyedStreamIsDisjointFromEpisode) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (std::uint64_t q = 0; q < 40; ++q) EXPECT_NE(baseline_sample_key(seed), query_sample_key(seed, q));
  }
}

TEST(Matrix, DefaultLoads) {
  const auto m = load_matrix_file(oracle::data_path("matrix/default.json"));
  EXPECT_EQ(m.environments.size(), 4u);
  EXPECT_EQ(m.placements.size(), 4u);
  EXPECT_EQ(m.seeds, 10);
  for (const auto& env : m.environments) {
    for (const auto& [placement, path] : env.scenes) EXPECT_TRUE(fs::exists(path)) << path;
  }
}

TEST(Matrix, Rejections) {
  const std::string scenes = R"("scenes": {"none": "a.json"})";
  EXPECT_NO_THROW(load_matrix_text(R"({"environments": [{"name": "x", )" + scenes + R"(}], "placements": ["none"]})"));
  const std::vector<std::string> bad{
      "{",
      R"({"environments": []})",
      R"({"environments": [{"name": "x", )" + scenes + R"(}]})",  // missing near/far/occluded
      R"({"environments": [{"name": "x", )" + scenes + R"(}], "placements": ["none"], "seeds": 0})",
      R"({"environments": [{"name": "x", )" + scenes + R"(}], "placements": ["sideways"]})",
      R"({"environments": [{"name": "x", )" + scenes + R"(}], "placements": ["none"], "bogus": 1})",
      R"({"environments": [{"name": "x", )" + scenes + R"(}, {"name": "x", )" + scenes +
          R"(}], "placements": ["none"]})",
      R"({"environments": [{"name": "x", )" + scenes +
          R"(}], "placements": ["none"], "noise": {"miss_base": 2}})",
      R"({"environments": [{"name": "x", )" + scenes +
          R"(}], "placements": ["none"], "episode": {"validation_samples": 2}})",
  };
  for (const auto& text : bad) EXPECT_THROW(load_matrix_text(text), MatrixError) << text;
  EXPECT_THROW(load_matrix_file("/nonexistent/matrix.json"), MatrixError);
}

TEST(Matrix, RowsCsvAndRecompute) {
  auto m = load_matrix_file(oracle::data_path("matrix/default.json"));
  RunOptions options;
  options.seeds = 2;
  const auto trials = run_matrix(m, options);
  ASSERT_EQ(trials.size(), 4u * 4u * 2u);
  const auto report = aggregate(trials);
  EXPECT_TRUE(check_report(report, true).empty());

  // Independent recompute from the CSV text.
  const auto rows = read_csv(report_csv(report));
  ASSERT_EQ(rows.size(), trials.size() + 1);
  EXPECT_EQ(rows[0][0], "environment");
  std::map<std::string, std::array<double, 6>> sums;  // base, prop, nscore, bdet, pdet, ndet
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    ASSERT_EQ(r.size(), 11u);
    auto& s = sums[r[0]];
    if (r[1] == "none") {
      s[0] += std::stod(r[3]);
      s[1] += std::stod(r[4]);
      s[2] += 1;
    } else {
      s[3] += std::stod(r[5]);
      s[4] += std::stod(r[6]);
      s[5] += 1;
    }
  }
  for (const auto& [env, s] : sums) {
    const auto* e = report.find(env);
    ASSERT_TRUE(e);
    EXPECT_NEAR(e->baseline_score, s[0] / s[2], 1e-6);
    EXPECT_NEAR(e->proposed_score, s[1] / s[2], 1e-6);
    EXPECT_NEAR(e->baseline_detection, s[3] / s[5], 1e-12);
    EXPECT_NEAR(e->proposed_detection, s[4] / s[5], 1e-12);
    EXPECT_EQ(e->detection_trials, 6);
  }
}

TEST(Matrix, ParallelMatchesSerial) {
  auto m = load_matrix_file(oracle::data_path("matrix/default.json"));
  RunOptions serial;
  serial.seeds = 2;
  RunOptions parallel = serial;
  parallel.parallel = 3;
  EXPECT_EQ(report_csv(aggregate(run_matrix(m, serial))), report_csv(aggregate(run_matrix(m, parallel))));
}

TEST(Report, WritesArtifacts) {
  auto m = load_matrix_file(oracle::data_path("matrix/default.json"));
  RunOptions options;
  options.seeds = 1;
  const auto report = aggregate(run_matrix(m, options));
  const fs::path out = fs::temp_directory_path() / "skytalk_harness_test";
  fs::remove_all(out);
  write_report(report, out);
  EXPECT_TRUE(fs::exists(out / "report.csv"));
  EXPECT_TRUE(fs::exists(out / "report.json"));
  for (const auto& t : report.trials) {
    EXPECT_TRUE(fs::exists(out / "transcripts" / (t.episode_id() + ".jsonl")));
    for (const auto& pair : t.explanation_pairs) {
      std::ifstream pgm(out / "salience" / (t.episode_id() + "_" + std::to_string(pair.step) + ".pgm"));
      std::string magic;
      pgm >> magic;
      EXPECT_EQ(magic, "P2");
    }
  }
  fs::remove_all(out);
}

TEST(Report, CheckerFlagsBrokenArithmetic) {
  auto t = row("lake", Placement::None, 0.5, 0.5);
  t.validation_positions = 2;
  t.validation_targets = 2;
  t.validation_samples = 3;
  t.validation_queries = 11;
  auto report = aggregate({t});
  EXPECT_EQ(check_report(report, true).size(), 1u);
  report.environments[0].proposed_score = 0.9;
  EXPECT_EQ(check_report(report, true).size(), 2u);
}
