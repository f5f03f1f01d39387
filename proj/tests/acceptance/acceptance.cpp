// Runs every primary acceptance criterion and prints one PASS/FAIL line each.
// Exits nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fakes.hpp"
#include "generators.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "skytalk/engine.hpp"
#include "skytalk/grammar.hpp"
#include "skytalk/harness.hpp"
#include "skytalk/protocol.hpp"

using namespace skytalk;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentMatrix default_matrix() { return load_matrix_file(oracle::data_path("matrix/default.json")); }

struct MatrixRun {
  ExperimentReport report;
  double seconds = 0.0;
};

MatrixRun run_default(const ExperimentMatrix& m, const RunOptions& options = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  auto trials = run_matrix(m, options);
  const auto t1 = std::chrono::steady_clock::now();
  return {aggregate(std::move(trials)), std::chrono::duration<double>(t1 - t0).count()};
}

// Per-environment means computed straight from the trial rows.
struct Means {
  double base_score = 0, prop_score = 0, base_det = 0, prop_det = 0;
  int n_score = 0, n_det = 0;
};

std::map<std::string, Means> means_by_env(const std::vector<TrialResult>& trials, bool placements_only = false) {
  std::map<std::string, Means> out;
  for (const auto& t : trials) {
    auto& m = out[t.environment];
    if (t.placement == Placement::None && !placements_only) {
      m.base_score += t.baseline_score;
      m.prop_score += t.proposed_score;
      ++m.n_score;
    } else if (t.placement != Placement::None) {
      m.base_det += t.baseline_detected;
      m.prop_det += t.proposed_detected;
      ++m.n_det;
    }
  }
  for (auto& [_, m] : out) {
    if (m.n_score) m.base_score /= m.n_score, m.prop_score /= m.n_score;
    if (m.n_det) m.base_det /= m.n_det, m.prop_det /= m.n_det;
  }
  return out;
}

Outcome score_direction(const MatrixRun& run) {
  Outcome o{true, ""};
  int failed = 0;
  for (const auto& t : run.report.trials) failed += t.failed;
  if (failed) o.pass = false;
  for (const auto& [env, m] : means_by_env(run.report.trials)) {
    if (m.n_score != 10 || !(m.prop_score > m.base_score)) o.pass = false;
    o.detail += env + " " + fmt2(m.base_score) + "->" + fmt2(m.prop_score) + " ";
  }
  if (!(run.seconds < 60.0)) o.pass = false;
  o.detail += "runtime " + fmt2(run.seconds) + "s failed_trials " + std::to_string(failed);
  return o;
}

Outcome detection_direction(const MatrixRun& run, const ExperimentMatrix& matrix) {
  Outcome o{true, ""};
  for (const auto& [env, m] : means_by_env(run.report.trials)) {
    if (m.n_det != 30 || !(m.prop_det >= m.base_det + 0.2 - 1e-9)) o.pass = false;
    o.detail += env + " " + fmt2(m.base_det) + "->" + fmt2(m.prop_det) + " ";
  }

  // Occluded placement with hallucination switched off.
  ExperimentMatrix occluded = matrix;
  occluded.noise.hallucination_rate = 0.0;
  occluded.placements = {Placement::Occluded};
  const auto trials = run_matrix(occluded);
  o.detail += "| occluded h=0:";
  for (const auto& [env, m] : means_by_env(trials, true)) {
    if (m.n_det != 10 || m.base_det != 0.0 || !(m.prop_det >= 0.8)) o.pass = false;
    o.detail += " " + env + " " + fmt2(m.base_det) + "->" + fmt2(m.prop_det);
  }
  return o;
}

Outcome early_stop(const MatrixRun& run) {
  std::map<std::pair<std::string, std::uint64_t>, int> clean;
  for (const auto& t : run.report.trials) {
    if (t.placement == Placement::None) clean[{t.environment, t.seed}] = t.active_steps;
  }
  int pairs = 0, lower = 0;
  for (const auto& t : run.report.trials) {
    if (t.placement != Placement::Near || t.failed) continue;
    auto it = clean.find({t.environment, t.seed});
    if (it == clean.end()) continue;
    ++pairs;
    lower += t.active_steps < it->second;
  }
  return {pairs == 40 && lower == 40, std::to_string(lower) + "/" + std::to_string(pairs) + " near trials stopped early"};
}

Outcome determinism(const ExperimentMatrix& m, const MatrixRun& first) {
  const fs::path root = fs::temp_directory_path() / "skytalk_acceptance_determinism";
  fs::remove_all(root);
  write_report(first.report, root / "a");
  write_report(run_default(m).report, root / "b");
  int files = 0, differ = 0;
  std::vector<fs::path> names{"report.csv"};
  for (const auto& e : fs::directory_iterator(root / "a" / "transcripts")) {
    names.push_back(fs::path("transcripts") / e.path().filename());
  }
  for (const auto& name : names) {
    ++files;
    if (!fs::exists(root / "b" / name) || slurp(root / "a" / name) != slurp(root / "b" / name)) ++differ;
  }
  std::size_t b_count = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(root / "b" / "transcripts")) ++b_count;
  const bool same_set = b_count + 1 == names.size();
  fs::remove_all(root);
  return {differ == 0 && same_set && files > 1,
          std::to_string(files) + " files compared, " + std::to_string(differ) + " differ"};
}

Outcome validation_arithmetic(const MatrixRun& run, const ExperimentMatrix& m) {
  Outcome o{true, ""};
  int checked = 0, bad = 0;
  for (const auto& t : run.report.trials) {
    if (t.failed) continue;
    // Everything below is read back from the transcript alone.
    int saved = 0, validation = 0, targets = -1;
    bool at_spawn = false;
    for (const auto& r : t.transcript) {
      if (r.mode == Mode::ActivePerception && (r.has_flag("saved") || r.has_flag("auto_saved"))) ++saved;
      if (r.mode == Mode::Validation && r.queried()) ++validation;
      if (r.mode == Mode::Validation && !r.queried()) {
        at_spawn = r.has_flag("validate_at_spawn");
        std::set<Fact> unique;
        for (const auto& f : parse_summary(r.directive_text).validation_targets) unique.insert(f);
        targets = static_cast<int>(unique.size());
      }
    }
    const int positions = at_spawn ? 1 : saved;
    ++checked;
    if (targets < 0 || validation != positions * targets * m.episode.validation_samples) ++bad;
  }
  o.detail = std::to_string(checked) + " transcripts, " + std::to_string(bad) + " mismatched";
  if (bad || checked == 0) o.pass = false;

  // Synthetic tallies through the real validation path.
  Scene scene;
  scene.name = "tally";
  scene.bounds = {{-10, -10, 0}, {10, 10, 20}};
  scene.spawn = {{0, 0, 5}, 0.0};
  for (const auto& [p, samples] : std::vector<std::pair<double, int>>{{0.6, 3}, {0.45, 5}}) {
    const int tallies = 10000;
    int confirmed = 0;
    EpisodeConfig config;
    config.validation_samples = samples;
    for (int i = 0; i < tallies; ++i) {
      fake::Controller controller({"command: save position", "command: i know enough"},
                                  "description: x\ncaption: a hut\nvalidate: a hut");
      const double yes_rate = p;
      fake::Perception perception([yes_rate](const PerceptionQueryRequest& req) {
        return fake::reply(keyed_uniform(req.sample_key) < yes_rate ? "yes" : "no", "a hut", 0.5);
      });
      config.seed = static_cast<std::uint64_t>(i) + 1000003ULL * samples;
      confirmed += !run_episode({scene, config, controller, perception}).confirmed_facts.empty();
    }
    const double rate = static_cast<double>(confirmed) / tallies;
    const double expect = oracle::binomial_majority(p, samples);
    if (std::fabs(rate - expect) > 0.02) o.pass = false;
    o.detail += " | p=" + fmt2(p) + " n=" + std::to_string(samples) + " rate " + fmt2(rate) + " vs " + fmt2(expect);
  }
  return o;
}

Outcome parser_robustness() {
  std::mt19937_64 rng(20240611);
  int round_trip_failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const TurnDirective d = gen::directive(rng);
    try {
      if (!(parse_turn(serialize(d)) == d)) ++round_trip_failures;
    } catch (const std::exception&) {
      ++round_trip_failures;
    }
    const SummaryDirective s = gen::summary(rng);
    try {
      if (!(parse_summary(serialize(s)) == s)) ++round_trip_failures;
    } catch (const std::exception&) {
      ++round_trip_failures;
    }
  }
  long accepted = 0, rejected = 0, crashes = 0;
  for (int i = 0; i < 1000000; ++i) {
    const std::string bytes = gen::random_bytes(rng, 96);
    try {
      parse_turn(bytes);
      ++accepted;
    } catch (const GrammarError&) {
      ++rejected;
    } catch (...) {
      ++crashes;
    }
  }
  return {round_trip_failures == 0 && crashes == 0,
          "10000 turn+summary round trips, " + std::to_string(round_trip_failures) + " failures; 1000000 fuzz inputs: " +
              std::to_string(accepted) + " accepted, " + std::to_string(rejected) + " rejected, " +
              std::to_string(crashes) + " unexpected exceptions"};
}

// Label and attribute sets read from the raw scene file.
struct RawObject {
  std::string label;
  std::set<std::string> attributes;
};

std::vector<RawObject> raw_objects(const fs::path& path) {
  const auto doc = nlohmann::json::parse(slurp(path), nullptr, true, true);
  std::vector<RawObject> out;
  for (const auto& o : doc.at("objects")) {
    RawObject r{o.at("label").get<std::string>(), {}};
    if (o.contains("attributes")) {
      for (const auto& a : o.at("attributes")) r.attributes.insert(a.get<std::string>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

bool true_in(const Fact& f, const std::vector<RawObject>& objects) {
  bool exists = false;
  for (const auto& o : objects) {
    if (o.label != f.subject_label) continue;
    bool all = true;
    for (const auto& a : f.attributes) all = all && o.attributes.count(a);
    exists = exists || all;
  }
  return f.polarity == Polarity::Present ? exists : !exists;
}

Outcome zero_noise_soundness() {
  int episodes = 0, false_facts = 0, facts = 0;
  std::string first_bad;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(oracle::data_path("scenes"))) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    auto scene = std::make_shared<const Scene>(load_scene_file(path));
    const auto objects = raw_objects(path);
    OraclePerception oracle(NoiseModel::none());
    oracle.add_scene(scene);
    ScriptedController controller;
    for (bool early : {true, false}) {
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        EpisodeConfig config;
        config.seed = seed;
        config.early_stop = early;
        const auto report = run_episode({*scene, config, controller, oracle});
        ++episodes;
        std::vector<Fact> claimed = report.confirmed_facts;
        if (report.final_caption != kNothingNotable) {
          for (const auto& f : parse_caption(report.final_caption)) claimed.push_back(f);
        }
        for (const auto& f : claimed) {
          ++facts;
          if (!true_in(f, objects)) {
            ++false_facts;
            if (first_bad.empty()) first_bad = path.filename().string() + ": " + render_fact(f);
          }
          const std::string phrase = fact_phrase(f);
          if (f.polarity == Polarity::Present && report.final_description.find(phrase) == std::string::npos) {
            ++false_facts;
            if (first_bad.empty()) first_bad = "description omits " + phrase;
          }
        }
      }
    }
  }
  return {false_facts == 0 && files.size() == 16,
          std::to_string(files.size()) + " scenes, " + std::to_string(episodes) + " episodes, " +
              std::to_string(facts) + " facts checked, " + std::to_string(false_facts) + " false" +
              (first_bad.empty() ? "" : " (" + first_bad + ")")};
}

Outcome transport_transparency(const ExperimentMatrix& m, const MatrixRun& local) {
  ScriptedController controller(m.policy);
  OraclePerception perception(m.noise, m.episode.salience_grid);
  for (const auto& env : m.environments) {
    for (const auto& [_, path] : env.scenes) perception.add_scene(std::make_shared<const Scene>(load_scene_file(path)));
  }
  ProtocolServer server(&controller, &perception);
  server.start();
  RunOptions options;
  options.backend = "remote:" + server.base_url();
  const auto remote = run_default(m, options);
  server.stop();

  int compared = 0, differ = 0;
  for (std::size_t i = 0; i < local.report.trials.size() && i < remote.report.trials.size(); ++i) {
    ++compared;
    const auto& a = local.report.trials[i];
    const auto& b = remote.report.trials[i];
    if (a.episode_id() != b.episode_id() || b.failed ||
        transcript_jsonl(a.transcript) != transcript_jsonl(b.transcript)) {
      ++differ;
    }
  }
  const bool same_csv = report_csv(local.report) == report_csv(remote.report);
  return {differ == 0 && same_csv && compared == static_cast<int>(local.report.trials.size()) &&
              local.report.trials.size() == remote.report.trials.size(),
          std::to_string(compared) + " transcripts compared over loopback, " + std::to_string(differ) +
              " differ; report.csv " + (same_csv ? "identical" : "differs") + "; " +
              std::to_string(server.backend_calls()) + " backend calls"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  };

  const ExperimentMatrix matrix = default_matrix();
  const MatrixRun run = run_default(matrix);

  report("score-direction", [&] { return score_direction(run); });
  report("detection-direction", [&] { return detection_direction(run, matrix); });
  report("early-stop", [&] { return early_stop(run); });
  report("determinism", [&] { return determinism(matrix, run); });
  report("validation-arithmetic", [&] { return validation_arithmetic(run, matrix); });
  report("parser-robustness", [] { return parser_robustness(); });
  report("zero-noise-soundness", [] { return zero_noise_soundness(); });
  report("transport-transparency", [&] { return transport_transparency(matrix, run); });

  std::printf("%d of 8 criteria failed\n", failures);
  return failures ? 1 : 0;
}
