#include "skytalk/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "skytalk/controller.hpp"
#include "skytalk/grammar.hpp"
#include "skytalk/protocol.hpp"
#include "skytalk/rng.hpp"

namespace skytalk {
namespace {

using nlohmann::json;

constexpr Placement kAllPlacements[] = {Placement::None, Placement::Near, Placement::Far, Placement::Occluded};

[[noreturn]] void bad_matrix(const std::string& message) { throw MatrixError("matrix: " + message); }

void only_keys(const json& node, const std::string& where, std::initializer_list<std::string_view> keys) {
  if (!node.is_object()) bad_matrix(where + " must be an object");
  for (const auto& [key, _] : node.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) bad_matrix(where + " has unknown key '" + key + "'");
  }
}

template <typename T>
void read_opt(const json& node, const char* key, T& out, const std::string& where) {
  auto it = node.find(key);
  if (it == node.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    bad_matrix(where + "." + key + " has the wrong type");
  }
}

bool caption_has_anomaly(std::string_view caption, const std::vector<std::string>& lexicon) {
  for (const Fact& fact : parse_caption(caption)) {
    if (fact.polarity == Polarity::Present && has_anomaly_token(fact, lexicon)) return true;
  }
  return false;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

std::string fixed6(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

}  // namespace

std::string_view placement_name(Placement placement) {
  switch (placement) {
    case Placement::None: return "none";
    case Placement::Near: return "near";
    case Placement::Far: return "far";
    case Placement::Occluded: return "occluded";
  }
  return "none";
}

Placement parse_placement(std::string_view name) {
  for (Placement p : kAllPlacements) {
    if (placement_name(p) == name) return p;
  }
  throw MatrixError("unknown placement '" + std::string(name) + "'");
}

ExperimentMatrix load_matrix_text(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    bad_matrix(e.what());
  }
  only_keys(doc, "matrix", {"environments", "placements", "seeds", "first_seed", "noise", "episode", "policy",
                            "salience_grid"});
  ExperimentMatrix m;

  auto envs = doc.find("environments");
  if (envs == doc.end() || !envs->is_array() || envs->empty()) bad_matrix("environments must be a nonempty array");
  for (std::size_t i = 0; i < envs->size(); ++i) {
    const json& e = (*envs)[i];
    const std::string where = "environments[" + std::to_string(i) + "]";
    only_keys(e, where, {"name", "scenes"});
    MatrixEnvironment env;
    read_opt(e, "name", env.name, where);
    if (env.name.empty()) bad_matrix(where + ".name is required");
    auto scenes = e.find("scenes");
    if (scenes == e.end() || !scenes->is_object()) bad_matrix(where + ".scenes must be an object");
    for (const auto& [key, value] : scenes->items()) {
      if (!value.is_string()) bad_matrix(where + ".scenes." + key + " must be a path");
      std::filesystem::path p = value.get<std::string>();
      env.scenes[parse_placement(key)] = p.is_absolute() ? p : base_dir / p;
    }
    for (const auto& other : m.environments) {
      if (other.name == env.name) bad_matrix("duplicate environment '" + env.name + "'");
    }
    m.environments.push_back(std::move(env));
  }

  if (auto it = doc.find("placements"); it != doc.end()) {
    if (!it->is_array() || it->empty()) bad_matrix("placements must be a nonempty array");
    m.placements.clear();
    for (const auto& p : *it) {
      if (!p.is_string()) bad_matrix("placements[] must be strings");
      m.placements.push_back(parse_placement(p.get<std::string>()));
    }
  }
  for (const auto& env : m.environments) {
    for (Placement p : m.placements) {
      if (!env.scenes.count(p)) {
        bad_matrix("environment '" + env.name + "' has no scene for placement " + std::string(placement_name(p)));
      }
    }
  }

  read_opt(doc, "seeds", m.seeds, "matrix");
  read_opt(doc, "first_seed", m.first_seed, "matrix");
  if (m.seeds < 1) bad_matrix("seeds must be >= 1");

  if (auto it = doc.find("noise"); it != doc.end()) {
    only_keys(*it, "noise", {"miss_base", "miss_per_meter", "hallucination_rate", "seed"});
    read_opt(*it, "miss_base", m.noise.miss_base, "noise");
    read_opt(*it, "miss_per_meter", m.noise.miss_per_meter, "noise");
    read_opt(*it, "hallucination_rate", m.noise.hallucination_rate, "noise");
    read_opt(*it, "seed", m.noise.seed, "noise");
  }
  if (auto it = doc.find("episode"); it != doc.end()) {
    only_keys(*it, "episode", {"max_steps", "sigma", "validation_samples", "early_stop", "anomaly_lexicon"});
    read_opt(*it, "max_steps", m.episode.max_steps, "episode");
    read_opt(*it, "sigma", m.episode.sigma, "episode");
    read_opt(*it, "validation_samples", m.episode.validation_samples, "episode");
    read_opt(*it, "early_stop", m.episode.early_stop, "episode");
    read_opt(*it, "anomaly_lexicon", m.episode.anomaly_lexicon, "episode");
  }
  if (auto it = doc.find("policy"); it != doc.end()) {
    only_keys(*it, "policy", {"save_budget", "closer_budget", "save_score_threshold", "watchlist"});
    read_opt(*it, "save_budget", m.policy.save_budget, "policy");
    read_opt(*it, "closer_budget", m.policy.closer_budget, "policy");
    read_opt(*it, "save_score_threshold", m.policy.save_score_threshold, "policy");
    read_opt(*it, "watchlist", m.policy.watchlist, "policy");
  }
  if (auto it = doc.find("salience_grid"); it != doc.end()) {
    only_keys(*it, "salience_grid", {"width", "height"});
    read_opt(*it, "width", m.episode.salience_grid.width, "salience_grid");
    read_opt(*it, "height", m.episode.salience_grid.height, "salience_grid");
  }
  try {
    m.noise.validate();
    m.episode.validate();
  } catch (const std::invalid_argument& e) {
    bad_matrix(e.what());
  }
  return m;
}

ExperimentMatrix load_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MatrixError("cannot open matrix file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_matrix_text(buffer.str(), path.parent_path());
}

std::uint64_t baseline_sample_key(std::uint64_t seed) { return derive_seed(seed, hash_tag("baseline")); }

BaselineResult eval_baseline(const Scene& scene, PerceptionBackend& perception, std::uint64_t seed,
                             const std::vector<std::string>& anomaly_lexicon) {
  PerceptionQueryRequest request;
  request.question = std::string(kBootstrapQuestion);
  request.view = StructuredView{scene.spawn, scene.name};
  request.sample_key = baseline_sample_key(seed);
  const PerceptionQueryResponse response = perception.query(request);
  return {response.match_score, caption_has_anomaly(response.caption, anomaly_lexicon), response.caption};
}

std::string TrialResult::episode_id() const {
  return environment + "_" + std::string(placement_name(placement)) + "_s" + std::to_string(seed);
}

TrialResult run_trial(const Scene& scene, const std::string& environment, Placement placement, std::uint64_t seed,
                      const EpisodeConfig& config, TrialBackends backends) {
  TrialResult t;
  t.environment = environment;
  t.placement = placement;
  t.seed = seed;
  t.validation_samples = config.validation_samples;

  EpisodeConfig episode_config = config;
  episode_config.seed = seed;
  try {
    const BaselineResult baseline = eval_baseline(scene, backends.perception, seed, config.anomaly_lexicon);
    t.baseline_score = baseline.score;
    t.baseline_detected = baseline.detected;

    EpisodeContext context{scene, episode_config, backends.controller, backends.perception};
    EpisodeReport report = run_episode(context);
    std::vector<double> scores{report.metrics.spawn_score};
    scores.insert(scores.end(), report.metrics.validation_scores.begin(), report.metrics.validation_scores.end());
    t.proposed_score = mean_of(scores);
    t.proposed_detected = caption_has_anomaly(report.final_caption, config.anomaly_lexicon);
    t.active_steps = report.metrics.active_steps;
    t.total_queries = report.metrics.total_queries;
    t.validation_queries = report.metrics.validation_queries;
    t.validation_positions = report.metrics.validation_positions;
    t.validation_targets = report.metrics.validation_targets;
    t.final_description = std::move(report.final_description);
    t.final_caption = std::move(report.final_caption);
    t.transcript = std::move(report.transcript);
    t.explanation_pairs = std::move(report.explanation_pairs);
  } catch (const std::exception& e) {
    t.failed = true;
    t.failure = e.what();
  }
  return t;
}

const EnvironmentSummary* ExperimentReport::find(std::string_view environment) const {
  for (const auto& env : environments) {
    if (env.environment == environment) return &env;
  }
  return nullptr;
}

ExperimentReport aggregate(std::vector<TrialResult> trials) {
  if (trials.empty()) throw std::invalid_argument("aggregate: no trials");
  ExperimentReport report;
  std::vector<std::string> order;
  for (const auto& t : trials) {
    if (std::find(order.begin(), order.end(), t.environment) == order.end()) order.push_back(t.environment);
    if (t.failed) ++report.failed_trials;
  }
  for (const auto& name : order) {
    EnvironmentSummary env;
    env.environment = name;
    bool has_clean = false;
    for (const auto& t : trials) has_clean = has_clean || (t.environment == name && !t.failed && t.placement == Placement::None);

    std::vector<double> base_scores, prop_scores, base_det, prop_det;
    for (const auto& t : trials) {
      if (t.environment != name || t.failed) continue;
      if (!has_clean || t.placement == Placement::None) {
        base_scores.push_back(t.baseline_score);
        prop_scores.push_back(t.proposed_score);
      }
      if (t.placement != Placement::None) {
        base_det.push_back(t.baseline_detected ? 1.0 : 0.0);
        prop_det.push_back(t.proposed_detected ? 1.0 : 0.0);
      }
    }
    env.score_trials = static_cast<int>(base_scores.size());
    env.baseline_score = mean_of(base_scores);
    env.proposed_score = mean_of(prop_scores);
    env.detection_trials = static_cast<int>(base_det.size());
    env.baseline_detection = mean_of(base_det);
    env.proposed_detection = mean_of(prop_det);

    for (Placement p : kAllPlacements) {
      std::vector<double> b, q, steps;
      for (const auto& t : trials) {
        if (t.environment != name || t.failed || t.placement != p) continue;
        b.push_back(t.baseline_detected ? 1.0 : 0.0);
        q.push_back(t.proposed_detected ? 1.0 : 0.0);
        steps.push_back(t.active_steps);
      }
      if (b.empty()) continue;
      env.placements.push_back({p, static_cast<int>(b.size()), mean_of(b), mean_of(q), mean_of(steps)});
    }
    report.environments.push_back(std::move(env));
  }
  report.trials = std::move(trials);
  return report;
}

std::vector<TrialResult> run_matrix(const ExperimentMatrix& matrix, const RunOptions& options) {
  const int seeds = options.seeds.value_or(matrix.seeds);
  if (seeds < 1) throw MatrixError("seeds must be >= 1");

  struct Cell {
    std::string environment;
    Placement placement;
    std::shared_ptr<const Scene> scene;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  std::map<std::filesystem::path, std::shared_ptr<const Scene>> loaded;
  for (const auto& env : matrix.environments) {
    for (Placement p : matrix.placements) {
      const auto& path = env.scenes.at(p);
      auto& scene = loaded[path];
      if (!scene) scene = std::make_shared<const Scene>(load_scene_file(path));
      for (int s = 0; s < seeds; ++s) {
        cells.push_back({env.name, p, scene, matrix.first_seed + static_cast<std::uint64_t>(s)});
      }
    }
  }

  std::unique_ptr<ControllerBackend> controller;
  std::unique_ptr<PerceptionBackend> perception;
  if (options.backend == "scripted") {
    controller = std::make_unique<ScriptedController>(matrix.policy);
    auto oracle = std::make_unique<OraclePerception>(matrix.noise, matrix.episode.salience_grid);
    for (const auto& [_, scene] : loaded) oracle->add_scene(scene);
    perception = std::move(oracle);
  } else if (options.backend.rfind("remote:", 0) == 0) {
    BackendEndpoint endpoint;
    endpoint.base_url = options.backend.substr(7);
    auto client = std::make_shared<const ProtocolClient>(endpoint);
    controller = std::make_unique<RemoteController>(client);
    perception = std::make_unique<RemotePerception>(client);
  } else {
    throw MatrixError("unknown backend '" + options.backend + "'");
  }

  std::vector<TrialResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
      const Cell& c = cells[i];
      results[i] = run_trial(*c.scene, c.environment, c.placement, c.seed, matrix.episode,
                             TrialBackends{*controller, *perception});
      if (options.on_trial) options.on_trial(results[i]);
    }
  };
  const int workers = std::clamp(options.parallel, 1, static_cast<int>(std::max<std::size_t>(cells.size(), 1)));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return results;
}

std::string report_csv(const ExperimentReport& report) {
  std::string out =
      "environment,placement,seed,baseline_score,proposed_score,baseline_detected,proposed_detected,"
      "active_steps,total_queries,validation_queries,status\n";
  for (const auto& t : report.trials) {
    out += t.environment + "," + std::string(placement_name(t.placement)) + "," + std::to_string(t.seed) + "," +
           fixed6(t.baseline_score) + "," + fixed6(t.proposed_score) + "," + (t.baseline_detected ? "1" : "0") +
           "," + (t.proposed_detected ? "1" : "0") + "," + std::to_string(t.active_steps) + "," +
           std::to_string(t.total_queries) + "," + std::to_string(t.validation_queries) + "," +
           (t.failed ? "failed" : "ok") + "\n";
  }
  return out;
}

std::string report_json(const ExperimentReport& report) {
  json envs = json::array();
  for (const auto& e : report.environments) {
    json placements = json::array();
    for (const auto& p : e.placements) {
      placements.push_back({{"placement", placement_name(p.placement)},
                            {"trials", p.trials},
                            {"baseline_detection", p.baseline_detection},
                            {"proposed_detection", p.proposed_detection},
                            {"mean_active_steps", p.mean_active_steps}});
    }
    envs.push_back({{"environment", e.environment},
                    {"score_trials", e.score_trials},
                    {"baseline_score", e.baseline_score},
                    {"proposed_score", e.proposed_score},
                    {"detection_trials", e.detection_trials},
                    {"baseline_detection", e.baseline_detection},
                    {"proposed_detection", e.proposed_detection},
                    {"placements", std::move(placements)}});
  }
  json trials = json::array();
  for (const auto& t : report.trials) {
    json row{{"episode", t.episode_id()},
             {"environment", t.environment},
             {"placement", placement_name(t.placement)},
             {"seed", t.seed},
             {"baseline_score", t.baseline_score},
             {"proposed_score", t.proposed_score},
             {"baseline_detected", t.baseline_detected},
             {"proposed_detected", t.proposed_detected},
             {"active_steps", t.active_steps},
             {"total_queries", t.total_queries},
             {"validation_queries", t.validation_queries},
             {"validation_positions", t.validation_positions},
             {"validation_targets", t.validation_targets},
             {"validation_samples", t.validation_samples},
             {"final_caption", t.final_caption},
             {"final_description", t.final_description},
             {"status", t.failed ? "failed" : "ok"}};
    if (t.failed) row["failure"] = t.failure;
    trials.push_back(std::move(row));
  }
  return json{{"environments", std::move(envs)}, {"failed_trials", report.failed_trials}, {"trials", std::move(trials)}}
             .dump(2) +
         "\n";
}

void write_report(const ExperimentReport& report, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "transcripts");
  fs::create_directories(out_dir / "salience");
  auto write = [](const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
  };
  write(out_dir / "report.csv", report_csv(report));
  write(out_dir / "report.json", report_json(report));
  for (const auto& t : report.trials) {
    if (t.failed) continue;
    write(out_dir / "transcripts" / (t.episode_id() + ".jsonl"), transcript_jsonl(t.transcript));
    for (const auto& pair : t.explanation_pairs) {
      std::ofstream out(out_dir / "salience" / (t.episode_id() + "_" + std::to_string(pair.step) + ".pgm"),
                        std::ios::binary);
      write_pgm(out, pair.salience);
    }
  }
}

std::vector<std::string> check_report(const ExperimentReport& report, bool scripted) {
  std::vector<std::string> problems;
  auto bounded = [](double x) { return x >= 0.0 && x <= 1.0; };
  for (const auto& t : report.trials) {
    const std::string id = t.episode_id();
    if (t.failed) {
      if (scripted) problems.push_back(id + ": episode failed under scripted backends: " + t.failure);
      continue;
    }
    if (!bounded(t.baseline_score) || !bounded(t.proposed_score)) problems.push_back(id + ": score outside [0,1]");
    if (t.active_steps < 0 || t.total_queries < 0) problems.push_back(id + ": negative count");
    const int expected = t.validation_positions * t.validation_targets * t.validation_samples;
    if (t.validation_queries != expected) {
      problems.push_back(id + ": validation queries " + std::to_string(t.validation_queries) + " != " +
                         std::to_string(expected));
    }
    int queried = 0;
    for (const auto& r : t.transcript) queried += r.queried() ? 1 : 0;
    if (queried != t.total_queries) problems.push_back(id + ": transcript query count disagrees with metrics");
  }

  // Recompute every mean from the rows.
  const ExperimentReport again = aggregate(report.trials);
  if (again.environments.size() != report.environments.size()) problems.push_back("environment set differs");
  for (std::size_t i = 0; i < std::min(again.environments.size(), report.environments.size()); ++i) {
    const auto& a = again.environments[i];
    const auto& b = report.environments[i];
    auto close = [](double x, double y) { return std::fabs(x - y) <= 1e-12; };
    if (!close(a.baseline_score, b.baseline_score) || !close(a.proposed_score, b.proposed_score) ||
        !close(a.baseline_detection, b.baseline_detection) || !close(a.proposed_detection, b.proposed_detection)) {
      problems.push_back(b.environment + ": means not recomputable from trial rows");
    }
  }
  return problems;
}

}  // namespace skytalk
