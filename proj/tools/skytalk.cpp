#include <csignal>
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "skytalk/controller.hpp"
#include "skytalk/engine.hpp"
#include "skytalk/harness.hpp"
#include "skytalk/protocol.hpp"

namespace {

skytalk::ProtocolServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

void print_summary(const skytalk::ExperimentReport& report) {
  std::printf("%-10s %9s %9s %9s %9s\n", "env", "score_b", "score_p", "detect_b", "detect_p");
  for (const auto& e : report.environments) {
    std::printf("%-10s %9.3f %9.3f %9.3f %9.3f\n", e.environment.c_str(), e.baseline_score, e.proposed_score,
                e.baseline_detection, e.proposed_detection);
  }
  if (report.failed_trials > 0) std::printf("failed trials: %d\n", report.failed_trials);
}

int cmd_run(const std::string& matrix_path, const std::string& out_dir, std::optional<int> seeds, int parallel,
            const std::string& backend) {
  const auto matrix = skytalk::load_matrix_file(matrix_path);
  skytalk::RunOptions options;
  options.parallel = parallel;
  options.backend = backend;
  options.seeds = seeds;
  auto report = skytalk::aggregate(skytalk::run_matrix(matrix, options));
  skytalk::write_report(report, out_dir);
  print_summary(report);
  const auto problems = skytalk::check_report(report, backend == "scripted");
  for (const auto& p : problems) std::fprintf(stderr, "invariant violated: %s\n", p.c_str());
  return problems.empty() ? 0 : 1;
}

int cmd_serve(const std::string& matrix_path, const std::string& host, int port) {
  const auto matrix = skytalk::load_matrix_file(matrix_path);
  skytalk::ScriptedController controller(matrix.policy);
  skytalk::OraclePerception perception(matrix.noise, matrix.episode.salience_grid);
  for (const auto& env : matrix.environments) {
    for (const auto& [_, path] : env.scenes) {
      perception.add_scene(std::make_shared<const skytalk::Scene>(skytalk::load_scene_file(path)));
    }
  }
  skytalk::ProtocolServer server(&controller, &perception);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::fprintf(stderr, "serving on %s:%d\n", host.c_str(), port);
  server.listen(host, port);
  g_server = nullptr;
  return 0;
}

int cmd_episode(const std::string& scene_path, std::uint64_t seed, bool no_early_stop, bool zero_noise) {
  auto scene = std::make_shared<const skytalk::Scene>(skytalk::load_scene_file(scene_path));
  skytalk::EpisodeConfig config;
  config.seed = seed;
  config.early_stop = !no_early_stop;
  skytalk::ScriptedController controller;
  skytalk::OraclePerception perception(zero_noise ? skytalk::NoiseModel::none() : skytalk::NoiseModel{});
  perception.add_scene(scene);
  skytalk::EpisodeContext context{*scene, config, controller, perception};
  const auto report = skytalk::run_episode(context);
  std::cout << skytalk::transcript_jsonl(report.transcript);
  std::cout << "description: " << report.final_description << "\n";
  std::cout << "caption: " << report.final_caption << "\n";
  for (const auto& note : report.safety_notes) std::cout << "safety: " << note << "\n";
  return 0;
}

int cmd_inspect(const std::string& scene_path, const std::vector<double>& pose_values) {
  const auto scene = skytalk::load_scene_file(scene_path);
  skytalk::Pose pose = scene.spawn;
  if (!pose_values.empty()) {
    pose.position = {pose_values[0], pose_values[1], pose_values[2]};
    pose.yaw = pose_values[3];
  }
  std::printf("pose %.3f %.3f %.3f yaw %.3f\n", pose.position.x, pose.position.y, pose.position.z, pose.yaw);
  for (const auto& v : skytalk::visible_objects(scene, pose)) {
    const auto* object = scene.find(v.object_id);
    std::printf("%-24s fraction %.3f distance %7.2f%s\n", v.object_id.c_str(), v.fraction, v.distance,
                object && object->is_anomaly ? "  anomaly" : "");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skytalk: dialogue-driven active perception experiments"};
  app.require_subcommand(1);

  std::string matrix_path, out_dir, backend = "scripted", host = "127.0.0.1", scene_path;
  std::optional<int> seeds;
  int parallel = 1, port = 8080;
  std::uint64_t seed = 0;
  bool no_early_stop = false, zero_noise = false;

  auto* run = app.add_subcommand("run", "Run the experiment matrix and write reports");
  run->add_option("--matrix", matrix_path, "Matrix JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seeds", seeds, "Seeds per cell (overrides the matrix)")->check(CLI::PositiveNumber);
  run->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--backend", backend, "scripted or remote:<url>");

  auto* serve = app.add_subcommand("serve", "Serve scripted controller and oracle perception over HTTP");
  serve->add_option("--matrix", matrix_path, "Matrix JSON file whose scenes are served")
      ->required()
      ->check(CLI::ExistingFile);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));

  auto* episode = app.add_subcommand("episode", "Run one scripted episode and print its transcript");
  episode->add_option("--scene", scene_path, "Scene JSON file")->required()->check(CLI::ExistingFile);
  episode->add_option("--seed", seed, "Episode seed");
  episode->add_flag("--no-early-stop", no_early_stop, "Keep exploring after an anomaly");
  episode->add_flag("--zero-noise", zero_noise, "Disable perception noise");

  std::vector<double> pose_values;
  auto* inspect = app.add_subcommand("inspect", "List the objects visible from a pose");
  inspect->add_option("--scene", scene_path, "Scene JSON file")->required()->check(CLI::ExistingFile);
  inspect->add_option("--pose", pose_values, "x y z yaw (defaults to spawn)")->expected(4);

  auto* preamble = app.add_subcommand("preamble", "Print the controller prompt preamble");
  preamble->add_flag("--no-early-stop", no_early_stop, "Omit the early-stop instruction");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(matrix_path, out_dir, seeds, parallel, backend);
    if (*serve) return cmd_serve(matrix_path, host, port);
    if (*episode) return cmd_episode(scene_path, seed, no_early_stop, zero_noise);
    if (*inspect) return cmd_inspect(scene_path, pose_values);
    if (*preamble) {
      std::cout << skytalk::build_controller_preamble({!no_early_stop});
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
