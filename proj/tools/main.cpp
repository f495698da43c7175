// spikegrasp command-line driver: simulate, spike, label, train, infer,
// eval, cost, suite. Exit codes: 0 ok, 2 input error, 3 pipeline error.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spikegrasp/config.hpp"
#include "spikegrasp/costmeter.hpp"
#include "spikegrasp/evaluator.hpp"
#include "spikegrasp/io.hpp"
#include "spikegrasp/labeler.hpp"
#include "spikegrasp/pipeline.hpp"
#include "spikegrasp/scene.hpp"
#include "spikegrasp/spike.hpp"

namespace fs = std::filesystem;
using namespace spikegrasp;

namespace {

bool g_verbose = false;

void note(const std::string& msg) {
  if (g_verbose) std::cerr << "[spikegrasp] " << msg << "\n";
}

PipelineConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return PipelineConfig::toy();
  return PipelineConfig::load(path);
}

scene::SceneDescription load_scene_checked(const std::string& path) {
  if (!fs::exists(path)) fail(errc::io, "scene file not found: " + path);
  return scene::load_scene(path);
}

int run_simulate(const std::string& config_path, std::uint64_t seed,
                 bool seed_set, int objects, const std::string& out_dir) {
  PipelineConfig config = load_config_or_default(config_path);
  if (seed_set) config.seed = seed;
  if (objects > 0) config.scene_objects = objects;
  fs::create_directories(out_dir);

  scene::SceneConfig scfg(config);
  scene::SceneDescription scn =
      scene::generate_scene(config.seed, config.scene_objects, scfg);
  scn.config_hash = config.hash();
  scene::save_scene(scn, out_dir + "/scene.txt");

  for (auto side : {scene::CameraSide::left, scene::CameraSide::right}) {
    std::string tag = side == scene::CameraSide::left ? "left" : "right";
    scene::LuminanceField lum = scene::render_luminance(scn, side);
    write_pgm(out_dir + "/luminance_" + tag + ".pgm", lum.values, lum.height,
              lum.width, 1.5);
    scene::ObjectMask mask = scene::render_mask(scn, side);
    write_pgm_ids(out_dir + "/mask_" + tag + ".pgm", mask.labels, mask.height,
                  mask.width);
  }
  note("scene written to " + out_dir);
  return 0;
}

int run_spike(const std::string& config_path, const std::string& scene_path,
              int frames, double theta, const std::string& camera,
              const std::string& out_path) {
  PipelineConfig config = load_config_or_default(config_path);
  if (frames > 0) config.spike_frames = frames;
  if (theta > 0) config.spike_threshold = theta;
  scene::SceneDescription scn = load_scene_checked(scene_path);

  auto emit = [&](scene::CameraSide side, const std::string& path) {
    scene::LuminanceField lum = scene::render_luminance(scn, side);
    spike::SpikeStream stream =
        spike::simulate_static(lum, config.spike_frames,
                               config.spike_threshold, config.readout_rate,
                               side);
    spike::save_stream(stream, path);
    note("stream written to " + path);
  };

  if (camera == "left") {
    emit(scene::CameraSide::left, out_path);
  } else if (camera == "right") {
    emit(scene::CameraSide::right, out_path);
  } else if (camera == "both") {
    std::string stem = out_path;
    std::string ext = ".spk";
    auto dot = stem.rfind(".spk");
    if (dot != std::string::npos) stem = stem.substr(0, dot);
    emit(scene::CameraSide::left, stem + "_left" + ext);
    emit(scene::CameraSide::right, stem + "_right" + ext);
  } else {
    fail(errc::precondition, "camera must be left, right or both");
  }
  return 0;
}

int run_label(const std::string& config_path, const std::string& scene_path,
              const std::string& out_dir) {
  PipelineConfig config = load_config_or_default(config_path);
  scene::SceneDescription scn = load_scene_checked(scene_path);
  fs::create_directories(out_dir);
  labeler::SceneLabels labels = labeler::make_scene_labels(scn, config);
  std::string stem = fs::path(scene_path).stem().string();
  labeler::save_labels(labels, out_dir, stem, config.hash());
  note("labels written to " + out_dir);
  return 0;
}

std::vector<std::string> sorted_files(const std::string& dir,
                                      const std::string& suffix) {
  std::vector<std::string> out;
  if (!fs::exists(dir)) fail(errc::io, "directory not found: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.size() >= suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int run_train(const std::string& config_path, const std::string& data_dir,
              int epochs, std::uint64_t seed, bool seed_set,
              const std::string& out_ckpt) {
  PipelineConfig config = load_config_or_default(config_path);
  if (seed_set) config.seed = seed;

  std::vector<std::string> scene_files = sorted_files(data_dir, ".txt");
  if (scene_files.empty())
    fail(errc::io, "no scene files (*.txt) in " + data_dir);

  std::vector<pipeline::SampleInputs> samples;
  for (const auto& path : scene_files) {
    note("preparing " + path);
    samples.push_back(pipeline::prepare_inputs(
        load_scene_checked(path), config, /*with_labels=*/true,
        fs::path(path).stem().string()));
  }

  pipeline::Model model = pipeline::Model::init(config, config.seed);
  int steps = epochs * static_cast<int>(samples.size());
  note("training " + std::to_string(steps) + " steps");
  pipeline::TrainResult result =
      pipeline::train_tiny(model, samples, config, steps);

  fs::create_directories(fs::path(out_ckpt).parent_path().empty()
                             ? "."
                             : fs::path(out_ckpt).parent_path().string());
  pipeline::save_checkpoint(model, out_ckpt, config.hash());
  pipeline::write_loss_curve(result.curve, out_ckpt + ".loss.csv");
  if (!result.curve.empty())
    std::cout << "final_total_loss = "
              << format_f64(result.curve.back().total) << "\n";
  return 0;
}

int run_infer(const std::string& config_path, const std::string& scene_path,
              const std::string& ckpt_path, const std::string& out_dir) {
  PipelineConfig config = load_config_or_default(config_path);
  scene::SceneDescription scn = load_scene_checked(scene_path);
  pipeline::Model model = pipeline::Model::init(config, config.seed);
  if (!ckpt_path.empty()) {
    if (!fs::exists(ckpt_path))
      fail(errc::io, "checkpoint not found: " + ckpt_path);
    pipeline::load_checkpoint(model, ckpt_path);
  }
  fs::create_directories(out_dir);
  std::string frame_id = fs::path(scene_path).stem().string();
  pipeline::InferOutputs out =
      pipeline::run_infer(model, scn, config, out_dir, frame_id);
  std::cout << "grasps = " << out.grasps.size() << "\n";
  if (!out.grasps.empty())
    std::cout << "top_score = " << format_f64(out.grasps.front().score)
              << "\n";
  std::cout << "spike_activity = " << format_f64(out.activity) << "\n";
  return 0;
}

int run_eval(const std::string& config_path, const std::string& grasps_dir,
             const std::string& scenes_dir, const std::string& out_path) {
  PipelineConfig config = load_config_or_default(config_path);
  std::uint64_t expected_hash = config.hash();
  eval::EvalConfig ecfg(config);

  std::vector<std::string> grasp_files = sorted_files(grasps_dir, "_grasps.txt");
  if (grasp_files.empty())
    fail(errc::io, "no grasp files (*_grasps.txt) in " + grasps_dir);

  std::vector<eval::FrameReport> frames;
  for (const auto& path : grasp_files) {
    std::string frame_id;
    std::uint64_t hash = 0;
    std::vector<grasp::GraspPose> grasps =
        grasp::load_grasps(path, &frame_id, &hash);
    if (hash != expected_hash)
      fail(errc::config,
           "config hash mismatch for " + path + " (stale outputs?)");
    std::string scene_path = scenes_dir + "/" + frame_id + ".txt";
    scene::SceneDescription scn = load_scene_checked(scene_path);
    frames.push_back(eval::evaluate_frame(grasps, scn, frame_id, ecfg));
    note("evaluated " + frame_id);
  }
  eval::EvalReport report = eval::ap_overall(frames, ecfg.friction_set);
  eval::write_report(report, ecfg, expected_hash, out_path);
  std::cout << "ap_overall = " << format_f64(report.ap_overall) << "\n";
  return 0;
}

int run_cost(const std::string& config_path, const std::string& trace_path,
             const std::string& out_path) {
  PipelineConfig config = load_config_or_default(config_path);
  if (!fs::exists(trace_path)) fail(errc::io, "trace not found: " + trace_path);
  cost::CostTrace trace = cost::load_trace(trace_path);
  cost::OpCounts counts = cost::count_ops(trace);
  cost::write_cost_report(out_path, counts, config.w_mac, config.w_ac);
  std::cout << "cost_ratio = "
            << format_f64(cost::cost_ratio(counts, config.w_mac, config.w_ac))
            << "\n";
  return 0;
}

int run_suite(const std::string& config_path, std::uint64_t seed,
              bool seed_set, const std::string& out_dir) {
  PipelineConfig config = load_config_or_default(config_path);
  if (seed_set) config.seed = seed;
  fs::create_directories(out_dir);
  std::uint64_t hash = config.hash();
  config.save(out_dir + "/config.txt");

  const int n_scenes = 2;
  std::vector<std::string> artifacts;
  artifacts.push_back(out_dir + "/config.txt");

  // scenes + streams + labels
  std::vector<pipeline::SampleInputs> samples;
  scene::SceneConfig scfg(config);
  for (int i = 0; i < n_scenes; ++i) {
    std::string id = "scene" + std::to_string(i);
    scene::SceneDescription scn =
        scene::generate_scene(config.seed + static_cast<std::uint64_t>(i),
                              config.scene_objects, scfg);
    scn.config_hash = hash;
    std::string scene_path = out_dir + "/" + id + ".txt";
    scene::save_scene(scn, scene_path);
    artifacts.push_back(scene_path);

    for (auto side : {scene::CameraSide::left, scene::CameraSide::right}) {
      std::string tag = side == scene::CameraSide::left ? "left" : "right";
      scene::LuminanceField lum = scene::render_luminance(scn, side);
      spike::SpikeStream stream = spike::simulate_static(
          lum, config.spike_frames, config.spike_threshold,
          config.readout_rate, side);
      std::string spk = out_dir + "/" + id + "_" + tag + ".spk";
      spike::save_stream(stream, spk);
      artifacts.push_back(spk);
    }

    note("labeling " + id);
    samples.push_back(
        pipeline::prepare_inputs(scn, config, /*with_labels=*/true, id));
    labeler::save_labels(samples.back().labels, out_dir, id, hash);
    artifacts.push_back(out_dir + "/" + id + "_objectness.grid");
    artifacts.push_back(out_dir + "/" + id + "_graspness.grid");
    artifacts.push_back(out_dir + "/" + id + "_summary.txt");
  }

  // training
  note("training");
  pipeline::Model model = pipeline::Model::init(config, config.seed);
  pipeline::TrainResult trained =
      pipeline::train_tiny(model, samples, config, config.train_steps);
  std::string ckpt = out_dir + "/model.ckpt";
  pipeline::save_checkpoint(model, ckpt, hash);
  pipeline::write_loss_curve(trained.curve, out_dir + "/loss_curve.csv");
  artifacts.push_back(ckpt);
  artifacts.push_back(out_dir + "/loss_curve.csv");

  // inference + evaluation
  std::vector<eval::FrameReport> frames;
  eval::EvalConfig ecfg(config);
  for (int i = 0; i < n_scenes; ++i) {
    std::string id = "scene" + std::to_string(i);
    note("inferring " + id);
    pipeline::InferOutputs out =
        pipeline::run_infer(model, samples[static_cast<std::size_t>(i)].scenery,
                            config, out_dir, id);
    frames.push_back(eval::evaluate_frame(
        out.grasps, samples[static_cast<std::size_t>(i)].scenery, id, ecfg));
    for (const char* suffix :
         {"_grasps.txt", "_objectness.pgm", "_graspness.pgm",
          "_objectness.grid", "_graspness.grid", "_trace.csv"})
      artifacts.push_back(out_dir + "/" + id + suffix);
  }
  eval::EvalReport report = eval::ap_overall(frames, ecfg.friction_set);
  eval::write_report(report, ecfg, hash, out_dir + "/report.csv");
  artifacts.push_back(out_dir + "/report.csv");

  // cost report from the first trace
  cost::CostTrace trace = cost::load_trace(out_dir + "/scene0_trace.csv");
  cost::write_cost_report(out_dir + "/cost.csv", cost::count_ops(trace),
                          config.w_mac, config.w_ac);
  artifacts.push_back(out_dir + "/cost.csv");

  // manifest: stable hashes for every artifact
  KvFile manifest;
  manifest.set_i64("format_version", 1);
  manifest.set_u64_hex("config_hash", hash);
  std::sort(artifacts.begin(), artifacts.end());
  for (const auto& path : artifacts) {
    std::string key = "file." + fs::path(path).filename().string();
    manifest.set_u64_hex(key, hash_file(path));
  }
  manifest.save(out_dir + "/manifest.txt");
  std::cout << "ap_overall = " << format_f64(report.ap_overall) << "\n";
  std::cout << "manifest = " << out_dir << "/manifest.txt\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stereo spike streams to 6-DoF grasp poses"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, scene_path, ckpt_path, out_path, data_dir,
      grasps_dir, scenes_dir, trace_path, camera = "both";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int objects = 0, frames = 0, epochs = 1;
  double theta = 0.0;
  app.add_flag("--verbose", g_verbose, "log progress to stderr");

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "root random seed")
        ->each([&](const std::string&) { seed_set = true; });
  };

  CLI::App* sim = app.add_subcommand("simulate", "generate a scene");
  sim->add_option("--config", config_path, "config file");
  add_seed(sim);
  sim->add_option("--objects", objects, "number of objects");
  sim->add_option("--out", out_path, "output directory")->required();

  CLI::App* spk = app.add_subcommand("spike", "simulate spike streams");
  spk->add_option("--config", config_path, "config file");
  spk->add_option("--scene", scene_path, "scene file")->required();
  spk->add_option("--frames", frames, "readout frames K");
  spk->add_option("--theta", theta, "integrator threshold");
  spk->add_option("--camera", camera, "left|right|both");
  spk->add_option("--out", out_path, "output .spk path")->required();

  CLI::App* lab = app.add_subcommand("label", "generate ground-truth labels");
  lab->add_option("--config", config_path, "config file");
  lab->add_option("--scene", scene_path, "scene file")->required();
  lab->add_option("--out", out_path, "output directory")->required();

  CLI::App* trn = app.add_subcommand("train", "tiny seeded training loop");
  trn->add_option("--config", config_path, "config file");
  trn->add_option("--data", data_dir, "directory of scene files")->required();
  trn->add_option("--epochs", epochs, "passes over the data");
  add_seed(trn);
  trn->add_option("--out", out_path, "checkpoint path")->required();

  CLI::App* inf = app.add_subcommand("infer", "detect grasps for a scene");
  inf->add_option("--config", config_path, "config file");
  inf->add_option("--scene", scene_path, "scene file")->required();
  inf->add_option("--checkpoint", ckpt_path, "weight checkpoint");
  inf->add_option("--out", out_path, "output directory")->required();

  CLI::App* evl = app.add_subcommand("eval", "score grasp files");
  evl->add_option("--config", config_path, "config file");
  evl->add_option("--grasps", grasps_dir, "grasp file directory")->required();
  evl->add_option("--scenes", scenes_dir, "scene file directory")->required();
  evl->add_option("--out", out_path, "report csv path")->required();

  CLI::App* cst = app.add_subcommand("cost", "operation-count report");
  cst->add_option("--config", config_path, "config file");
  cst->add_option("--trace", trace_path, "trace csv")->required();
  cst->add_option("--out", out_path, "cost csv path")->required();

  CLI::App* ste = app.add_subcommand("suite", "full seeded reproduction run");
  ste->add_option("--config", config_path, "config file");
  add_seed(ste);
  ste->add_option("--out", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed())
      return run_simulate(config_path, seed, seed_set, objects, out_path);
    if (spk->parsed())
      return run_spike(config_path, scene_path, frames, theta, camera,
                       out_path);
    if (lab->parsed()) return run_label(config_path, scene_path, out_path);
    if (trn->parsed())
      return run_train(config_path, data_dir, epochs, seed, seed_set,
                       out_path);
    if (inf->parsed())
      return run_infer(config_path, scene_path, ckpt_path, out_path);
    if (evl->parsed())
      return run_eval(config_path, grasps_dir, scenes_dir, out_path);
    if (cst->parsed()) return run_cost(config_path, trace_path, out_path);
    if (ste->parsed()) return run_suite(config_path, seed, seed_set, out_path);
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_input_error() ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
