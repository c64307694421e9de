#include "pgnd/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pgnd/config.hpp"
#include "pgnd/dataset.hpp"
#include "pgnd/dynamics.hpp"
#include "pgnd/error.hpp"
#include "pgnd/metrics.hpp"
#include "pgnd/planner.hpp"
#include "pgnd/skinning.hpp"
#include "pgnd/synth.hpp"
#include "pgnd/train.hpp"

namespace pgnd {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

void check_thread_env() {
  const char* raw = std::getenv("PGND_THREADS");
  if (!raw) return;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || v < 1) {
    throw ValidationError(
        "PGND_THREADS must be a positive integer, got \"" +
        std::string(raw) + "\"");
  }
  // Every pipeline in this build runs single-threaded so outputs are
  // byte-reproducible; any positive cap is therefore honored as-is.
}

void ensure_parent_dir(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) {
    throw FormatError("cannot create directory " + parent.string() + ": " +
                      ec.message());
  }
}

std::string shortest(double v) { return json(v).dump(); }

SceneKind parse_kind(const std::string& s) {
  if (s == "rope") return SceneKind::Rope;
  if (s == "cloth") return SceneKind::Cloth;
  throw ParamError("--kind must be rope or cloth, got \"" + s + "\"");
}

ModelMode parse_mode(const std::string& s) {
  if (s == "grid") return ModelMode::Grid;
  if (s == "particle") return ModelMode::Particle;
  throw ParamError("--mode must be grid or particle, got \"" + s + "\"");
}

RunConfig config_or_default(const std::string& path) {
  RunConfig cfg;
  if (!path.empty()) cfg = load_config(path);
  validate_config(cfg);
  return cfg;
}

void check_history(const RunConfig& cfg, const DynamicsModel& model) {
  if (cfg.history != model.dims.history) {
    throw ValidationError(
        "config history " + std::to_string(cfg.history) +
        " does not match the checkpoint's history " +
        std::to_string(model.dims.history));
  }
}

std::vector<Trajectory> load_trajectory_dir(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw ValidationError("--data must name a directory: " + dir);
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw ValidationError("no .jsonl trajectory files in " + dir);
  }
  std::vector<Trajectory> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_trajectory(f));
  return out;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string kind;
  double duration = 3.0;
  double dt = 0.1;
  std::uint64_t seed = 0;
  std::string cameras;  // config file whose camera list supplies the rig
  int views = 4;
  std::string out;
};

int run_gen(const GenArgs& a) {
  const SceneKind kind = parse_kind(a.kind);
  if (a.views < 1 || a.views > 4) {
    throw ParamError("--views must be in [1, 4], got " +
                     std::to_string(a.views));
  }
  Trajectory traj = gen_random_trajectory(kind, a.duration, a.dt, a.seed);

  if (a.views < 4) {
    // Re-observe the ground truth through a reduced camera rig and keep only
    // persistent tracks, the way captured data would arrive.
    std::vector<CameraSpec> rig = a.cameras.empty()
                                      ? default_camera_rig()
                                      : effective_cameras(load_config(a.cameras));
    if (static_cast<int>(rig.size()) < a.views) {
      throw ValidationError("--views " + std::to_string(a.views) +
                            " exceeds the camera rig size " +
                            std::to_string(rig.size()));
    }
    rig.resize(static_cast<std::size_t>(a.views));
    const int f = traj.num_frames();
    std::vector<ObservedFrame> obs(static_cast<std::size_t>(f));
    for (int t = 0; t < f; ++t) {
      const Points& x = traj.frames[static_cast<std::size_t>(t)];
      const Points& xa = traj.frames[static_cast<std::size_t>(
          t + 1 < f ? t : t - 1)];
      const Points& xb = traj.frames[static_cast<std::size_t>(
          t + 1 < f ? t + 1 : t)];
      const auto keep = visible_indices(x, rig);
      auto& frame = obs[static_cast<std::size_t>(t)];
      frame.x.reserve(keep.size());
      frame.v.reserve(keep.size());
      for (int i : keep) {
        frame.x.push_back(x[static_cast<std::size_t>(i)]);
        frame.v.push_back((xb[static_cast<std::size_t>(i)] -
                           xa[static_cast<std::size_t>(i)]) /
                          traj.dt);
      }
    }
    traj.frames = extract_tracks(obs, traj.dt);
  }

  ensure_parent_dir(a.out);
  save_trajectory(a.out, traj);
  std::cout << "wrote " << traj.num_frames() << " frames ("
            << traj.frames.front().size() << " points) to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string config;
  std::string views = "full";
  std::string mode = "grid";
  int steps = 2000;
  std::uint64_t seed = 0;
  double lr = 1e-4;
  int batch = 32;
  int val_every = 100;
  int val_rollout = 30;
  int val_clips = 4;
  int feat = 64;
  int enc_hidden = 64;
  int field_hidden = 128;
  int freqs = 6;
  std::string out;
};

int run_train(const TrainArgs& a) {
  if (a.views != "full" && a.views != "random") {
    throw ParamError("--views must be full or random, got \"" + a.views +
                     "\"");
  }
  const ModelMode mode = parse_mode(a.mode);
  const RunConfig cfg = config_or_default(a.config);
  const std::vector<Trajectory> data = load_trajectory_dir(a.data);

  TrainConfig tc;
  tc.steps = a.steps;
  tc.seed = a.seed;
  tc.lr = a.lr;
  tc.batch_size = a.batch;
  tc.val_every = a.val_every;
  tc.val_rollout = a.val_rollout;
  tc.val_clips = a.val_clips;
  tc.partial_views = a.views == "random";
  tc.dims.feat = a.feat;
  tc.dims.enc_hidden = a.enc_hidden;
  tc.dims.field_hidden = a.field_hidden;
  tc.dims.freqs = a.freqs;

  const TrainResult result = train_model(data, mode, cfg, tc);
  ensure_parent_dir(a.out);
  save_model(a.out, result.model);

  if (!result.train_loss.empty()) {
    std::cout << "trained " << result.train_loss.size()
              << " steps; final loss " << shortest(result.train_loss.back())
              << "\n";
  }
  if (result.best_step >= 0) {
    std::cout << "best validation mde " << shortest(result.best_val)
              << " at step " << result.best_step << "\n";
  }
  std::cout << "wrote " << a.out << "\n";
  if (result.aborted) {
    std::cerr << "training aborted after " << result.train_loss.size()
              << " steps (non-finite loss or unstable rollout); the "
                 "checkpoint holds the best parameters seen\n";
    return 2;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string data;
  std::string config;
  std::string mode;  // empty: use the checkpoint's own mode
  int views = 4;
  std::string report;
};

int run_eval(const EvalArgs& a) {
  if (a.views < 1 || a.views > 4) {
    throw ParamError("--views must be in [1, 4], got " +
                     std::to_string(a.views));
  }
  DynamicsModel model = load_model(a.model);
  if (!a.mode.empty()) model.mode = parse_mode(a.mode);
  const RunConfig cfg = config_or_default(a.config);
  check_history(cfg, model);
  const std::vector<Trajectory> clips = load_trajectory_dir(a.data);

  EvalOptions opt;
  opt.views = a.views;
  const MetricReport report = evaluate_clips(model, clips, cfg, opt);

  ensure_parent_dir(a.report);
  save_report_json(a.report, report);
  std::cout << "mde " << shortest(report.mde.mean) << " +- "
            << shortest(report.mde.std_dev) << "\n";
  std::cout << "chamfer " << shortest(report.chamfer.mean) << " +- "
            << shortest(report.chamfer.std_dev) << "\n";
  std::cout << "emd " << shortest(report.emd.mean) << " +- "
            << shortest(report.emd.std_dev) << "\n";
  std::cout << "wrote " << a.report << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

struct PlanArgs {
  std::string model;
  std::string task;
  std::string config;
  std::uint64_t seed = 0;
  int samples = 32;
  int iterations = 5;
  int mpc_steps = 10;
  int horizon = 0;  // 0: use the run config's horizon
  double trans_std = 0.01;
  double beta = 0.05;
  std::string out;
};

void settle(OracleScene& scene, int steps) {
  for (int s = 0; s < steps; ++s) oracle_step(scene, {}, scene.dt_sim);
  scene.t = 0.0;
  for (auto& v : scene.v) v = Vec3::Zero();
}

int run_plan(const PlanArgs& a) {
  DynamicsModel model = load_model(a.model);
  const RunConfig cfg = config_or_default(a.config);
  check_history(cfg, model);

  OracleScene scene = make_rope();
  settle(scene, 600);

  Points target;
  if (a.task == "lift") {
    target = scene.x;
    for (auto& p : target) p += Vec3(0.0, 0.0, 0.05);
  } else if (a.task == "relocate") {
    target = scene.x;
    for (auto& p : target) p += Vec3(0.05, 0.05, 0.0);
  } else if (a.task == "straighten") {
    // Remember the settled (straight) shape, bend the rope by dragging one
    // end through a fixed arc, and ask the planner to restore the shape.
    target = scene.x;
    GripperScript bend;
    bend.grasp_particle = 0;
    bend.duration = 1.0;
    bend.waypoints = {scene.x[0], scene.x[0] + Vec3(0.02, 0.05, 0.03),
                      scene.x[0] + Vec3(-0.02, 0.09, 0.0)};
    const int sub = static_cast<int>(std::lround(bend.duration / scene.dt_sim));
    scene.t = 0.0;
    for (int s = 0; s < sub; ++s) oracle_step(scene, {bend}, scene.dt_sim);
    settle(scene, 600);
  } else {
    throw ParamError("--task must be lift, straighten, or relocate, got \"" +
                     a.task + "\"");
  }

  PlanProblem problem;
  problem.initial.x = scene.x;
  problem.initial.vel_history.assign(
      static_cast<std::size_t>(cfg.history) + 1,
      Points(scene.x.size(), Vec3::Zero()));
  problem.target = target;
  problem.space = ActionSpace::Translation3;
  problem.horizon = a.horizon > 0 ? a.horizon : cfg.horizon;
  ArmAction arm;
  arm.mode = ArmMode::Grasped;
  arm.pos = scene.x[0];
  problem.hold.arms = {arm};

  MppiConfig mc;
  mc.samples = a.samples;
  mc.iterations = a.iterations;
  mc.trans_std = a.trans_std;
  mc.beta = a.beta;
  mc.seed = a.seed;

  MpcOptions mo;
  mo.steps = a.mpc_steps;
  mo.grasp_particles = {0};

  const MpcResult result = mpc_loop(scene, problem, mc, model, cfg, mo);

  PlanResult plan;
  plan.actions = result.executed;
  ensure_parent_dir(a.out);
  save_plan_json(a.out, plan, result.error_curve);
  std::cout << "task " << a.task << ": cd " << shortest(result.error_curve.front())
            << " -> " << shortest(result.error_curve.back()) << " over "
            << (result.error_curve.size() - 1) << " steps\n";
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// skin
// ---------------------------------------------------------------------------

struct SkinArgs {
  std::string kernels;
  std::string tracks;
  std::string out;
};

int run_skin(const SkinArgs& a) {
  KernelSet kernels = load_kernels(a.kernels);
  const Trajectory traj = load_trajectory(a.tracks);
  if (traj.num_frames() < 1) {
    throw ValidationError("tracks file has no frames: " + a.tracks);
  }
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) {
    throw FormatError("cannot create directory " + a.out + ": " +
                      ec.message());
  }

  auto frame_path = [&](int t) {
    char name[32];
    std::snprintf(name, sizeof(name), "kernels_%04d.json", t);
    return (fs::path(a.out) / name).string();
  };

  save_kernels(frame_path(0), kernels);
  int degenerate_frames = 0;
  for (int t = 1; t < traj.num_frames(); ++t) {
    const Points& prev = traj.frames[static_cast<std::size_t>(t - 1)];
    const Points& next = traj.frames[static_cast<std::size_t>(t)];
    const ParticleRotations rot = estimate_rotations(prev, next);
    if (rot.any_degenerate()) ++degenerate_frames;
    kernels = lbs_apply(kernels, prev, next, rot);
    save_kernels(frame_path(t), kernels);
  }
  if (degenerate_frames > 0) {
    std::cerr << "note: " << degenerate_frames
              << " frames had rank-deficient neighborhoods; those rotations "
                 "fell back to the identity\n";
  }
  std::cout << "wrote " << traj.num_frames() << " kernel frames to " << a.out
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

struct PlotArgs {
  std::string report;
  std::string out;
};

double need_number(const json& j, const std::string& path) {
  if (!j.is_number()) {
    throw ValidationError("report field " + path + " must be a number");
  }
  return j.get<double>();
}

MetricStat stat_from_json(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("mean") || !j.contains("std") ||
      !j.contains("per_clip")) {
    throw ValidationError("report field " + path +
                          " must be an object with mean, std, per_clip");
  }
  MetricStat stat;
  stat.mean = need_number(j["mean"], path + ".mean");
  stat.std_dev = need_number(j["std"], path + ".std");
  if (!j["per_clip"].is_array()) {
    throw ValidationError("report field " + path + ".per_clip must be an array");
  }
  std::size_t i = 0;
  for (const auto& v : j["per_clip"]) {
    stat.per_clip.push_back(
        need_number(v, path + ".per_clip[" + std::to_string(i) + "]"));
    ++i;
  }
  return stat;
}

MetricReport report_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) {
    throw ValidationError("report field " + path + " must be an object");
  }
  const std::string prefix = path.empty() ? "" : path + ".";
  MetricReport r;
  for (const char* name : {"mde", "chamfer", "emd"}) {
    if (!j.contains(name)) {
      throw ValidationError("report field " + prefix + name + " is missing");
    }
  }
  r.mde = stat_from_json(j["mde"], prefix + "mde");
  r.chamfer = stat_from_json(j["chamfer"], prefix + "chamfer");
  r.emd = stat_from_json(j["emd"], prefix + "emd");
  return r;
}

std::string csv_twin_path(const std::string& out) {
  const fs::path p(out);
  fs::path twin = p;
  twin.replace_extension(".csv");
  if (twin == p) twin += ".csv";
  return twin.string();
}

int run_plot(const PlotArgs& a) {
  std::ifstream in(a.report, std::ios::binary);
  if (!in.good()) {
    throw FormatError("cannot open report: " + a.report);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("report " + a.report + ": " + e.what());
  }

  NamedReports methods;
  if (j.is_object() && j.contains("methods")) {
    if (!j["methods"].is_object() || j["methods"].empty()) {
      throw ValidationError(
          "report field methods must be a non-empty object");
    }
    for (const auto& [name, rep] : j["methods"].items()) {
      methods.emplace_back(name, report_from_json(rep, "methods." + name));
    }
  } else {
    methods.emplace_back("model", report_from_json(j, ""));
  }

  ensure_parent_dir(a.out);
  const std::string csv_path = csv_twin_path(a.out);
  {
    std::ofstream svg(a.out, std::ios::binary);
    if (!svg.good()) throw FormatError("cannot write " + a.out);
    svg << render_report_svg(methods);
  }
  {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv.good()) throw FormatError("cannot write " + csv_path);
    csv << render_report_csv(methods);
  }
  std::cout << "wrote " << a.out << " and " << csv_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// argv plumbing
// ---------------------------------------------------------------------------

int dispatch(CLI::App& app, const GenArgs& gen_args,
             const TrainArgs& train_args, const EvalArgs& eval_args,
             const PlanArgs& plan_args, const SkinArgs& skin_args,
             const PlotArgs& plot_args) {
  check_thread_env();
  if (app.got_subcommand("gen")) return run_gen(gen_args);
  if (app.got_subcommand("train")) return run_train(train_args);
  if (app.got_subcommand("eval")) return run_eval(eval_args);
  if (app.got_subcommand("plan")) return run_plan(plan_args);
  if (app.got_subcommand("skin")) return run_skin(skin_args);
  if (app.got_subcommand("plot")) return run_plot(plot_args);
  throw ContractError("no subcommand dispatched");
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{
      "Particle-grid neural dynamics: synthetic data, training, evaluation, "
      "planning, and skinning for deformable objects"};
  app.require_subcommand(1);
  app.footer(
      "Environment: PGND_THREADS caps worker parallelism (all pipelines are "
      "single-threaded for byte-reproducible outputs).");

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand(
      "gen", "Generate a synthetic robot-object trajectory");
  gen->add_option("--kind", gen_args.kind, "Scene kind: rope or cloth")
      ->required();
  gen->add_option("--duration", gen_args.duration,
                  "Episode length in seconds (default 3)");
  gen->add_option("--dt", gen_args.dt, "Frame interval in seconds (default 0.1)");
  gen->add_option("--seed", gen_args.seed, "Script RNG seed (default 0)");
  gen->add_option("--cameras", gen_args.cameras,
                  "Config file whose camera list replaces the default rig");
  gen->add_option("--views", gen_args.views,
                  "Cameras used to observe the scene; below 4, frames become "
                  "persistent tracks of the partially visible cloud "
                  "(default 4 = exact ground truth)");
  gen->add_option("--out", gen_args.out, "Output trajectory file (.jsonl)")
      ->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand(
      "train", "Train a dynamics model on trajectory files");
  train->add_option("--data", train_args.data,
                    "Directory of .jsonl trajectories")
      ->required();
  train->add_option("--config", train_args.config, "Run config JSON file");
  train->add_option("--views", train_args.views,
                    "Observation coverage: full, or random (mask each sample "
                    "to 1-4 views; default full)");
  train->add_option("--mode", train_args.mode,
                    "Model composition: grid or particle (default grid)");
  train->add_option("--steps", train_args.steps,
                    "Optimizer steps (default 2000)");
  train->add_option("--seed", train_args.seed, "Training seed (default 0)");
  train->add_option("--lr", train_args.lr, "Learning rate (default 1e-4)");
  train->add_option("--batch", train_args.batch,
                    "Windows per optimizer step (default 32)");
  train->add_option("--val-every", train_args.val_every,
                    "Validation cadence in steps; 0 disables (default 100)");
  train->add_option("--val-rollout", train_args.val_rollout,
                    "Validation rollout length in frames (default 30)");
  train->add_option("--val-clips", train_args.val_clips,
                    "Validation clips (default 4)");
  train->add_option("--feat", train_args.feat,
                    "Feature width of the point encoder (default 64)");
  train->add_option("--enc-hidden", train_args.enc_hidden,
                    "Encoder hidden width (default 64)");
  train->add_option("--field-hidden", train_args.field_hidden,
                    "Velocity-field hidden width (default 128)");
  train->add_option("--freqs", train_args.freqs,
                    "Positional-encoding frequencies (default 6)");
  train->add_option("--out", train_args.out, "Output checkpoint path")
      ->required();

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "Evaluate a checkpoint's rollout accuracy");
  eval->add_option("--model", eval_args.model, "Checkpoint path")->required();
  eval->add_option("--data", eval_args.data,
                   "Directory of .jsonl trajectories")
      ->required();
  eval->add_option("--config", eval_args.config, "Run config JSON file");
  eval->add_option("--mode", eval_args.mode,
                   "Override the composition: grid or particle (default: the "
                   "checkpoint's own)");
  eval->add_option("--views", eval_args.views,
                   "Cameras visible to the model's inputs, 1-4 (default 4)");
  eval->add_option("--report", eval_args.report, "Output report JSON path")
      ->required();

  PlanArgs plan_args;
  CLI::App* plan = app.add_subcommand(
      "plan", "Closed-loop manipulation on the built-in rope environment");
  plan->add_option("--model", plan_args.model, "Checkpoint path")->required();
  plan->add_option("--task", plan_args.task,
                   "Task: lift, straighten, or relocate")
      ->required();
  plan->add_option("--config", plan_args.config, "Run config JSON file");
  plan->add_option("--seed", plan_args.seed, "Sampler seed (default 0)");
  plan->add_option("--samples", plan_args.samples,
                   "Sampled perturbations per iteration (default 32)");
  plan->add_option("--iterations", plan_args.iterations,
                   "Optimizer iterations per control cycle (default 5)");
  plan->add_option("--mpc-steps", plan_args.mpc_steps,
                   "Plan/execute/replan cycles (default 10)");
  plan->add_option("--horizon", plan_args.horizon,
                   "Planning horizon in steps (default: run config horizon)");
  plan->add_option("--trans-std", plan_args.trans_std,
                   "Translation sampling deviation in meters (default 0.01)");
  plan->add_option("--beta", plan_args.beta,
                   "Weighting temperature (default 0.05)");
  plan->add_option("--out", plan_args.out, "Output plan JSON path")
      ->required();

  SkinArgs skin_args;
  CLI::App* skin = app.add_subcommand(
      "skin", "Advect oriented kernels along a tracked trajectory");
  skin->add_option("--kernels", skin_args.kernels, "Kernel JSON file")
      ->required();
  skin->add_option("--tracks", skin_args.tracks,
                   "Trajectory file of persistent tracks (.jsonl)")
      ->required();
  skin->add_option("--out", skin_args.out,
                   "Output directory for per-frame kernel files")
      ->required();

  PlotArgs plot_args;
  CLI::App* plot = app.add_subcommand(
      "plot", "Render a metric report to SVG (plus a CSV twin)");
  plot->add_option("--report", plot_args.report,
                   "Report JSON (single report or {\"methods\": {...}})")
      ->required();
  plot->add_option("--out", plot_args.out, "Output SVG path")->required();

  try {
    app.parse(argc, argv);
    return dispatch(app, gen_args, train_args, eval_args, plan_args,
                    skin_args, plot_args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help / --version print and exit 0
    }
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

namespace {

const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a45e",
                          "#b07aa1", "#e15759", "#76b7b2"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Bar {
  std::string method;
  std::string metric;
  double mean = 0.0;
  double std_dev = 0.0;
  std::size_t clips = 0;
};

std::vector<Bar> collect_bars(const NamedReports& methods) {
  std::vector<Bar> bars;
  for (const auto& [name, report] : methods) {
    const MetricStat* stats[] = {&report.mde, &report.chamfer, &report.emd};
    const char* metric_names[] = {"mde", "chamfer", "emd"};
    for (int k = 0; k < 3; ++k) {
      bars.push_back({name, metric_names[k], stats[k]->mean,
                      stats[k]->std_dev, stats[k]->per_clip.size()});
    }
  }
  return bars;
}

bool no_data(const std::vector<Bar>& bars) {
  for (const auto& b : bars) {
    if (b.clips > 0) return false;
  }
  return true;
}

}  // namespace

std::string render_report_svg(const NamedReports& methods) {
  const double width = 640.0, height = 400.0;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"#ffffff\"/>\n";

  const std::vector<Bar> bars = collect_bars(methods);
  if (methods.empty() || no_data(bars)) {
    svg << "<text x=\"" << fmt(width / 2) << "\" y=\"" << fmt(height / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"20\" fill=\"#666666\">no data</text>\n";
    svg << "</svg>\n";
    return svg.str();
  }

  const double left = 80.0, right = 150.0, top = 50.0, bottom = 60.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double ymax = 0.0;
  for (const auto& b : bars) ymax = std::max(ymax, b.mean + b.std_dev);
  if (ymax <= 0.0) ymax = 1.0;
  ymax *= 1.05;
  auto y_of = [&](double v) { return top + plot_h * (1.0 - v / ymax); };

  svg << "<text x=\"" << fmt(left + plot_w / 2) << "\" y=\"28\" "
         "text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\" "
         "fill=\"#222222\">rollout error by metric</text>\n";

  for (int i = 0; i <= 4; ++i) {
    const double v = ymax * i / 4.0;
    const double y = y_of(v);
    svg << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(y) << "\" x2=\""
        << fmt(left + plot_w) << "\" y2=\"" << fmt(y)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\" fill=\"#444444\">" << fmt_tick(v) << "</text>\n";
  }
  svg << "<text transform=\"translate(20," << fmt(top + plot_h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" fill=\"#444444\">meters</text>\n";

  const char* metric_names[] = {"mde", "chamfer", "emd"};
  const std::size_t m = methods.size();
  const double group_w = plot_w / 3.0;
  const double bar_w = group_w * 0.7 / static_cast<double>(m);
  for (int k = 0; k < 3; ++k) {
    const double gx = left + group_w * k;
    svg << "<text x=\"" << fmt(gx + group_w / 2) << "\" y=\""
        << fmt(top + plot_h + 22)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"13\" fill=\"#222222\">" << metric_names[k]
        << "</text>\n";
    for (std::size_t i = 0; i < m; ++i) {
      const Bar& b = bars[i * 3 + static_cast<std::size_t>(k)];
      const double x =
          gx + group_w * 0.15 + bar_w * static_cast<double>(i);
      const double y = y_of(b.mean);
      svg << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\""
          << fmt(bar_w * 0.9) << "\" height=\"" << fmt(top + plot_h - y)
          << "\" fill=\"" << kPalette[i % 6] << "\"/>\n";
      const double lo = y_of(std::max(0.0, b.mean - b.std_dev));
      const double hi = y_of(b.mean + b.std_dev);
      const double cx = x + bar_w * 0.45;
      svg << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(lo) << "\" x2=\""
          << fmt(cx) << "\" y2=\"" << fmt(hi)
          << "\" stroke=\"#333333\" stroke-width=\"1.5\"/>\n";
      for (double ey : {lo, hi}) {
        svg << "<line x1=\"" << fmt(cx - 4) << "\" y1=\"" << fmt(ey)
            << "\" x2=\"" << fmt(cx + 4) << "\" y2=\"" << fmt(ey)
            << "\" stroke=\"#333333\" stroke-width=\"1.5\"/>\n";
      }
    }
  }

  svg << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + plot_h)
      << "\" x2=\"" << fmt(left + plot_w) << "\" y2=\"" << fmt(top + plot_h)
      << "\" stroke=\"#222222\" stroke-width=\"1\"/>\n";

  for (std::size_t i = 0; i < m; ++i) {
    const double ly = top + 16.0 * static_cast<double>(i);
    svg << "<rect x=\"" << fmt(width - right + 14) << "\" y=\"" << fmt(ly)
        << "\" width=\"12\" height=\"12\" fill=\"" << kPalette[i % 6]
        << "\"/>\n";
    svg << "<text x=\"" << fmt(width - right + 32) << "\" y=\"" << fmt(ly + 10)
        << "\" font-family=\"sans-serif\" font-size=\"12\" "
           "fill=\"#222222\">" << methods[i].first << "</text>\n";
  }

  svg << "</svg>\n";
  return svg.str();
}

std::string render_report_csv(const NamedReports& methods) {
  std::ostringstream csv;
  csv << "method,metric,mean,std,clips\n";
  for (const auto& b : collect_bars(methods)) {
    csv << b.method << "," << b.metric << "," << json(b.mean).dump() << ","
        << json(b.std_dev).dump() << "," << b.clips << "\n";
  }
  return csv.str();
}

}  // namespace pgnd
