#include "pgnd/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

#include "json.hpp"
#include "pgnd/config.hpp"
#include "pgnd/dataset.hpp"
#include "pgnd/error.hpp"
#include "pgnd/synth.hpp"

namespace pgnd {

using nlohmann::json;
using tg::Tensor;

namespace {

Tensor const_points(const Points& p) {
  std::vector<double> v;
  v.reserve(p.size() * 3);
  for (const auto& x : p) {
    v.push_back(x.x());
    v.push_back(x.y());
    v.push_back(x.z());
  }
  return Tensor::from(std::move(v),
                      {static_cast<std::int64_t>(p.size()), 3}, false);
}

// Cameras used for visibility masking: the configured rig, or a default rig
// aimed at the cloud being masked.
std::vector<CameraSpec> masking_rig(const RunConfig& config,
                                    const Points& cloud) {
  if (!config.cameras.empty()) return config.cameras;
  Vec3 c = Vec3::Zero();
  for (const auto& p : cloud) c += p;
  if (!cloud.empty()) c /= static_cast<double>(cloud.size());
  return default_camera_rig(c);
}

}  // namespace

tg::Tensor loss_rollout_t(const TrajectoryWindow& window,
                          const DynamicsModel& model,
                          const RunConfig& config) {
  const int h = config.history;
  const int total = static_cast<int>(window.tracks.size());
  if (total < h + 2) {
    throw ContractError("rollout loss: window has " + std::to_string(total) +
                        " frames, needs at least " + std::to_string(h + 2));
  }
  if (static_cast<int>(window.actions.size()) != total) {
    throw ShapeError("rollout loss: " + std::to_string(window.actions.size()) +
                     " actions for " + std::to_string(total) + " frames");
  }
  if (static_cast<int>(window.init_vel.size()) != h + 1) {
    throw ShapeError("rollout loss: window carries " +
                     std::to_string(window.init_vel.size()) +
                     " history frames, expected " + std::to_string(h + 1));
  }
  const int K = total - h - 1;
  const std::int64_t n = static_cast<std::int64_t>(window.tracks[h].size());

  ParticleState init;
  init.x = window.tracks[h];
  init.vel_history = window.init_vel;
  init.t = 0.0;
  TensorState state = to_tensor_state(init, false);

  std::vector<Action> actions(window.actions.begin() + h,
                              window.actions.begin() + h + K);
  std::vector<TensorState> rolled = rollout_t(state, actions, model, config);

  Tensor loss = Tensor::zeros({1});
  for (int i = 1; i <= K; ++i) {
    Tensor diff = tg::sub(rolled[i - 1].x, const_points(window.tracks[h + i]));
    Tensor step = tg::mul_scalar(tg::sum(tg::square(diff)),
                                 1.0 / static_cast<double>(n * 3));
    loss = tg::add(loss, step);
  }
  return loss;
}

double loss_rollout(const TrajectoryWindow& window, const DynamicsModel& model,
                    const RunConfig& config) {
  return loss_rollout_t(window, model, config).data()[0];
}

TrajectoryWindow mask_window_views(const TrajectoryWindow& window, int history,
                                   int views, const RunConfig& config,
                                   Rng* camera_choice) {
  if (window.tracks.empty()) throw ContractError("view masking: empty window");
  const Points& initial = window.tracks[history];
  std::vector<CameraSpec> rig = masking_rig(config, initial);
  if (views < 1) throw ParamError("view masking: need at least 1 view");
  if (views >= static_cast<int>(rig.size())) return window;

  std::vector<int> cams(rig.size());
  std::iota(cams.begin(), cams.end(), 0);
  if (camera_choice) {
    for (int i = static_cast<int>(cams.size()) - 1; i > 0; --i) {
      std::swap(cams[i], cams[camera_choice->uniform_int(0, i)]);
    }
  }
  std::vector<CameraSpec> chosen;
  for (int i = 0; i < views; ++i) chosen.push_back(rig[cams[i]]);

  std::vector<int> keep = visible_indices(initial, chosen);
  if (keep.empty()) return window;  // degenerate view: fall back to the full cloud

  TrajectoryWindow out;
  out.first_frame = window.first_frame;
  auto subset = [&](const Points& p) {
    Points s;
    s.reserve(keep.size());
    for (int i : keep) s.push_back(p[i]);
    return s;
  };
  for (const auto& frame : window.tracks) out.tracks.push_back(subset(frame));
  for (const auto& frame : window.init_vel) {
    out.init_vel.push_back(subset(frame));
  }
  out.actions = window.actions;
  return out;
}

namespace {

std::vector<double> snapshot_params(const DynamicsModel& model) {
  std::vector<double> flat;
  for (const auto& t : model_params(model)) {
    auto& d = const_cast<Tensor&>(t).data();
    flat.insert(flat.end(), d.begin(), d.end());
  }
  return flat;
}

void restore_params(DynamicsModel& model, const std::vector<double>& flat) {
  std::size_t at = 0;
  for (auto& t : model_params(model)) {
    auto& d = t.data();
    std::copy(flat.begin() + at, flat.begin() + at + d.size(), d.begin());
    at += d.size();
  }
}

double clip_mean_metric(const std::vector<double>& per_frame) {
  double s = 0.0;
  for (double v : per_frame) s += v;
  return per_frame.empty() ? 0.0 : s / static_cast<double>(per_frame.size());
}

// Shared rollout evaluation. `roll` maps (initial state, actions) to the
// predicted clouds, one per step.
MetricReport evaluate_with(
    const std::vector<Trajectory>& clips, const RunConfig& config,
    const EvalOptions& opt,
    const std::function<std::vector<Points>(const ParticleState&,
                                            const std::vector<Action>&)>&
        roll) {
  if (clips.empty()) throw ContractError("evaluate: no clips");
  const int h = config.history;
  std::vector<double> mdes, cds, emds;
  for (const auto& clip : clips) {
    const int steps = std::min(opt.max_steps, clip.num_frames() - h - 1);
    if (steps < 1) {
      throw ContractError("evaluate: clip with " +
                          std::to_string(clip.num_frames()) +
                          " frames cannot seed a rollout (history " +
                          std::to_string(h) + ")");
    }
    std::vector<TrajectoryWindow> windows = make_windows(clip, h, steps);
    TrajectoryWindow w = windows.front();
    if (opt.views < 4) {
      w = mask_window_views(w, h, opt.views, config, nullptr);
    }
    ParticleState init;
    init.x = w.tracks[h];
    init.vel_history = w.init_vel;
    init.t = 0.0;
    std::vector<Action> actions(w.actions.begin() + h,
                                w.actions.begin() + h + steps);
    std::vector<Points> pred = roll(init, actions);

    std::vector<double> m, c, e;
    for (int i = 1; i <= steps; ++i) {
      const Points& truth = w.tracks[h + i];
      m.push_back(mde(pred[i - 1], truth));
      c.push_back(chamfer(pred[i - 1], truth));
      e.push_back(emd(pred[i - 1], truth));
    }
    mdes.push_back(clip_mean_metric(m));
    cds.push_back(clip_mean_metric(c));
    emds.push_back(clip_mean_metric(e));
  }
  MetricReport report;
  report.mde = summarize(mdes);
  report.chamfer = summarize(cds);
  report.emd = summarize(emds);
  return report;
}

}  // namespace

MetricReport evaluate_clips(const DynamicsModel& model,
                            const std::vector<Trajectory>& clips,
                            const RunConfig& config, const EvalOptions& opt) {
  return evaluate_with(
      clips, config, opt,
      [&](const ParticleState& init, const std::vector<Action>& actions) {
        std::vector<Points> pred;
        ParticleState s = init;
        for (const auto& a : actions) {
          // If the model drives the cloud outside the supported domain (grid
          // overflow or numeric blow-up), hold the last valid prediction for
          // the remaining steps so the clip still scores — badly — instead
          // of aborting the whole evaluation.
          try {
            s = step(s, a, model, config);
          } catch (const CapacityError&) {
            while (pred.size() < actions.size()) pred.push_back(s.x);
            break;
          } catch (const BlowupError&) {
            while (pred.size() < actions.size()) pred.push_back(s.x);
            break;
          }
          pred.push_back(s.x);
        }
        return pred;
      });
}

MetricReport evaluate_zero_velocity(const std::vector<Trajectory>& clips,
                                    const RunConfig& config,
                                    const EvalOptions& opt) {
  return evaluate_with(
      clips, config, opt,
      [](const ParticleState& init, const std::vector<Action>& actions) {
        return std::vector<Points>(actions.size(), init.x);
      });
}

TrainResult train_model(const std::vector<Trajectory>& trajectories,
                        ModelMode mode, const RunConfig& config,
                        const TrainConfig& tc) {
  if (trajectories.empty()) throw ContractError("train: no trajectories");
  if (tc.steps < 0 || tc.batch_size < 1) {
    throw ParamError("train: steps must be >= 0 and batch size >= 1");
  }

  // 90/10 train/validation split by trajectory (every 10th goes to val).
  std::vector<const Trajectory*> train_trajs, val_trajs;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories.size() >= 2 && (i + 1) % 10 == 0) {
      val_trajs.push_back(&trajectories[i]);
    } else {
      train_trajs.push_back(&trajectories[i]);
    }
  }
  if (val_trajs.empty() && trajectories.size() >= 2) {
    val_trajs.push_back(&trajectories.back());
    train_trajs.pop_back();
  }
  if (val_trajs.empty()) val_trajs.push_back(&trajectories.front());
  if (train_trajs.empty()) train_trajs.push_back(&trajectories.front());

  std::vector<TrajectoryWindow> windows;
  for (const Trajectory* t : train_trajs) {
    for (auto& w : make_windows(*t, config.history, config.horizon)) {
      windows.push_back(std::move(w));
    }
  }
  if (windows.empty()) throw ContractError("train: no training windows");

  std::vector<Trajectory> val_clips;
  for (std::size_t i = 0;
       i < val_trajs.size() && i < static_cast<std::size_t>(tc.val_clips);
       ++i) {
    val_clips.push_back(*val_trajs[i]);
  }

  Rng rng(tc.seed);
  Rng init_rng = rng.split(1);
  Rng shuffle_rng = rng.split(2);
  Rng mask_rng = rng.split(3);

  TrainResult result;
  ModelDims dims = tc.dims;
  dims.history = config.history;
  result.model = make_model(dims, mode, init_rng);
  DynamicsModel& model = result.model;
  // Zero the output layer of the velocity field so the untrained model
  // predicts zero velocity everywhere: early rollouts then stay on the data
  // instead of wandering off the grid, and optimization starts from the
  // rest-state baseline it has to beat.
  std::fill(model.field.mlp.W.back().data().begin(),
            model.field.mlp.W.back().data().end(), 0.0);
  std::vector<Tensor> params = model_params(model);

  tg::AdamState adam;
  adam.lr = tc.lr;
  adam.init(params);

  EvalOptions val_opt;
  val_opt.max_steps = tc.val_rollout;

  result.best_val = std::numeric_limits<double>::infinity();
  std::vector<double> best_snapshot = snapshot_params(model);

  std::vector<int> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // force an initial shuffle

  auto validate = [&](int step) {
    const double v =
        evaluate_clips(model, val_clips, config, val_opt).mde.mean;
    result.val_mde.push_back(v);
    if (std::isfinite(v) && v < result.best_val) {
      result.best_val = v;
      result.best_step = step;
      best_snapshot = snapshot_params(model);
    }
  };

  for (int step = 0; step < tc.steps; ++step) {
    Tensor batch_loss = Tensor::zeros({1});
    bool diverged = false;
    for (int b = 0; b < tc.batch_size && !diverged; ++b) {
      if (cursor >= order.size()) {
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
          std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);
        }
        cursor = 0;
      }
      const TrajectoryWindow& w = windows[order[cursor++]];
      Tensor sample_loss;
      // A rollout that leaves the supported domain (grid overflow or
      // blow-up) is treated like a non-finite loss: stop training and keep
      // the best checkpoint seen so far.
      try {
        if (tc.partial_views) {
          const int views = mask_rng.uniform_int(1, 4);
          TrajectoryWindow masked =
              mask_window_views(w, config.history, views, config, &mask_rng);
          sample_loss = loss_rollout_t(masked, model, config);
        } else {
          sample_loss = loss_rollout_t(w, model, config);
        }
      } catch (const CapacityError&) {
        diverged = true;
        break;
      } catch (const BlowupError&) {
        diverged = true;
        break;
      }
      batch_loss = tg::add(batch_loss, sample_loss);
    }
    batch_loss = tg::mul_scalar(batch_loss, 1.0 / tc.batch_size);

    const double loss_value = batch_loss.data()[0];
    if (diverged || !std::isfinite(loss_value)) {
      result.aborted = true;
      break;
    }
    result.train_loss.push_back(loss_value);

    tg::zero_grads(params);
    tg::backward(batch_loss);
    tg::clip_grad_norm(params, tc.clip);
    tg::adam_step(params, adam);

    if (tc.val_every > 0 && (step + 1) % tc.val_every == 0) {
      validate(step + 1);
    }
  }
  if (result.val_mde.empty() && tc.steps > 0 && !result.aborted) {
    validate(tc.steps);
  }
  if (result.best_step >= 0 || result.aborted) {
    restore_params(model, best_snapshot);
  }
  return result;
}

namespace {

json stat_to_json(const MetricStat& s) {
  json j;
  j["mean"] = s.mean;
  j["std"] = s.std_dev;
  j["per_clip"] = s.per_clip;
  return j;
}

MetricStat stat_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("mean") || !j.contains("std")) {
    throw FormatError("report: " + where + " must hold mean/std");
  }
  MetricStat s;
  s.mean = j.at("mean").get<double>();
  s.std_dev = j.at("std").get<double>();
  if (j.contains("per_clip")) {
    for (const auto& v : j.at("per_clip")) {
      s.per_clip.push_back(v.get<double>());
    }
  }
  return s;
}

json report_to_json(const MetricReport& report) {
  json j;
  j["mde"] = stat_to_json(report.mde);
  j["chamfer"] = stat_to_json(report.chamfer);
  j["emd"] = stat_to_json(report.emd);
  return j;
}

}  // namespace

void save_report_json(const std::string& path, const MetricReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write report: " + path);
  out << report_to_json(report).dump(2) << "\n";
}

void save_report_csv(const std::string& path, const MetricReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write report: " + path);
  out << "metric,mean,std\n";
  json j = report_to_json(report);
  for (const char* name : {"mde", "chamfer", "emd"}) {
    out << name << "," << j[name]["mean"].dump() << ","
        << j[name]["std"].dump() << "\n";
  }
  out << "metric,clip,value\n";
  const MetricStat* stats[] = {&report.mde, &report.chamfer, &report.emd};
  const char* names[] = {"mde", "chamfer", "emd"};
  for (int k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < stats[k]->per_clip.size(); ++i) {
      out << names[k] << "," << i << "," << json(stats[k]->per_clip[i]).dump()
          << "\n";
    }
  }
}

MetricReport load_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read report: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("report " + path + ": " + e.what());
  }
  MetricReport r;
  r.mde = stat_from_json(j.value("mde", json()), "mde");
  r.chamfer = stat_from_json(j.value("chamfer", json()), "chamfer");
  r.emd = stat_from_json(j.value("emd", json()), "emd");
  return r;
}

void save_comparison_json(const std::string& path,
                          const NamedReports& methods) {
  json j;
  j["methods"] = json::object();
  for (const auto& [name, report] : methods) {
    j["methods"][name] = report_to_json(report);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write report: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace pgnd
