#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pgnd/dynamics.hpp"
#include "pgnd/metrics.hpp"
#include "pgnd/types.hpp"

namespace pgnd {

struct TrainConfig {
  int steps = 2000;          // optimizer steps
  int val_every = 100;       // validation cadence (steps)
  double lr = 1e-4;
  double clip = 1.0;         // global gradient-norm ceiling
  int batch_size = 32;
  bool partial_views = false;  // mask each sample's inputs to 1..4 views
  int val_rollout = 30;        // validation rollout length (frames)
  int val_clips = 4;           // validation trajectories to roll out
  std::uint64_t seed = 0;
  // Network width; `history` inside is overridden by RunConfig::history.
  ModelDims dims;
};

struct TrainResult {
  DynamicsModel model;             // best-validation parameters
  std::vector<double> train_loss;  // one entry per optimizer step
  std::vector<double> val_mde;     // one entry per validation pass
  double best_val = 0.0;
  int best_step = -1;
  bool aborted = false;  // non-finite loss; model holds the last good params
};

// Differentiable rollout loss on one training window: initialize at frame h,
// roll out the remaining frames with the recorded actions, and sum the
// per-step mean squared coordinate errors against the recorded tracks.
tg::Tensor loss_rollout_t(const TrajectoryWindow& window,
                          const DynamicsModel& model, const RunConfig& config);
double loss_rollout(const TrajectoryWindow& window, const DynamicsModel& model,
                    const RunConfig& config);

// Drop the points of a window that fewer than `views` cameras can see at the
// initial frame. Inputs AND supervision targets keep the same surviving
// indices; the returned window is self-consistent.
TrajectoryWindow mask_window_views(const TrajectoryWindow& window, int history,
                                   int views, const RunConfig& config,
                                   Rng* camera_choice = nullptr);

TrainResult train_model(const std::vector<Trajectory>& trajectories,
                        ModelMode mode, const RunConfig& config,
                        const TrainConfig& tc);

struct EvalOptions {
  int views = 4;      // cameras visible to the model's input (4 = full cloud)
  int max_steps = 30; // rollout length cap (frames)
};

// Per-clip rollout metrics: each clip contributes the mean over its rolled-
// out frames of the per-frame metric value.
MetricReport evaluate_clips(const DynamicsModel& model,
                            const std::vector<Trajectory>& clips,
                            const RunConfig& config,
                            const EvalOptions& opt = {});

// The zero-velocity baseline: the predicted cloud never moves.
MetricReport evaluate_zero_velocity(const std::vector<Trajectory>& clips,
                                    const RunConfig& config,
                                    const EvalOptions& opt = {});

// Report files: JSON {metric: {mean, std, per_clip}} and a CSV mirror.
void save_report_json(const std::string& path, const MetricReport& report);
void save_report_csv(const std::string& path, const MetricReport& report);
MetricReport load_report_json(const std::string& path);

// Multi-method comparison file for plotting: {"methods": {name: report}}.
using NamedReports = std::vector<std::pair<std::string, MetricReport>>;
void save_comparison_json(const std::string& path, const NamedReports& methods);

}  // namespace pgnd
