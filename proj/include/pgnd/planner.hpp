#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pgnd/dynamics.hpp"
#include "pgnd/rng.hpp"
#include "pgnd/synth.hpp"
#include "pgnd/types.hpp"

namespace pgnd {

// Degrees of freedom the planner searches over.
enum class ActionSpace : int {
  Translation3 = 0,  // one arm, x/y/z translation only
  Bimanual12 = 1,    // two arms, translation + axis-angle rotation each
};

int dof_count(ActionSpace space);

// A manipulation goal: drive the object from `initial` toward `target`.
// `hold` carries the per-arm modes, starting poses, and jaw opening; it is
// replicated across the horizon as the initial nominal action sequence.
struct PlanProblem {
  ParticleState initial;
  Points target;
  ActionSpace space = ActionSpace::Translation3;
  Action hold;
  int horizon = 5;
  double gripper_limit = 0.6;  // max inter-gripper distance (m, bimanual)
};

// Sampling-based trajectory optimization settings. The sampling covariance
// is diagonal: `trans_std` per translation DoF, `rot_std` per rotation DoF.
struct MppiConfig {
  int samples = 64;
  double trans_std = 0.02;  // m
  double rot_std = 0.05;    // rad
  double beta = 0.05;       // cost-weighting temperature (m)
  int iterations = 10;
  std::uint64_t seed = 0;
};

// Rolls a state through an action sequence: one predicted cloud per step.
// Used to decouple the planner from the dynamics model so toy executors can
// stand in for it under test.
using RollFn = std::function<std::vector<Points>(const ParticleState&,
                                                 const std::vector<Action>&)>;

// RollFn backed by the learned model. The model and config must outlive the
// returned functor.
RollFn model_roll(const DynamicsModel& model, const RunConfig& config);

// One Gaussian delta per DoF for each of `config.samples` samples, laid out
// arm-major: [tx ty tz (rx ry rz)] per arm. Draws from `rng` when given,
// otherwise from a fresh generator seeded with `config.seed`.
std::vector<std::vector<double>> sample_deltas(ActionSpace space,
                                               const MppiConfig& config,
                                               Rng* rng = nullptr);

// Builds the perturbed sequence: step t (1-based) shifts each arm position
// by t·delta and composes the ramped axis-angle delta onto its orientation.
// Velocities pick up delta/dt so consecutive commands stay consistent with
// the position ramp.
std::vector<Action> apply_delta(const std::vector<Action>& nominal,
                                const std::vector<double>& delta,
                                ActionSpace space, double dt);

std::vector<std::vector<Action>> sample_action_trajectories(
    const std::vector<Action>& nominal, ActionSpace space,
    const MppiConfig& config, double dt, Rng* rng = nullptr);

// Sum over steps of the Chamfer distance between the predicted cloud and the
// target, plus a one-time 1e3 penalty if any step commands the grippers
// further apart than the problem allows (bimanual only). A rollout failure
// (grid overflow, blow-up) yields +infinity so the sample drops out of the
// update instead of crashing the planner.
double trajectory_cost(const std::vector<Action>& actions,
                       const PlanProblem& problem, const RollFn& roll);
double trajectory_cost(const std::vector<Action>& actions,
                       const PlanProblem& problem, const DynamicsModel& model,
                       const RunConfig& config);

// exp(−(J−J_min)/β), normalized to sum to 1 over the finite costs; infinite
// costs get zero weight. Throws PlanningError when no cost is finite.
std::vector<double> mppi_weights(const std::vector<double>& costs,
                                 double beta);

struct PlanResult {
  std::vector<Action> actions;     // optimized nominal sequence
  std::vector<double> cost_trace;  // nominal cost after each iteration
};

// Iterative sampling optimizer: sample perturbations, cost them, average the
// per-DoF deltas with the exponential weights, and ramp the averaged delta
// onto the nominal. `dt` is the frame interval the actions are executed at.
PlanResult mppi_plan(const PlanProblem& problem, const MppiConfig& config,
                     const RollFn& roll, double dt, Rng* rng = nullptr);
PlanResult mppi_plan(const PlanProblem& problem, const MppiConfig& config,
                     const DynamicsModel& model, const RunConfig& run,
                     Rng* rng = nullptr);

// Closed-loop control against the mass-spring environment.
struct MpcOptions {
  int steps = 15;  // plan / execute / replan cycles
  // Environment particle pinned to each arm (aligned with hold.arms; only
  // grasped arms use theirs). Empty picks the particle nearest each grasped
  // arm's starting pose.
  std::vector<int> grasp_particles;
};

struct MpcResult {
  std::vector<Action> executed;     // first planned action of each cycle
  std::vector<double> error_curve;  // CD to target: initial, then per cycle
  OracleScene scene;                // environment after the last cycle
};

// Replans every cycle from the re-observed environment cloud and executes
// the first planned action by driving each grasped arm's pinned particle
// along the commanded motion. Nonprehensile arms influence only the model's
// predictions — the mass-spring environment has no pushing contact.
MpcResult mpc_loop(const OracleScene& env, const PlanProblem& problem,
                   const MppiConfig& config, const RollFn& roll,
                   const RunConfig& run, const MpcOptions& opt);
MpcResult mpc_loop(const OracleScene& env, const PlanProblem& problem,
                   const MppiConfig& config, const DynamicsModel& model,
                   const RunConfig& run, const MpcOptions& opt);

// {actions, cost_trace, error_curve} as JSON; the error curve alone as
// "step,cd" CSV rows.
void save_plan_json(const std::string& path, const PlanResult& plan,
                    const std::vector<double>& error_curve = {});
void save_error_csv(const std::string& path, const std::vector<double>& curve);

}  // namespace pgnd
