#include "pgnd/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "json.hpp"
#include "pgnd/error.hpp"
#include "pgnd/metrics.hpp"

namespace pgnd {

using nlohmann::json;

namespace {

void validate_config(const MppiConfig& c) {
  if (c.samples < 2) throw ParamError("mppi: need at least 2 samples");
  if (!(c.beta > 0.0)) throw ParamError("mppi: temperature must be > 0");
  if (c.iterations < 1) throw ParamError("mppi: need at least 1 iteration");
  if (c.trans_std < 0.0 || c.rot_std < 0.0) {
    throw ParamError("mppi: sampling deviations must be >= 0");
  }
}

void validate_problem(const PlanProblem& p) {
  if (p.horizon < 1) throw ParamError("plan: horizon must be >= 1");
  if (p.initial.x.empty()) throw ContractError("plan: empty initial cloud");
  if (p.target.empty()) throw ContractError("plan: empty target cloud");
  const std::size_t arms = p.hold.arms.size();
  if (p.space == ActionSpace::Translation3 && arms != 1) {
    throw ShapeError("plan: single-arm action space needs exactly 1 arm, got " +
                     std::to_string(arms));
  }
  if (p.space == ActionSpace::Bimanual12) {
    if (arms != 2) {
      throw ShapeError("plan: bimanual action space needs exactly 2 arms, got " +
                       std::to_string(arms));
    }
    if (!(p.gripper_limit > 0.0)) {
      throw ParamError("plan: gripper distance limit must be > 0");
    }
  }
}

Quat axis_angle(const Vec3& v) {
  const double angle = v.norm();
  if (angle < 1e-300) return Quat::Identity();
  return Quat(Eigen::AngleAxisd(angle, v / angle));
}

}  // namespace

int dof_count(ActionSpace space) {
  return space == ActionSpace::Translation3 ? 3 : 12;
}

RollFn model_roll(const DynamicsModel& model, const RunConfig& config) {
  return [&model, config](const ParticleState& init,
                          const std::vector<Action>& actions) {
    std::vector<ParticleState> states = rollout(init, actions, model, config);
    std::vector<Points> out;
    out.reserve(states.size());
    for (auto& s : states) out.push_back(std::move(s.x));
    return out;
  };
}

std::vector<std::vector<double>> sample_deltas(ActionSpace space,
                                               const MppiConfig& config,
                                               Rng* rng) {
  validate_config(config);
  Rng local(config.seed);
  Rng& r = rng ? *rng : local;
  const int dof = dof_count(space);
  std::vector<std::vector<double>> out(
      static_cast<std::size_t>(config.samples), std::vector<double>(dof));
  for (auto& d : out) {
    for (int k = 0; k < dof; ++k) {
      const bool rotation = space == ActionSpace::Bimanual12 && k % 6 >= 3;
      d[k] = r.normal() * (rotation ? config.rot_std : config.trans_std);
    }
  }
  return out;
}

std::vector<Action> apply_delta(const std::vector<Action>& nominal,
                                const std::vector<double>& delta,
                                ActionSpace space, double dt) {
  if (!(dt > 0.0)) throw ParamError("apply_delta: dt must be > 0");
  if (static_cast<int>(delta.size()) != dof_count(space)) {
    throw ShapeError("apply_delta: " + std::to_string(delta.size()) +
                     " deltas for a " + std::to_string(dof_count(space)) +
                     "-DoF action space");
  }
  const int per_arm = space == ActionSpace::Translation3 ? 3 : 6;
  const std::size_t arms = space == ActionSpace::Translation3 ? 1 : 2;
  std::vector<Action> out = nominal;
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (out[t].arms.size() != arms) {
      throw ShapeError("apply_delta: action " + std::to_string(t) + " has " +
                       std::to_string(out[t].arms.size()) + " arms, expected " +
                       std::to_string(arms));
    }
    const double ramp = static_cast<double>(t + 1);
    for (std::size_t a = 0; a < arms; ++a) {
      ArmAction& arm = out[t].arms[a];
      const std::size_t base = a * static_cast<std::size_t>(per_arm);
      const Vec3 dx(delta[base], delta[base + 1], delta[base + 2]);
      arm.pos += ramp * dx;
      arm.vel += dx / dt;
      if (per_arm == 6) {
        const Vec3 dr(delta[base + 3], delta[base + 4], delta[base + 5]);
        arm.rot = axis_angle(ramp * dr) * arm.rot;
        arm.rot.normalize();
        arm.omega += dr / dt;
      }
    }
  }
  return out;
}

std::vector<std::vector<Action>> sample_action_trajectories(
    const std::vector<Action>& nominal, ActionSpace space,
    const MppiConfig& config, double dt, Rng* rng) {
  if (nominal.empty()) {
    throw ContractError("sample trajectories: empty nominal sequence");
  }
  std::vector<std::vector<Action>> out;
  for (auto& d : sample_deltas(space, config, rng)) {
    out.push_back(apply_delta(nominal, d, space, dt));
  }
  return out;
}

double trajectory_cost(const std::vector<Action>& actions,
                       const PlanProblem& problem, const RollFn& roll) {
  validate_problem(problem);
  if (actions.empty()) throw ContractError("trajectory cost: no actions");
  double penalty = 0.0;
  if (problem.space == ActionSpace::Bimanual12) {
    for (const auto& act : actions) {
      if (act.arms.size() != 2) {
        throw ShapeError("trajectory cost: bimanual actions need 2 arms");
      }
      if ((act.arms[0].pos - act.arms[1].pos).norm() > problem.gripper_limit) {
        penalty = 1e3;
        break;
      }
    }
  }
  std::vector<Points> pred;
  try {
    pred = roll(problem.initial, actions);
  } catch (const std::runtime_error&) {
    // A rollout that leaves the supported domain makes this sample
    // unusable, not the whole plan: cost it out of the update.
    return std::numeric_limits<double>::infinity();
  }
  if (pred.size() != actions.size()) {
    throw ContractError("trajectory cost: rollout returned " +
                        std::to_string(pred.size()) + " clouds for " +
                        std::to_string(actions.size()) + " steps");
  }
  double cost = penalty;
  for (const auto& cloud : pred) cost += chamfer(cloud, problem.target);
  return cost;
}

double trajectory_cost(const std::vector<Action>& actions,
                       const PlanProblem& problem, const DynamicsModel& model,
                       const RunConfig& config) {
  return trajectory_cost(actions, problem, model_roll(model, config));
}

std::vector<double> mppi_weights(const std::vector<double>& costs,
                                 double beta) {
  if (!(beta > 0.0)) throw ParamError("mppi: temperature must be > 0");
  if (costs.empty()) throw ContractError("mppi: no costs to weight");
  double min_cost = std::numeric_limits<double>::infinity();
  for (double c : costs) {
    if (std::isfinite(c)) min_cost = std::min(min_cost, c);
  }
  if (!std::isfinite(min_cost)) {
    throw PlanningError("mppi: every sampled trajectory failed to roll out");
  }
  std::vector<double> w(costs.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (std::isfinite(costs[i])) {
      w[i] = std::exp(-(costs[i] - min_cost) / beta);
      sum += w[i];
    }
  }
  for (double& x : w) x /= sum;
  return w;
}

PlanResult mppi_plan(const PlanProblem& problem, const MppiConfig& config,
                     const RollFn& roll, double dt, Rng* rng) {
  validate_problem(problem);
  validate_config(config);
  if (!(dt > 0.0)) throw ParamError("mppi: dt must be > 0");
  Rng local(config.seed);
  Rng& r = rng ? *rng : local;
  const int dof = dof_count(problem.space);

  PlanResult result;
  result.actions.assign(static_cast<std::size_t>(problem.horizon),
                        problem.hold);
  for (int it = 0; it < config.iterations; ++it) {
    const std::vector<std::vector<double>> deltas =
        sample_deltas(problem.space, config, &r);
    std::vector<double> costs(deltas.size());
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      costs[i] = trajectory_cost(
          apply_delta(result.actions, deltas[i], problem.space, dt), problem,
          roll);
    }
    std::vector<double> w;
    try {
      w = mppi_weights(costs, config.beta);
    } catch (const PlanningError&) {
      throw PlanningError("mppi: all " + std::to_string(deltas.size()) +
                          " samples failed to roll out at iteration " +
                          std::to_string(it + 1));
    }
    // Weighted averaging happens on the per-DoF deltas; ramping the averaged
    // delta equals averaging the sampled trajectories for translations and
    // defines the composition for rotations.
    std::vector<double> mean(static_cast<std::size_t>(dof), 0.0);
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      for (int k = 0; k < dof; ++k) mean[k] += w[i] * deltas[i][k];
    }
    result.actions = apply_delta(result.actions, mean, problem.space, dt);
    result.cost_trace.push_back(trajectory_cost(result.actions, problem, roll));
  }
  return result;
}

PlanResult mppi_plan(const PlanProblem& problem, const MppiConfig& config,
                     const DynamicsModel& model, const RunConfig& run,
                     Rng* rng) {
  return mppi_plan(problem, config, model_roll(model, run), run.dt, rng);
}

MpcResult mpc_loop(const OracleScene& env, const PlanProblem& problem,
                   const MppiConfig& config, const RollFn& roll,
                   const RunConfig& run, const MpcOptions& opt) {
  validate_problem(problem);
  validate_config(config);
  if (opt.steps < 1) throw ParamError("mpc: need at least 1 step");
  if (!(run.dt > 0.0)) throw ParamError("mpc: frame interval must be > 0");
  if (env.x.empty()) throw ContractError("mpc: empty environment");
  const int sub = static_cast<int>(std::lround(run.dt / env.dt_sim));
  if (sub < 1 || std::abs(sub * env.dt_sim - run.dt) > 1e-9) {
    throw ParamError("mpc: frame interval must be a positive multiple of the "
                     "simulation step");
  }

  MpcResult result;
  result.scene = env;
  OracleScene& scene = result.scene;
  const int n = scene.n();

  // Resolve which environment particle each grasped arm drives.
  std::vector<int> grasp(problem.hold.arms.size(), -1);
  if (!opt.grasp_particles.empty()) {
    if (opt.grasp_particles.size() != problem.hold.arms.size()) {
      throw ShapeError("mpc: " + std::to_string(opt.grasp_particles.size()) +
                       " grasp indices for " +
                       std::to_string(problem.hold.arms.size()) + " arms");
    }
    grasp = opt.grasp_particles;
  }
  for (std::size_t a = 0; a < problem.hold.arms.size(); ++a) {
    if (problem.hold.arms[a].mode != ArmMode::Grasped) continue;
    if (opt.grasp_particles.empty()) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        const double d = (scene.x[i] - problem.hold.arms[a].pos).norm();
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      grasp[a] = best;
    } else if (grasp[a] < 0 || grasp[a] >= n) {
      throw ParamError("mpc: grasped arm " + std::to_string(a) +
                       " needs a particle index in [0, " + std::to_string(n) +
                       ")");
    }
  }

  // The planner owns arm twists in closed loop; poses track execution.
  std::vector<ArmAction> arms = problem.hold.arms;
  for (auto& arm : arms) {
    arm.vel = Vec3::Zero();
    arm.omega = Vec3::Zero();
  }

  std::vector<Points> vhist(static_cast<std::size_t>(run.history) + 1,
                            Points(static_cast<std::size_t>(n), Vec3::Zero()));
  result.error_curve.push_back(chamfer(scene.x, problem.target));
  Rng rng(config.seed);

  for (int cycle = 0; cycle < opt.steps; ++cycle) {
    PlanProblem p = problem;
    p.initial.x = scene.x;
    p.initial.vel_history = vhist;
    p.initial.t = cycle * run.dt;
    p.hold.arms = arms;
    const PlanResult plan = mppi_plan(p, config, roll, run.dt, &rng);
    const Action& act = plan.actions.front();
    result.executed.push_back(act);

    std::vector<GripperScript> scripts;
    for (std::size_t a = 0; a < arms.size(); ++a) {
      if (problem.hold.arms[a].mode != ArmMode::Grasped) continue;
      GripperScript s;
      const Vec3 anchor = scene.x[static_cast<std::size_t>(grasp[a])];
      s.waypoints = {anchor, anchor + run.dt * act.arms[a].vel};
      s.duration = run.dt;
      s.grasp_particle = grasp[a];
      s.open = act.arms[a].open;
      scripts.push_back(s);
    }

    const Points prev = scene.x;
    scene.t = 0.0;
    for (int s = 0; s < sub; ++s) oracle_step(scene, scripts, scene.dt_sim);

    Points v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      v[static_cast<std::size_t>(i)] =
          (scene.x[static_cast<std::size_t>(i)] -
           prev[static_cast<std::size_t>(i)]) /
          run.dt;
    }
    vhist.erase(vhist.begin());
    vhist.push_back(std::move(v));

    for (std::size_t a = 0; a < arms.size(); ++a) {
      arms[a].pos += run.dt * act.arms[a].vel;
      arms[a].rot = act.arms[a].rot;
    }
    result.error_curve.push_back(chamfer(scene.x, problem.target));
  }
  return result;
}

MpcResult mpc_loop(const OracleScene& env, const PlanProblem& problem,
                   const MppiConfig& config, const DynamicsModel& model,
                   const RunConfig& run, const MpcOptions& opt) {
  return mpc_loop(env, problem, config, model_roll(model, run), run, opt);
}

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json action_json(const Action& action) {
  json arms = json::array();
  for (const auto& a : action.arms) {
    json arm;
    arm["mode"] = a.mode == ArmMode::Grasped ? "grasped" : "nonprehensile";
    arm["pos"] = vec3_json(a.pos);
    arm["rot"] = json::array({a.rot.w(), a.rot.x(), a.rot.y(), a.rot.z()});
    arm["vel"] = vec3_json(a.vel);
    arm["omega"] = vec3_json(a.omega);
    arm["open"] = a.open;
    arms.push_back(arm);
  }
  return json{{"arms", arms}};
}

}  // namespace

void save_plan_json(const std::string& path, const PlanResult& plan,
                    const std::vector<double>& error_curve) {
  json j;
  j["actions"] = json::array();
  for (const auto& a : plan.actions) j["actions"].push_back(action_json(a));
  j["cost_trace"] = plan.cost_trace;
  j["error_curve"] = error_curve;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write plan: " + path);
  out << j.dump(2) << "\n";
}

void save_error_csv(const std::string& path, const std::vector<double>& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write error curve: " + path);
  out << "step,cd\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out << i << "," << json(curve[i]).dump() << "\n";
  }
}

}  // namespace pgnd
