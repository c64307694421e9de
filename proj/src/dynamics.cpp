#include "pgnd/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "pgnd/error.hpp"

namespace pgnd {

using tg::Tensor;

DynamicsModel make_model(const ModelDims& dims, ModelMode mode, Rng& rng,
                         bool requires_grad) {
  if (dims.history < 0 || dims.feat <= 0 || dims.enc_hidden <= 0 ||
      dims.field_hidden <= 0 || dims.freqs <= 0) {
    throw ParamError("make_model: non-positive dimension");
  }
  DynamicsModel m;
  m.dims = dims;
  m.mode = mode;
  m.enc = make_encoder({dims.enc_in(), dims.enc_hidden, dims.feat}, rng,
                       requires_grad);
  m.field = make_field({dims.freqs, dims.feat, dims.field_hidden}, rng,
                       requires_grad);
  return m;
}

std::vector<Tensor> model_params(const DynamicsModel& model) {
  std::vector<Tensor> out;
  for (auto& t : tg::mlp_params(model.enc.point)) out.push_back(t);
  for (auto& t : tg::mlp_params(model.enc.mix)) out.push_back(t);
  for (auto& t : tg::mlp_params(model.field.mlp)) out.push_back(t);
  return out;
}

namespace {

void push_mlp(tg::NamedTensors& out, const std::string& prefix, const tg::Mlp& mlp) {
  for (std::size_t i = 0; i < mlp.W.size(); ++i) {
    out.emplace_back(prefix + ".W" + std::to_string(i), mlp.W[i]);
    out.emplace_back(prefix + ".b" + std::to_string(i), mlp.b[i]);
  }
}

Points tensor_points(const Tensor& t) {
  Points out;
  const std::int64_t n = t.shape()[0];
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    out.push_back(Vec3(t.at(i, 0), t.at(i, 1), t.at(i, 2)));
  }
  return out;
}

Tensor points_tensor(const Points& p, bool requires_grad = false) {
  std::vector<double> v;
  v.reserve(p.size() * 3);
  for (const auto& x : p) {
    v.push_back(x.x());
    v.push_back(x.y());
    v.push_back(x.z());
  }
  return Tensor::from(std::move(v), {static_cast<std::int64_t>(p.size()), 3},
                      requires_grad);
}

}  // namespace

tg::NamedTensors model_named(const DynamicsModel& model) {
  tg::NamedTensors out;
  push_mlp(out, "enc.point", model.enc.point);
  push_mlp(out, "enc.mix", model.enc.mix);
  push_mlp(out, "field", model.field.mlp);
  Tensor meta = Tensor::from(
      {static_cast<double>(model.dims.history),
       static_cast<double>(model.dims.feat),
       static_cast<double>(model.dims.enc_hidden),
       static_cast<double>(model.dims.field_hidden),
       static_cast<double>(model.dims.freqs),
       static_cast<double>(static_cast<int>(model.mode))},
      {6}, false);
  out.emplace_back("meta", meta);
  return out;
}

void save_model(const std::string& path, const DynamicsModel& model) {
  tg::save_checkpoint(path, model_named(model));
}

DynamicsModel load_model(const std::string& path, bool requires_grad) {
  tg::NamedTensors stored = tg::load_checkpoint(path);
  auto find = [&](const std::string& name) -> Tensor* {
    for (auto& [n, t] : stored) {
      if (n == name) return &t;
    }
    return nullptr;
  };
  Tensor* meta = find("meta");
  if (!meta || meta->size() != 6) {
    throw FormatError("model checkpoint: missing or malformed meta record");
  }
  ModelDims dims;
  dims.history = static_cast<int>(meta->data()[0]);
  dims.feat = static_cast<int>(meta->data()[1]);
  dims.enc_hidden = static_cast<int>(meta->data()[2]);
  dims.field_hidden = static_cast<int>(meta->data()[3]);
  dims.freqs = static_cast<int>(meta->data()[4]);
  const int mode_i = static_cast<int>(meta->data()[5]);
  if (mode_i != 0 && mode_i != 1) {
    throw FormatError("model checkpoint: unknown mode " + std::to_string(mode_i));
  }
  Rng rng(0);
  DynamicsModel model = make_model(
      dims, mode_i == 0 ? ModelMode::Grid : ModelMode::Particle, rng,
      requires_grad);
  for (auto& [name, param] : model_named(model)) {
    if (name == "meta") continue;
    Tensor* src = find(name);
    if (!src) throw FormatError("model checkpoint: missing tensor " + name);
    if (src->shape() != param.shape()) {
      throw FormatError("model checkpoint: tensor " + name + " is " +
                        tg::shape_str(src->shape()) + ", expected " +
                        tg::shape_str(param.shape()));
    }
    param.data() = src->data();
  }
  return model;
}

RobotParticles augment_robot_particles(const ArmAction& arm, int per_gripper) {
  if (per_gripper <= 0 || per_gripper % 2 != 0) {
    throw ParamError("augment_robot_particles: per_gripper must be positive and even");
  }
  const double qn = std::sqrt(arm.rot.squaredNorm());
  if (qn < 1e-12) {
    throw ValidationError("augment_robot_particles: zero quaternion");
  }
  const Eigen::Matrix3d R = arm.rot.normalized().toRotationMatrix();

  // Two box fingers on a 2 x 2 x L lattice each, hanging below the wrist in
  // the local frame; the opening width separates the fingers along local y.
  const int per_finger = per_gripper / 2;
  const int levels = (per_finger + 3) / 4;
  const double half_sep = 0.5 * arm.open + 0.004;
  RobotParticles out;
  out.x.reserve(static_cast<std::size_t>(per_gripper));
  out.v.reserve(static_cast<std::size_t>(per_gripper));
  for (int side = -1; side <= 1; side += 2) {
    int count = 0;
    for (int zi = 0; zi < levels && count < per_finger; ++zi) {
      const double z = levels > 1 ? -0.06 * zi / (levels - 1) : -0.03;
      for (int xi = 0; xi < 2 && count < per_finger; ++xi) {
        for (int yi = 0; yi < 2 && count < per_finger; ++yi) {
          const Vec3 local(xi == 0 ? -0.008 : 0.008,
                           side * half_sep + (yi == 0 ? -0.004 : 0.004), z);
          const Vec3 x = R * local + arm.pos;
          out.x.push_back(x);
          out.v.push_back(arm.omega.cross(x - arm.pos) + arm.vel);
          ++count;
        }
      }
    }
  }
  return out;
}

TensorState to_tensor_state(const ParticleState& state, bool requires_grad) {
  TensorState out;
  out.x = points_tensor(state.x, requires_grad);
  for (const auto& frame : state.vel_history) {
    out.vel_history.push_back(points_tensor(frame, requires_grad));
  }
  out.t = state.t;
  return out;
}

ParticleState to_particle_state(const TensorState& state) {
  ParticleState out;
  out.x = tensor_points(state.x);
  for (const auto& frame : state.vel_history) {
    out.vel_history.push_back(tensor_points(frame));
  }
  out.t = state.t;
  return out;
}

Tensor predict_velocity_t(const TensorState& state, const Action& action,
                          const DynamicsModel& model, const RunConfig& config) {
  const std::int64_t n = state.n();
  if (n == 0) throw ContractError("predict_velocity: empty particle set");
  const int h = model.dims.history;
  if (static_cast<int>(state.vel_history.size()) != h + 1) {
    throw ContractError("predict_velocity: " +
                        std::to_string(state.vel_history.size()) +
                        " history frames, model expects " + std::to_string(h + 1));
  }
  for (const auto& frame : state.vel_history) {
    if (frame.shape() != state.x.shape()) {
      throw ShapeError("predict_velocity: history frame " +
                       tg::shape_str(frame.shape()) + " vs positions " +
                       tg::shape_str(state.x.shape()));
    }
  }

  Grid grid;
  grid.l = config.grid_l;
  grid.dx = config.grid_dx;

  // Robot particles from every pushing arm; grasped arms act on the grid.
  Points robot_x, robot_v;
  for (const auto& arm : action.arms) {
    if (arm.mode == ArmMode::Nonprehensile) {
      RobotParticles rp = augment_robot_particles(arm);
      robot_x.insert(robot_x.end(), rp.x.begin(), rp.x.end());
      robot_v.insert(robot_v.end(), rp.v.begin(), rp.v.end());
    }
  }
  const std::int64_t m = static_cast<std::int64_t>(robot_x.size());

  // Frame offset from the object cloud alone; the same shift moves robot
  // particles and grasp centers so relative geometry is untouched.
  Points obj_world = tensor_points(state.x);
  normalize_to_grid(grid, obj_world, {});  // capacity check with diagnostics
  Tensor off = normalize_offset_t(grid, state.x);   // [1 x 3]
  Tensor off3 = tg::reshape(off, {3});
  Tensor pos_obj = tg::add_rowvec(state.x, off3);   // [n x 3]
  const Vec3 off_num(off.at(0, 0), off.at(0, 1), off.at(0, 2));

  Points obj_grid;
  obj_grid.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    obj_grid.push_back(Vec3(pos_obj.at(i, 0), pos_obj.at(i, 1), pos_obj.at(i, 2)));
  }

  // Encoder input rows: object particles first, then robot particles.
  Tensor enc_pos = pos_obj;
  Tensor robot_pos_t;
  if (m > 0) {
    robot_pos_t = tg::add_rowvec(points_tensor(robot_x), off3);
    enc_pos = tg::concat_rows({pos_obj, robot_pos_t});
  }
  std::vector<Tensor> cols = {enc_pos};
  Tensor robot_v_t = m > 0 ? points_tensor(robot_v) : Tensor();
  for (const auto& frame : state.vel_history) {
    cols.push_back(m > 0 ? tg::concat_rows({frame, robot_v_t}) : frame);
  }
  std::vector<double> tag(static_cast<std::size_t>(n + m), 0.0);
  for (std::int64_t i = n; i < n + m; ++i) tag[static_cast<std::size_t>(i)] = 1.0;
  cols.push_back(Tensor::from(std::move(tag), {n + m, 1}, false));
  Tensor features = encode_points_t(model.enc, tg::concat_cols(cols));

  Points pool_pos = obj_grid;
  if (m > 0) {
    for (std::int64_t i = 0; i < m; ++i) {
      pool_pos.push_back(Vec3(robot_pos_t.at(i, 0), robot_pos_t.at(i, 1),
                              robot_pos_t.at(i, 2)));
    }
  }

  const double ground_grid = config.ground_z + off_num.z();

  Tensor velocities;           // [q x 3] at the query set
  std::vector<Vec3> query_pos; // numeric positions of the queries
  ActiveSet active;
  if (model.mode == ModelMode::Grid) {
    active = build_active_set(grid, obj_grid);
    query_pos.reserve(static_cast<std::size_t>(active.size()));
    for (auto id : active.nodes) query_pos.push_back(grid.node_pos(id));
    Tensor pooled = pool_local_t(features, pool_pos, query_pos, config.radius);
    velocities = field_eval_t(model.field, points_tensor(query_pos), pooled);
  } else {
    query_pos = obj_grid;
    Tensor pooled = pool_local_t(features, pool_pos, query_pos, config.radius);
    velocities = field_eval_t(model.field, pos_obj, pooled);
  }

  // Contact first, then grasp constraints, so a grasp wins where they overlap.
  std::vector<double> query_z;
  query_z.reserve(query_pos.size());
  for (const auto& p : query_pos) query_z.push_back(p.z());
  velocities = gve_ground_t(velocities, query_z, ground_grid, grid.dx,
                            config.friction);
  for (const auto& arm : action.arms) {
    if (arm.mode != ArmMode::Grasped) continue;
    Tensor center = tg::add(
        Tensor::from({arm.pos.x(), arm.pos.y(), arm.pos.z()}, {1, 3}, false),
        off);
    velocities = gve_grasp_t(velocities, query_pos, center, arm.omega, arm.vel,
                             config.grasp_radius);
  }

  if (model.mode == ModelMode::Grid) {
    return g2p_t(grid, active, velocities, pos_obj);
  }
  return velocities;
}

TensorState step_t(const TensorState& state, const Action& action,
                   const DynamicsModel& model, const RunConfig& config) {
  Tensor v = predict_velocity_t(state, action, model, config);
  TensorState next;
  next.x = tg::add(state.x, tg::mul_scalar(v, config.dt));
  next.vel_history.assign(state.vel_history.begin() + 1,
                          state.vel_history.end());
  next.vel_history.push_back(v);
  next.t = state.t + config.dt;
  return next;
}

std::vector<TensorState> rollout_t(const TensorState& state,
                                   const std::vector<Action>& actions,
                                   const DynamicsModel& model,
                                   const RunConfig& config) {
  if (actions.empty()) throw ParamError("rollout: empty action sequence");
  std::vector<TensorState> out;
  out.reserve(actions.size());
  const TensorState* cur = &state;
  for (std::size_t k = 0; k < actions.size(); ++k) {
    TensorState next = step_t(*cur, actions[k], model, config);
    for (double v : next.x.data()) {
      if (!std::isfinite(v)) {
        throw BlowupError("rollout: non-finite positions after step " +
                          std::to_string(k + 1));
      }
    }
    out.push_back(std::move(next));
    cur = &out.back();
  }
  return out;
}

Points predict_velocity(const ParticleState& state, const Action& action,
                        const DynamicsModel& model, const RunConfig& config) {
  Tensor v = predict_velocity_t(to_tensor_state(state), action, model, config);
  return tensor_points(v);
}

ParticleState step(const ParticleState& state, const Action& action,
                   const DynamicsModel& model, const RunConfig& config) {
  return to_particle_state(step_t(to_tensor_state(state), action, model, config));
}

std::vector<ParticleState> rollout(const ParticleState& state,
                                   const std::vector<Action>& actions,
                                   const DynamicsModel& model,
                                   const RunConfig& config) {
  std::vector<TensorState> ts =
      rollout_t(to_tensor_state(state), actions, model, config);
  std::vector<ParticleState> out;
  out.reserve(ts.size());
  for (const auto& s : ts) out.push_back(to_particle_state(s));
  return out;
}

}  // namespace pgnd
