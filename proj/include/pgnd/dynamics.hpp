#pragma once

#include <string>
#include <vector>

#include "pgnd/checkpoint.hpp"
#include "pgnd/encoder.hpp"
#include "pgnd/gridops.hpp"
#include "pgnd/tensor.hpp"
#include "pgnd/types.hpp"

namespace pgnd {

// ---------------------------------------------------------------------------
// Model: point encoder + velocity-field MLP, evaluated either on the grid
// (with velocity editing and B-spline transfer back to particles) or directly
// at particle positions (the grid-free ablation).
// ---------------------------------------------------------------------------

enum class ModelMode { Grid = 0, Particle = 1 };

struct ModelDims {
  int history = 2;       // h: past velocity frames kept alongside the current
  int feat = 64;         // d: encoder output / pooled feature size
  int enc_hidden = 64;   // per-point MLP width
  int field_hidden = 128;
  int freqs = 6;         // positional-encoding frequencies

  int enc_in() const { return 3 + 3 * (history + 1) + 1; }  // pos+velos+tag
};

struct DynamicsModel {
  ModelDims dims;
  ModelMode mode = ModelMode::Grid;
  EncoderParams enc;
  FieldParams field;
};

DynamicsModel make_model(const ModelDims& dims, ModelMode mode, Rng& rng,
                         bool requires_grad = true);

// Trainable leaves in a stable order (encoder first, then field).
std::vector<tg::Tensor> model_params(const DynamicsModel& model);
// The same leaves with stable names, plus a "meta" tensor describing the
// architecture so a checkpoint is self-contained.
tg::NamedTensors model_named(const DynamicsModel& model);

void save_model(const std::string& path, const DynamicsModel& model);
DynamicsModel load_model(const std::string& path, bool requires_grad = false);

// ---------------------------------------------------------------------------
// Robot-particle augmentation for nonprehensile pushing: a deterministic
// lattice over two box fingers, moved rigidly by the end-effector pose, with
// velocities from the commanded twist.
// ---------------------------------------------------------------------------

struct RobotParticles {
  Points x;  // world frame
  Points v;  // rigid-motion velocities
};

RobotParticles augment_robot_particles(const ArmAction& arm,
                                       int per_gripper = 32);

// ---------------------------------------------------------------------------
// Differentiable state for training rollouts.
// ---------------------------------------------------------------------------

struct TensorState {
  tg::Tensor x;                          // [n x 3], world frame
  std::vector<tg::Tensor> vel_history;   // h+1 entries of [n x 3], oldest first
  double t = 0.0;

  std::int64_t n() const { return x.shape()[0]; }
};

TensorState to_tensor_state(const ParticleState& state,
                            bool requires_grad = false);
ParticleState to_particle_state(const TensorState& state);

// Predicted object-particle velocities, [n x 3]. Robot particles participate
// in the features but are never part of the output.
tg::Tensor predict_velocity_t(const TensorState& state, const Action& action,
                              const DynamicsModel& model,
                              const RunConfig& config);

TensorState step_t(const TensorState& state, const Action& action,
                   const DynamicsModel& model, const RunConfig& config);

std::vector<TensorState> rollout_t(const TensorState& state,
                                   const std::vector<Action>& actions,
                                   const DynamicsModel& model,
                                   const RunConfig& config);

// ---------------------------------------------------------------------------
// Plain (tape-free) wrappers used for inference and planning.
// ---------------------------------------------------------------------------

Points predict_velocity(const ParticleState& state, const Action& action,
                        const DynamicsModel& model, const RunConfig& config);

ParticleState step(const ParticleState& state, const Action& action,
                   const DynamicsModel& model, const RunConfig& config);

std::vector<ParticleState> rollout(const ParticleState& state,
                                   const std::vector<Action>& actions,
                                   const DynamicsModel& model,
                                   const RunConfig& config);

}  // namespace pgnd
