#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace pgnd {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;      // serialized as (w, x, y, z)
using Points = std::vector<Vec3>;     // n x 3 point cloud (m)

// How an end-effector interacts with the object.
enum class ArmMode : int {
  Grasped = 0,        // holds material; drives a rigid region of the grid
  Nonprehensile = 1,  // pushes with the gripper body; enters as extra particles
};

struct ArmAction {
  ArmMode mode = ArmMode::Grasped;
  Quat rot{1.0, 0.0, 0.0, 0.0};  // gripper orientation
  Vec3 pos{0.0, 0.0, 0.0};       // gripper position (m)
  Vec3 omega{0.0, 0.0, 0.0};     // angular velocity (rad/s)
  Vec3 vel{0.0, 0.0, 0.0};       // linear velocity (m/s)
  double open = 0.0;             // jaw opening (m)
};

// One control frame: the pose/twist of every arm over the next interval.
struct Action {
  std::vector<ArmAction> arms;  // 1 or 2 arms
};

// Object state at one instant: positions plus a short velocity history.
// vel_history holds history+1 entries, oldest first, each n x 3 (m/s).
struct ParticleState {
  Points x;
  std::vector<Points> vel_history;
  double t = 0.0;

  int n() const { return static_cast<int>(x.size()); }
};

// Pinhole camera for depth-style visibility tests.
struct CameraSpec {
  Vec3 pos{1.0, 1.0, 1.0};   // camera center (m)
  Vec3 look{0.0, 0.0, 0.0};  // point the optical axis passes through
  Vec3 up{0.0, 0.0, 1.0};
  int width = 64;            // raster cells
  int height = 64;
  double fx = 80.0;          // focal lengths / principal point in pixels
  double fy = 80.0;
  double cx = 32.0;
  double cy = 32.0;
};

// Everything a run needs. Mirrored 1:1 by the JSON config file.
struct RunConfig {
  int grid_l = 50;            // grid nodes per axis (cubic grid)
  double grid_dx = 0.02;      // grid spacing (m)
  double radius = 0.2;        // feature pooling radius (m)
  int history = 2;            // h: velocity history length is h+1
  int horizon = 5;            // K: supervised rollout steps
  double dt = 0.1;            // frame interval (s)
  double scale = 1.0;         // object scale factor applied at load
  double grasp_radius = 0.1;  // rigid-drive radius around a grasped gripper (m)
  double friction = 0.5;      // ground friction coefficient
  double ground_z = 0.0;      // world height of the support plane (m)
  int batch_size = 32;
  std::uint64_t seed = 0;
  std::vector<CameraSpec> cameras;  // empty -> default 4-camera rig
};

// A training sample: h+K+1 consecutive frames of persistent tracks.
struct TrajectoryWindow {
  std::vector<Points> tracks;   // (h+K+1) frames, each n x 3
  std::vector<Action> actions;  // aligned with tracks
  int first_frame = 0;          // index of tracks[0] in the source trajectory
  // Velocity history for the state at frame `history` (oldest first, h+1
  // entries). The oldest entry is zero when the window starts at frame 0.
  std::vector<Points> init_vel;
};

// An episode as stored on disk. Point count may vary per frame for raw
// (untracked) captures.
struct Trajectory {
  double dt = 0.1;
  int arms = 1;
  std::vector<double> times;
  std::vector<Points> frames;
  std::vector<Action> actions;

  int num_frames() const { return static_cast<int>(frames.size()); }
};

}  // namespace pgnd
