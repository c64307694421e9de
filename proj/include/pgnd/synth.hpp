#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgnd/rng.hpp"
#include "pgnd/types.hpp"

namespace pgnd {

// ---------------------------------------------------------------------------
// Oracle world: a mass-spring simulator that stands in for real captures.
// It produces ground-truth particle trajectories with exact velocities.
// ---------------------------------------------------------------------------

enum class SceneKind : int { Rope = 0, Cloth = 1 };

struct Spring {
  int a = 0;
  int b = 0;
  double rest = 0.0;  // rest length (m)
  double k = 0.0;     // stiffness (N/m)
};

struct OracleScene {
  SceneKind kind = SceneKind::Rope;
  Points x;
  Points v;
  std::vector<Spring> springs;
  double mass = 0.002;          // kg per particle
  double damping = 0.05;        // spring-axis damping (N·s/m)
  Vec3 gravity{0.0, 0.0, -9.81};
  bool ground_on = true;
  double ground_z = 0.0;        // support plane height (m)
  double friction = 0.3;        // Coulomb coefficient at the ground
  double dt_sim = 5e-4;         // internal integrator step (s)
  double t = 0.0;

  int n() const { return static_cast<int>(x.size()); }
};

// A smooth scripted gripper path: Catmull-Rom spline through waypoints,
// traversed at constant parameter speed over [0, duration]. The gripper
// kinematically pins one oracle particle (its grasp target).
struct GripperScript {
  std::vector<Vec3> waypoints;  // >= 2
  double duration = 1.0;        // s
  int grasp_particle = 0;       // pinned oracle particle index
  double open = 0.04;           // jaw opening recorded into actions (m)

  Vec3 pos(double t) const;
  Vec3 vel(double t) const;
};

// 64-particle chain along +x with stretch and bend springs.
OracleScene make_rope(int n = 64, double spacing = 0.01,
                      const Vec3& start = Vec3(0.2, 0.3, 0.1));

// nx×ny quad grid in the xy-plane with structural, shear, and bend springs.
OracleScene make_cloth(int nx = 16, int ny = 16, double spacing = 0.015,
                       const Vec3& origin = Vec3(0.2, 0.2, 0.15));

// Advance the oracle by one internal step of dt_sim seconds: semi-implicit
// Euler on springs + gravity, projected ground contact with Coulomb friction,
// then pin each script's grasp particle to the scripted pose.
void oracle_step(OracleScene& scene, const std::vector<GripperScript>& scripts,
                 double dt_sim);

// A smooth random script that starts at `start` and wanders within
// `amplitude` of it (always drifting upward first so ropes lift clear).
GripperScript make_random_script(Rng& rng, const Vec3& start, double duration,
                                 int grasp_particle, double amplitude = 0.15);

// Run the oracle for `duration` seconds, sampling a frame every dt (the frame
// at t=0 included) with the arm poses/velocities recorded as actions.
Trajectory gen_trajectory(OracleScene scene,
                          const std::vector<GripperScript>& scripts,
                          double duration, double dt);

// Default scene + one random grasp script from the seed; used by the CLI.
Trajectory gen_random_trajectory(SceneKind kind, double duration, double dt,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Partial-view masking and persistent track extraction.
// ---------------------------------------------------------------------------

// Four cameras on a ring above the scene, all looking at `center`.
std::vector<CameraSpec> default_camera_rig(const Vec3& center);

// Indices of the points visible from at least one camera under z-buffer
// visibility: a point survives if it projects in-frame and its depth is
// within `tol` of the minimum depth in its raster cell.
std::vector<int> visible_indices(const Points& points,
                                 const std::vector<CameraSpec>& cameras,
                                 double tol = 0.01);

// The surviving subset itself, in input order.
Points mask_partial_view(const Points& points,
                         const std::vector<CameraSpec>& cameras,
                         double tol = 0.01);

// One observed frame: a point cloud plus per-point velocities.
struct ObservedFrame {
  Points x;
  Points v;
};

// Keep the first point (in input order) of every δ-cell; returns indices.
std::vector<int> voxel_downsample(const Points& points, double delta);

// Persistent tracks over a clip: seed at the frame-0 cloud downsampled at
// `delta`, advance each track by its velocity × dt, and at every frame reset
// each track's velocity to the mean velocity of its k nearest observed
// points. Output: one fixed-cardinality cloud per input frame.
std::vector<Points> extract_tracks(const std::vector<ObservedFrame>& frames,
                                   double dt, int k = 5, double delta = 0.01);

}  // namespace pgnd
