#include "pgnd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <tuple>

#include "pgnd/error.hpp"

namespace pgnd {

namespace {

constexpr double kBlowupSpeed = 100.0;  // m/s

void check_script(const GripperScript& s) {
  if (s.waypoints.size() < 2) {
    throw ParamError("gripper script needs at least 2 waypoints");
  }
  if (s.duration <= 0.0) {
    throw ParamError("gripper script duration must be positive");
  }
}

// Catmull-Rom position on the segment p0..p3 at local parameter u in [0,1].
Vec3 catmull_rom(const Vec3& p0, const Vec3& p1, const Vec3& p2,
                 const Vec3& p3, double u) {
  const double u2 = u * u;
  const double u3 = u2 * u;
  return 0.5 * ((2.0 * p1) + (-p0 + p2) * u +
                (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u2 +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u3);
}

Vec3 catmull_rom_deriv(const Vec3& p0, const Vec3& p1, const Vec3& p2,
                       const Vec3& p3, double u) {
  const double u2 = u * u;
  return 0.5 * ((-p0 + p2) + 2.0 * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u +
                3.0 * (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u2);
}

// Map time to (segment, local u, du/dt) with endpoint clamping.
struct SplineCoord {
  int seg;
  double u;
  double dudt;
};

SplineCoord spline_coord(const GripperScript& s, double t) {
  const int segs = static_cast<int>(s.waypoints.size()) - 1;
  double a = t / s.duration;  // global parameter in [0,1]
  a = std::clamp(a, 0.0, 1.0);
  double g = a * segs;
  int seg = std::min(static_cast<int>(g), segs - 1);
  return {seg, g - seg, segs / s.duration};
}

// Control points for a segment, duplicating the end waypoints.
void segment_points(const GripperScript& s, int seg, Vec3& p0, Vec3& p1,
                    Vec3& p2, Vec3& p3) {
  const auto& w = s.waypoints;
  const int last = static_cast<int>(w.size()) - 1;
  p0 = w[std::max(seg - 1, 0)];
  p1 = w[seg];
  p2 = w[seg + 1];
  p3 = w[std::min(seg + 2, last)];
}

}  // namespace

Vec3 GripperScript::pos(double t) const {
  check_script(*this);
  SplineCoord c = spline_coord(*this, t);
  Vec3 p0, p1, p2, p3;
  segment_points(*this, c.seg, p0, p1, p2, p3);
  return catmull_rom(p0, p1, p2, p3, c.u);
}

Vec3 GripperScript::vel(double t) const {
  check_script(*this);
  if (t < 0.0 || t > duration) return Vec3::Zero();
  SplineCoord c = spline_coord(*this, t);
  Vec3 p0, p1, p2, p3;
  segment_points(*this, c.seg, p0, p1, p2, p3);
  return catmull_rom_deriv(p0, p1, p2, p3, c.u) * c.dudt;
}

OracleScene make_rope(int n, double spacing, const Vec3& start) {
  if (n < 4) throw ParamError("rope needs at least 4 particles");
  if (spacing <= 0.0) throw ParamError("rope spacing must be positive");
  OracleScene s;
  s.kind = SceneKind::Rope;
  for (int i = 0; i < n; ++i) {
    s.x.push_back(start + Vec3(i * spacing, 0.0, 0.0));
    s.v.push_back(Vec3::Zero());
  }
  for (int i = 0; i + 1 < n; ++i) {
    s.springs.push_back({i, i + 1, (s.x[i + 1] - s.x[i]).norm(), 500.0});
  }
  for (int i = 0; i + 2 < n; ++i) {
    s.springs.push_back({i, i + 2, (s.x[i + 2] - s.x[i]).norm(), 10.0});
  }
  return s;
}

OracleScene make_cloth(int nx, int ny, double spacing, const Vec3& origin) {
  if (nx < 3 || ny < 3) throw ParamError("cloth needs at least a 3x3 grid");
  if (spacing <= 0.0) throw ParamError("cloth spacing must be positive");
  OracleScene s;
  s.kind = SceneKind::Cloth;
  auto id = [&](int i, int j) { return i * ny + j; };
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      s.x.push_back(origin + Vec3(i * spacing, j * spacing, 0.0));
      s.v.push_back(Vec3::Zero());
    }
  }
  auto link = [&](int a, int b, double k) {
    s.springs.push_back({a, b, (s.x[a] - s.x[b]).norm(), k});
  };
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      if (i + 1 < nx) link(id(i, j), id(i + 1, j), 400.0);  // structural
      if (j + 1 < ny) link(id(i, j), id(i, j + 1), 400.0);
      if (i + 1 < nx && j + 1 < ny) {
        link(id(i, j), id(i + 1, j + 1), 200.0);  // shear
        link(id(i + 1, j), id(i, j + 1), 200.0);
      }
      if (i + 2 < nx) link(id(i, j), id(i + 2, j), 20.0);  // bend
      if (j + 2 < ny) link(id(i, j), id(i, j + 2), 20.0);
    }
  }
  return s;
}

void oracle_step(OracleScene& scene, const std::vector<GripperScript>& scripts,
                 double dt_sim) {
  const int n = scene.n();
  if (n == 0) throw ContractError("oracle_step: empty scene");
  if (dt_sim <= 0.0) throw ParamError("oracle_step: dt_sim must be positive");
  for (const auto& sp : scene.springs) {
    if (sp.k * dt_sim * dt_sim / scene.mass >= 0.25) {
      throw ParamError("oracle_step: unstable regime (k*dt^2/m >= 0.25)");
    }
  }
  for (const auto& s : scripts) {
    check_script(s);
    if (s.grasp_particle < 0 || s.grasp_particle >= n) {
      throw ParamError("gripper script pins a particle outside the scene");
    }
  }

  // Accumulate spring + gravity forces (springs act pairwise, so internal
  // forces cancel and momentum is conserved when gravity/ground are off).
  Points f(n, Vec3::Zero());
  for (const auto& sp : scene.springs) {
    const Vec3 d = scene.x[sp.b] - scene.x[sp.a];
    const double len = d.norm();
    if (len < 1e-12) continue;  // coincident: no defined axis
    const Vec3 dir = d / len;
    const double rel = (scene.v[sp.b] - scene.v[sp.a]).dot(dir);
    const Vec3 pull = (sp.k * (len - sp.rest) + scene.damping * rel) * dir;
    f[sp.a] += pull;
    f[sp.b] -= pull;
  }

  const double dt = dt_sim;
  for (int i = 0; i < n; ++i) {
    scene.v[i] += dt * (f[i] / scene.mass + scene.gravity);
  }

  // Projected ground contact with a Coulomb friction impulse.
  if (scene.ground_on) {
    for (int i = 0; i < n; ++i) {
      if (scene.x[i].z() <= scene.ground_z && scene.v[i].z() < 0.0) {
        const double jn = -scene.v[i].z();  // normal impulse magnitude / mass
        scene.v[i].z() = 0.0;
        Vec3 vt(scene.v[i].x(), scene.v[i].y(), 0.0);
        const double vt_norm = vt.norm();
        const double s =
            std::max(0.0, 1.0 - scene.friction * jn / (vt_norm + 1e-10));
        scene.v[i].x() *= s;
        scene.v[i].y() *= s;
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    scene.x[i] += dt * scene.v[i];
    if (scene.ground_on && scene.x[i].z() < scene.ground_z) {
      scene.x[i].z() = scene.ground_z;
    }
  }

  const double t_next = scene.t + dt;
  for (const auto& s : scripts) {
    scene.x[s.grasp_particle] = s.pos(t_next);
    scene.v[s.grasp_particle] = s.vel(t_next);
  }
  scene.t = t_next;

  for (int i = 0; i < n; ++i) {
    if (!scene.v[i].allFinite() || scene.v[i].norm() > kBlowupSpeed) {
      throw BlowupError("oracle_step: simulation blew up at t=" +
                        std::to_string(t_next) + " (particle " +
                        std::to_string(i) + ")");
    }
  }
}

GripperScript make_random_script(Rng& rng, const Vec3& start, double duration,
                                 int grasp_particle, double amplitude) {
  if (duration <= 0.0) throw ParamError("script duration must be positive");
  if (amplitude <= 0.0) throw ParamError("script amplitude must be positive");
  GripperScript s;
  s.duration = duration;
  s.grasp_particle = grasp_particle;
  s.waypoints.push_back(start);
  // First waypoint lifts so grasped material clears the ground, then wander.
  Vec3 prev = start + Vec3(0.0, 0.0, 0.6 * amplitude);
  s.waypoints.push_back(prev);
  const int extra = 3;
  for (int i = 0; i < extra; ++i) {
    Vec3 step(rng.uniform(-amplitude, amplitude),
              rng.uniform(-amplitude, amplitude),
              rng.uniform(-0.3 * amplitude, 0.5 * amplitude));
    Vec3 next = prev + step;
    next.z() = std::max(next.z(), start.z() + 0.2 * amplitude);
    s.waypoints.push_back(next);
    prev = next;
  }
  return s;
}

Trajectory gen_trajectory(OracleScene scene,
                          const std::vector<GripperScript>& scripts,
                          double duration, double dt) {
  if (duration <= 0.0 || dt <= 0.0) {
    throw ParamError("gen_trajectory: duration and dt must be positive");
  }
  const double ratio = duration / dt;
  const int steps = static_cast<int>(std::lround(ratio));
  if (std::abs(ratio - steps) > 1e-9 || steps < 1) {
    throw ParamError("gen_trajectory: duration must be a multiple of dt");
  }
  if (scene.dt_sim > dt / 10.0 + 1e-12) {
    throw ParamError("gen_trajectory: dt_sim must be at most dt/10");
  }
  const int sub = static_cast<int>(std::lround(dt / scene.dt_sim));

  // Pin grasped particles to their scripts before recording frame 0.
  for (const auto& s : scripts) {
    check_script(s);
    scene.x[s.grasp_particle] = s.pos(0.0);
    scene.v[s.grasp_particle] = s.vel(0.0);
  }

  Trajectory traj;
  traj.dt = dt;
  traj.arms = std::max<int>(1, static_cast<int>(scripts.size()));
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.frames.push_back(scene.x);
    Action a;
    for (const auto& s : scripts) {
      ArmAction arm;
      arm.mode = ArmMode::Grasped;
      arm.pos = s.pos(t);
      arm.vel = s.vel(t);
      arm.open = s.open;
      a.arms.push_back(arm);
    }
    if (a.arms.empty()) a.arms.push_back(ArmAction{});
    traj.actions.push_back(a);
  };

  record(0.0);
  for (int k = 1; k <= steps; ++k) {
    for (int s = 0; s < sub; ++s) {
      oracle_step(scene, scripts, scene.dt_sim);
    }
    record(k * dt);
  }
  return traj;
}

Trajectory gen_random_trajectory(SceneKind kind, double duration, double dt,
                                 std::uint64_t seed) {
  Rng rng(seed);
  OracleScene scene =
      kind == SceneKind::Rope ? make_rope() : make_cloth();
  // Let the material settle onto the ground before the robot arrives.
  for (int i = 0; i < 400; ++i) oracle_step(scene, {}, scene.dt_sim);
  scene.t = 0.0;
  const int grasp = 0;
  std::vector<GripperScript> scripts = {
      make_random_script(rng, scene.x[grasp], duration, grasp)};
  return gen_trajectory(std::move(scene), scripts, duration, dt);
}

std::vector<CameraSpec> default_camera_rig(const Vec3& center) {
  std::vector<CameraSpec> rig;
  const double r = 0.9;
  const double h = 0.7;
  for (int i = 0; i < 4; ++i) {
    const double a = (0.25 + 0.5 * i) * M_PI;  // 45, 135, 225, 315 degrees
    CameraSpec c;
    c.pos = center + Vec3(r * std::cos(a), r * std::sin(a), h);
    c.look = center;
    rig.push_back(c);
  }
  return rig;
}

std::vector<int> visible_indices(const Points& points,
                                 const std::vector<CameraSpec>& cameras,
                                 double tol) {
  if (cameras.empty()) throw ParamError("visibility needs at least 1 camera");
  for (const auto& c : cameras) {
    if (c.fx <= 0.0 || c.fy <= 0.0 || c.width <= 0 || c.height <= 0) {
      throw ParamError("camera has invalid intrinsics");
    }
  }
  const int n = static_cast<int>(points.size());
  std::vector<char> vis(n, 0);
  for (const auto& cam : cameras) {
    // Look-at basis: forward to the target, right/down to span the image.
    Vec3 fwd = (cam.look - cam.pos);
    if (fwd.norm() < 1e-12) throw ParamError("camera looks at itself");
    fwd.normalize();
    Vec3 right = fwd.cross(cam.up);
    if (right.norm() < 1e-9) {
      right = fwd.cross(Vec3::UnitX());
      if (right.norm() < 1e-9) right = fwd.cross(Vec3::UnitY());
    }
    right.normalize();
    const Vec3 down = fwd.cross(right);

    std::vector<double> zmin(static_cast<std::size_t>(cam.width) * cam.height,
                             std::numeric_limits<double>::infinity());
    std::vector<int> px(n, -1);
    std::vector<double> pz(n, 0.0);
    for (int i = 0; i < n; ++i) {
      const Vec3 d = points[i] - cam.pos;
      const double z = d.dot(fwd);
      if (z <= 1e-9) continue;  // behind the camera
      const double u = cam.fx * d.dot(right) / z + cam.cx;
      const double v = cam.fy * d.dot(down) / z + cam.cy;
      const int ui = static_cast<int>(std::floor(u));
      const int vi = static_cast<int>(std::floor(v));
      if (ui < 0 || ui >= cam.width || vi < 0 || vi >= cam.height) continue;
      const int cell = vi * cam.width + ui;
      px[i] = cell;
      pz[i] = z;
      zmin[cell] = std::min(zmin[cell], z);
    }
    for (int i = 0; i < n; ++i) {
      if (px[i] >= 0 && pz[i] <= zmin[px[i]] + tol) vis[i] = 1;
    }
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (vis[i]) out.push_back(i);
  }
  return out;
}

Points mask_partial_view(const Points& points,
                         const std::vector<CameraSpec>& cameras, double tol) {
  Points out;
  for (int i : visible_indices(points, cameras, tol)) out.push_back(points[i]);
  return out;
}

std::vector<int> voxel_downsample(const Points& points, double delta) {
  if (delta <= 0.0) throw ParamError("voxel size must be positive");
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, int> seen;
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    auto cell = std::make_tuple(
        static_cast<std::int64_t>(std::floor(points[i].x() / delta)),
        static_cast<std::int64_t>(std::floor(points[i].y() / delta)),
        static_cast<std::int64_t>(std::floor(points[i].z() / delta)));
    if (seen.emplace(cell, i).second) out.push_back(i);
  }
  return out;
}

namespace {

// Mean velocity of the k nearest observed points (brute force; clips are
// small). Ties broken by index order via stable selection on (d2, index).
Vec3 knn_mean_velocity(const ObservedFrame& frame, const Vec3& q, int k) {
  const int n = static_cast<int>(frame.x.size());
  const int kk = std::min(k, n);
  std::vector<std::pair<double, int>> d2(n);
  for (int i = 0; i < n; ++i) {
    d2[i] = {(frame.x[i] - q).squaredNorm(), i};
  }
  std::partial_sort(d2.begin(), d2.begin() + kk, d2.end());
  Vec3 mean = Vec3::Zero();
  for (int i = 0; i < kk; ++i) mean += frame.v[d2[i].second];
  return mean / kk;
}

}  // namespace

std::vector<Points> extract_tracks(const std::vector<ObservedFrame>& frames,
                                   double dt, int k, double delta) {
  if (frames.size() < 2) throw ContractError("track extraction needs >= 2 frames");
  if (dt <= 0.0) throw ParamError("track extraction: dt must be positive");
  if (k < 1) throw ParamError("track extraction: k must be >= 1");
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].x.empty()) {
      throw TrackingError("track extraction: empty frame " + std::to_string(f));
    }
    if (frames[f].v.size() != frames[f].x.size()) {
      throw ShapeError("track extraction: frame " + std::to_string(f) +
                       " has " + std::to_string(frames[f].v.size()) +
                       " velocities for " + std::to_string(frames[f].x.size()) +
                       " points");
    }
  }

  std::vector<int> seeds = voxel_downsample(frames[0].x, delta);
  Points pos;
  for (int i : seeds) pos.push_back(frames[0].x[i]);

  std::vector<Points> tracks;
  tracks.push_back(pos);
  Points vel(pos.size());
  for (std::size_t j = 0; j < pos.size(); ++j) {
    vel[j] = knn_mean_velocity(frames[0], pos[j], k);
  }
  for (std::size_t f = 1; f < frames.size(); ++f) {
    for (std::size_t j = 0; j < pos.size(); ++j) {
      pos[j] += dt * vel[j];
    }
    for (std::size_t j = 0; j < pos.size(); ++j) {
      vel[j] = knn_mean_velocity(frames[f], pos[j], k);
    }
    tracks.push_back(pos);
  }
  return tracks;
}

}  // namespace pgnd
