#pragma once

#include <string>
#include <vector>

#include "pgnd/types.hpp"

namespace pgnd {

// Trajectory files are JSON-lines: one header object, then one object per
// frame. All values are finite; the writer rejects NaN/inf up front.
Trajectory load_trajectory(const std::string& path);
void save_trajectory(const std::string& path, const Trajectory& traj);

// Cut a tracked trajectory into overlapping training windows of
// h + K + 1 frames (stride 1). Velocities for the initial state are
// precomputed; the oldest entry is zeroed for the window at frame 0,
// where no earlier frame exists.
std::vector<TrajectoryWindow> make_windows(const Trajectory& traj, int history,
                                           int horizon);

// Uniform scaling about the centroid. s must be > 0.
Points scale_object(const Points& points, double s);

// Check a state's internal consistency for a given history length.
void validate_state(const ParticleState& state, int history);

}  // namespace pgnd
