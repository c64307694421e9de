#include "pgnd/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pgnd/error.hpp"

namespace pgnd {

using nlohmann::json;

namespace {

bool finite3(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

json arm_to_json(const ArmAction& a) {
  json j;
  j["type"] = static_cast<int>(a.mode);
  j["pose"] = {a.rot.w(), a.rot.x(), a.rot.y(), a.rot.z(),
               a.pos.x(), a.pos.y(), a.pos.z()};
  j["twist"] = {a.omega.x(), a.omega.y(), a.omega.z(),
                a.vel.x(),   a.vel.y(),   a.vel.z()};
  j["open"] = a.open;
  return j;
}

ArmAction arm_from_json(const json& j, std::size_t offset) {
  auto fail = [&](const std::string& m) {
    throw FormatError("trajectory: " + m + " at byte " + std::to_string(offset));
  };
  if (!j.is_object()) fail("eef entry must be an object");
  for (const char* key : {"type", "pose", "twist", "open"}) {
    if (!j.contains(key)) fail(std::string("eef entry missing '") + key + "'");
  }
  ArmAction a;
  int type = j["type"].get<int>();
  if (type != 0 && type != 1) fail("eef type must be 0 or 1");
  a.mode = static_cast<ArmMode>(type);
  const auto& pose = j["pose"];
  const auto& twist = j["twist"];
  if (!pose.is_array() || pose.size() != 7) fail("eef pose must have 7 values");
  if (!twist.is_array() || twist.size() != 6) fail("eef twist must have 6 values");
  a.rot = Quat(pose[0].get<double>(), pose[1].get<double>(),
               pose[2].get<double>(), pose[3].get<double>());
  a.pos = Vec3(pose[4].get<double>(), pose[5].get<double>(), pose[6].get<double>());
  a.omega = Vec3(twist[0].get<double>(), twist[1].get<double>(), twist[2].get<double>());
  a.vel = Vec3(twist[3].get<double>(), twist[4].get<double>(), twist[5].get<double>());
  a.open = j["open"].get<double>();
  return a;
}

void check_arm_finite(const ArmAction& a, std::size_t offset) {
  bool ok = finite3(a.pos) && finite3(a.omega) && finite3(a.vel) &&
            std::isfinite(a.open) && std::isfinite(a.rot.w()) &&
            std::isfinite(a.rot.x()) && std::isfinite(a.rot.y()) &&
            std::isfinite(a.rot.z());
  if (!ok) {
    throw ValidationError("trajectory: non-finite eef value at byte " +
                          std::to_string(offset));
  }
}

}  // namespace

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("trajectory: cannot open '" + path + "'");

  std::string line;
  std::size_t offset = 0;      // byte offset of the current line start
  std::size_t line_no = 0;

  auto next_line = [&](std::string& out) -> bool {
    offset += line_no == 0 ? 0 : line.size() + 1;
    ++line_no;
    return static_cast<bool>(std::getline(in, out));
  };

  if (!next_line(line) || line.empty()) {
    throw FormatError("trajectory: empty file '" + path + "'");
  }

  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error&) {
    throw FormatError("trajectory: malformed header at byte " +
                      std::to_string(offset));
  }
  auto hfail = [&](const std::string& m) {
    throw FormatError("trajectory: " + m + " at byte " + std::to_string(offset));
  };
  if (!header.is_object()) hfail("header must be an object");
  for (const char* key : {"version", "n", "dt", "arms", "frames"}) {
    if (!header.contains(key)) hfail(std::string("header missing '") + key + "'");
  }
  if (header["version"].get<int>() != 1) hfail("unsupported version");

  Trajectory traj;
  traj.dt = header["dt"].get<double>();
  traj.arms = header["arms"].get<int>();
  int declared_frames = header["frames"].get<int>();
  int declared_n = header["n"].get<int>();
  if (!(traj.dt > 0.0) || !std::isfinite(traj.dt)) hfail("dt must be positive");
  if (traj.arms < 1 || traj.arms > 2) hfail("arms must be 1 or 2");
  if (declared_frames < 1) hfail("frames must be >= 1");
  if (declared_n < 0) hfail("n must be >= 0");

  for (int f = 0; f < declared_frames; ++f) {
    if (!next_line(line)) {
      throw FormatError("trajectory: truncated after " + std::to_string(f) +
                        " of " + std::to_string(declared_frames) +
                        " frames at byte " + std::to_string(offset));
    }
    json jf;
    try {
      jf = json::parse(line);
    } catch (const json::out_of_range&) {
      // number overflow: a non-finite payload in disguise
      throw ValidationError("trajectory: non-finite value at byte " +
                            std::to_string(offset));
    } catch (const json::exception&) {
      throw FormatError("trajectory: malformed frame at byte " +
                        std::to_string(offset));
    }
    auto ffail = [&](const std::string& m) {
      throw FormatError("trajectory: " + m + " at byte " + std::to_string(offset));
    };
    if (!jf.is_object()) ffail("frame must be an object");
    for (const char* key : {"t", "x", "eef"}) {
      if (!jf.contains(key)) ffail(std::string("frame missing '") + key + "'");
    }

    try {
    double t = jf["t"].get<double>();
    if (!std::isfinite(t)) {
      throw ValidationError("trajectory: non-finite time at byte " +
                            std::to_string(offset));
    }

    const auto& jx = jf["x"];
    if (!jx.is_array()) ffail("frame x must be an array of points");
    Points pts;
    pts.reserve(jx.size());
    for (const auto& p : jx) {
      if (!p.is_array() || p.size() != 3) ffail("point must have 3 coordinates");
      Vec3 v(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
      if (!finite3(v)) {
        throw ValidationError("trajectory: non-finite point at byte " +
                              std::to_string(offset));
      }
      pts.push_back(v);
    }

    const auto& jeef = jf["eef"];
    if (!jeef.is_array() || static_cast<int>(jeef.size()) != traj.arms) {
      ffail("frame eef count does not match header arms");
    }
    Action act;
    for (const auto& ja : jeef) {
      ArmAction a = arm_from_json(ja, offset);
      check_arm_finite(a, offset);
      act.arms.push_back(a);
    }

    traj.times.push_back(t);
    traj.frames.push_back(std::move(pts));
    traj.actions.push_back(std::move(act));
    } catch (const json::out_of_range&) {
      throw ValidationError("trajectory: non-finite value at byte " +
                            std::to_string(offset));
    } catch (const json::exception&) {
      throw FormatError("trajectory: bad value type at byte " +
                        std::to_string(offset));
    }
  }

  if (!traj.frames.empty() &&
      static_cast<int>(traj.frames[0].size()) != declared_n) {
    throw FormatError("trajectory: header n=" + std::to_string(declared_n) +
                      " but first frame has " +
                      std::to_string(traj.frames[0].size()) + " points");
  }
  return traj;
}

void save_trajectory(const std::string& path, const Trajectory& traj) {
  if (traj.frames.empty()) {
    throw ValidationError("trajectory: refusing to save an empty trajectory");
  }
  if (traj.times.size() != traj.frames.size() ||
      traj.actions.size() != traj.frames.size()) {
    throw ContractError("trajectory: times/frames/actions size mismatch");
  }
  if (traj.arms < 1 || traj.arms > 2) {
    throw ValidationError("trajectory: arms must be 1 or 2");
  }

  for (std::size_t f = 0; f < traj.frames.size(); ++f) {
    if (!std::isfinite(traj.times[f])) {
      throw ValidationError("trajectory: non-finite time in frame " +
                            std::to_string(f));
    }
    for (const auto& p : traj.frames[f]) {
      if (!finite3(p)) {
        throw ValidationError("trajectory: non-finite point in frame " +
                              std::to_string(f));
      }
    }
    if (static_cast<int>(traj.actions[f].arms.size()) != traj.arms) {
      throw ValidationError("trajectory: frame " + std::to_string(f) +
                            " has wrong arm count");
    }
    for (const auto& a : traj.actions[f].arms) check_arm_finite(a, 0);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("trajectory: cannot write '" + path + "'");

  json header;
  header["version"] = 1;
  header["n"] = traj.frames[0].size();
  header["dt"] = traj.dt;
  header["arms"] = traj.arms;
  header["frames"] = traj.frames.size();
  out << header.dump() << "\n";

  for (std::size_t f = 0; f < traj.frames.size(); ++f) {
    json jf;
    jf["t"] = traj.times[f];
    json jx = json::array();
    for (const auto& p : traj.frames[f]) jx.push_back({p.x(), p.y(), p.z()});
    jf["x"] = jx;
    json jeef = json::array();
    for (const auto& a : traj.actions[f].arms) jeef.push_back(arm_to_json(a));
    jf["eef"] = jeef;
    out << jf.dump() << "\n";
  }
  if (!out) throw FormatError("trajectory: write failed for '" + path + "'");
}

std::vector<TrajectoryWindow> make_windows(const Trajectory& traj, int history,
                                           int horizon) {
  if (history < 0 || horizon < 1) {
    throw ParamError("make_windows: history must be >= 0 and horizon >= 1");
  }
  const int len = history + horizon + 1;
  const int T = traj.num_frames();
  if (T < len) {
    throw ValidationError("make_windows: trajectory has " + std::to_string(T) +
                          " frames, needs at least " + std::to_string(len));
  }
  const std::size_t n = traj.frames[0].size();
  for (const auto& f : traj.frames) {
    if (f.size() != n) {
      throw ValidationError(
          "make_windows: point count varies across frames; windows need "
          "persistent tracks");
    }
  }

  std::vector<TrajectoryWindow> windows;
  windows.reserve(T - len + 1);
  for (int i = 0; i + len <= T; ++i) {
    TrajectoryWindow w;
    w.first_frame = i;
    w.tracks.assign(traj.frames.begin() + i, traj.frames.begin() + i + len);
    w.actions.assign(traj.actions.begin() + i, traj.actions.begin() + i + len);
    w.init_vel.resize(history + 1);
    for (int k = 0; k <= history; ++k) {
      const int j = i + k;  // trajectory frame whose arrival velocity we want
      Points v(n, Vec3::Zero());
      if (j > 0) {
        for (std::size_t p = 0; p < n; ++p) {
          v[p] = (traj.frames[j][p] - traj.frames[j - 1][p]) / traj.dt;
        }
      }
      w.init_vel[k] = std::move(v);
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

Points scale_object(const Points& points, double s) {
  if (!(s > 0.0)) throw ParamError("scale_object: scale must be > 0");
  if (points.empty()) return {};
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  Points out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(c + s * (p - c));
  return out;
}

void validate_state(const ParticleState& state, int history) {
  if (static_cast<int>(state.vel_history.size()) != history + 1) {
    throw ValidationError("state: velocity history has " +
                          std::to_string(state.vel_history.size()) +
                          " entries, expected " + std::to_string(history + 1));
  }
  for (const auto& v : state.vel_history) {
    if (v.size() != state.x.size()) {
      throw ValidationError("state: velocity entry size does not match positions");
    }
    for (const auto& p : v) {
      if (!finite3(p)) throw ValidationError("state: non-finite velocity");
    }
  }
  for (const auto& p : state.x) {
    if (!finite3(p)) throw ValidationError("state: non-finite position");
  }
  if (!std::isfinite(state.t)) throw ValidationError("state: non-finite time");
}

}  // namespace pgnd
