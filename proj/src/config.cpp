#include "pgnd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pgnd/error.hpp"

namespace pgnd {

using nlohmann::json;

static Vec3 vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ParamError(std::string("config: ") + what + " must be [x,y,z]");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

static CameraSpec camera_from(const json& j) {
  static const std::set<std::string> allowed = {
      "pos", "look", "up", "width", "height", "fx", "fy", "cx", "cy"};
  CameraSpec c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ParamError("config: unknown camera key '" + it.key() + "'");
    }
  }
  if (j.contains("pos")) c.pos = vec3_from(j["pos"], "camera pos");
  if (j.contains("look")) c.look = vec3_from(j["look"], "camera look");
  if (j.contains("up")) c.up = vec3_from(j["up"], "camera up");
  if (j.contains("width")) c.width = j["width"].get<int>();
  if (j.contains("height")) c.height = j["height"].get<int>();
  if (j.contains("fx")) c.fx = j["fx"].get<double>();
  if (j.contains("fy")) c.fy = j["fy"].get<double>();
  if (j.contains("cx")) c.cx = j["cx"].get<double>();
  if (j.contains("cy")) c.cy = j["cy"].get<double>();
  return c;
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("config: top level must be an object");

  static const std::set<std::string> allowed = {
      "grid_l",   "grid_dx", "radius",   "history",    "horizon",
      "dt",       "scale",   "grasp_radius", "friction", "ground_z",
      "batch_size", "seed",  "cameras"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ParamError("config: unknown key '" + it.key() + "'");
    }
  }

  RunConfig cfg;
  try {
    if (j.contains("grid_l")) cfg.grid_l = j["grid_l"].get<int>();
    if (j.contains("grid_dx")) cfg.grid_dx = j["grid_dx"].get<double>();
    if (j.contains("radius")) cfg.radius = j["radius"].get<double>();
    if (j.contains("history")) cfg.history = j["history"].get<int>();
    if (j.contains("horizon")) cfg.horizon = j["horizon"].get<int>();
    if (j.contains("dt")) cfg.dt = j["dt"].get<double>();
    if (j.contains("scale")) cfg.scale = j["scale"].get<double>();
    if (j.contains("grasp_radius")) cfg.grasp_radius = j["grasp_radius"].get<double>();
    if (j.contains("friction")) cfg.friction = j["friction"].get<double>();
    if (j.contains("ground_z")) cfg.ground_z = j["ground_z"].get<double>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("cameras")) {
      if (!j["cameras"].is_array()) throw ParamError("config: cameras must be an array");
      for (const auto& jc : j["cameras"]) cfg.cameras.push_back(camera_from(jc));
    }
  } catch (const json::exception& e) {
    throw ParamError(std::string("config: ") + e.what());
  }
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
  json j;
  j["grid_l"] = cfg.grid_l;
  j["grid_dx"] = cfg.grid_dx;
  j["radius"] = cfg.radius;
  j["history"] = cfg.history;
  j["horizon"] = cfg.horizon;
  j["dt"] = cfg.dt;
  j["scale"] = cfg.scale;
  j["grasp_radius"] = cfg.grasp_radius;
  j["friction"] = cfg.friction;
  j["ground_z"] = cfg.ground_z;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  if (!cfg.cameras.empty()) {
    json arr = json::array();
    for (const auto& c : cfg.cameras) {
      json jc;
      jc["pos"] = {c.pos.x(), c.pos.y(), c.pos.z()};
      jc["look"] = {c.look.x(), c.look.y(), c.look.z()};
      jc["up"] = {c.up.x(), c.up.y(), c.up.z()};
      jc["width"] = c.width;
      jc["height"] = c.height;
      jc["fx"] = c.fx;
      jc["fy"] = c.fy;
      jc["cx"] = c.cx;
      jc["cy"] = c.cy;
      arr.push_back(jc);
    }
    j["cameras"] = arr;
  }
  return j.dump(2) + "\n";
}

std::vector<CameraSpec> default_camera_rig() {
  std::vector<CameraSpec> rig;
  const double s = 0.9;   // horizontal stand-off (m)
  const double z = 0.7;   // height (m)
  const Vec3 target(0.0, 0.0, 0.05);
  for (double sx : {-1.0, 1.0}) {
    for (double sy : {-1.0, 1.0}) {
      CameraSpec c;
      c.pos = Vec3(sx * s, sy * s, z);
      c.look = target;
      rig.push_back(c);
    }
  }
  return rig;
}

std::vector<CameraSpec> effective_cameras(const RunConfig& cfg) {
  return cfg.cameras.empty() ? default_camera_rig() : cfg.cameras;
}

void validate_config(const RunConfig& cfg) {
  auto bad = [](const std::string& m) { throw ValidationError("config: " + m); };
  if (cfg.grid_l < 4) bad("grid_l must be >= 4");
  if (!(cfg.grid_dx > 0.0)) bad("grid_dx must be > 0");
  if (!(cfg.radius > 0.0)) bad("radius must be > 0");
  if (cfg.history < 0) bad("history must be >= 0");
  if (cfg.horizon < 1) bad("horizon must be >= 1");
  if (!(cfg.dt > 0.0)) bad("dt must be > 0");
  if (!(cfg.scale > 0.0)) bad("scale must be > 0");
  if (!(cfg.grasp_radius > 0.0)) bad("grasp_radius must be > 0");
  if (cfg.friction < 0.0) bad("friction must be >= 0");
  if (cfg.batch_size < 1) bad("batch_size must be >= 1");
  for (const auto& c : cfg.cameras) {
    if (c.width < 1 || c.height < 1) bad("camera raster must be >= 1x1");
    if (!(c.fx > 0.0) || !(c.fy > 0.0)) bad("camera focal lengths must be > 0");
    if ((c.look - c.pos).norm() < 1e-12) bad("camera look point equals camera pos");
  }
}

}  // namespace pgnd
