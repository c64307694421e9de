#include "pgnd/skinning.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "pgnd/error.hpp"

namespace pgnd {

namespace {

// Indices of the k nearest entries of `cloud` to `query`, excluding
// `exclude` (pass -1 to keep everything).  Ties break toward the lower
// index so results are reproducible.
std::vector<int> nearest_k(const Vec3& query, const Points& cloud, int k,
                           int exclude) {
  std::vector<int> idx;
  idx.reserve(cloud.size());
  for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
    if (i != exclude) idx.push_back(i);
  }
  std::vector<double> d2(cloud.size(), 0.0);
  for (int i : idx) d2[static_cast<std::size_t>(i)] = (cloud[i] - query).squaredNorm();
  auto closer = [&](int a, int b) {
    const double da = d2[static_cast<std::size_t>(a)];
    const double db = d2[static_cast<std::size_t>(b)];
    return da < db || (da == db && a < b);
  };
  std::nth_element(idx.begin(), idx.begin() + k, idx.end(), closer);
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end(), closer);
  return idx;
}

// Best proper rotation mapping offsets `a` onto offsets `b` in the least
// squares sense.  Returns false when the offsets have rank < 2, which
// leaves the rotation underdetermined.
bool fit_rotation(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                  Eigen::Matrix3d& out) {
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) h += a[i] * b[i].transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  if (!(s(1) > 1e-12 * s(0))) return false;
  Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixV() * flip * svd.matrixU().transpose();
  }
  out = r;
  return true;
}

nlohmann::json vec3_json(const Vec3& v) {
  return nlohmann::json{v.x(), v.y(), v.z()};
}

nlohmann::json quat_json(const Quat& q) {
  return nlohmann::json{q.w(), q.x(), q.y(), q.z()};
}

Vec3 json_vec3(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw ValidationError("kernel file: position entries must be [x, y, z]");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Quat json_quat(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw ValidationError(
        "kernel file: orientation entries must be [w, x, y, z]");
  }
  return Quat(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
              j[3].get<double>());
}

}  // namespace

ParticleRotations estimate_rotations(const Points& x_prev,
                                     const Points& x_next, int k_rot) {
  if (x_prev.size() != x_next.size()) {
    throw ShapeError("rotation estimation: frames have " +
                     std::to_string(x_prev.size()) + " and " +
                     std::to_string(x_next.size()) +
                     " particles; correspondence requires equal counts");
  }
  const int n = static_cast<int>(x_prev.size());
  if (k_rot < 1) {
    throw ParamError("rotation estimation: neighbor count must be >= 1, got " +
                     std::to_string(k_rot));
  }
  if (n <= k_rot) {
    throw ParamError("rotation estimation: need more than " +
                     std::to_string(k_rot) + " particles, got " +
                     std::to_string(n));
  }

  ParticleRotations result;
  result.rot.assign(static_cast<std::size_t>(n), Quat::Identity());
  result.degenerate.assign(static_cast<std::size_t>(n), 0);

  std::vector<Vec3> prev_off(static_cast<std::size_t>(k_rot));
  std::vector<Vec3> next_off(static_cast<std::size_t>(k_rot));
  for (int p = 0; p < n; ++p) {
    const auto nbrs = nearest_k(x_next[p], x_next, k_rot, p);
    for (int j = 0; j < k_rot; ++j) {
      const int s = nbrs[static_cast<std::size_t>(j)];
      prev_off[static_cast<std::size_t>(j)] = x_prev[s] - x_prev[p];
      next_off[static_cast<std::size_t>(j)] = x_next[s] - x_next[p];
    }
    Eigen::Matrix3d r;
    if (fit_rotation(prev_off, next_off, r)) {
      Quat q(r);
      q.normalize();
      result.rot[static_cast<std::size_t>(p)] = q;
    } else {
      result.degenerate[static_cast<std::size_t>(p)] = 1;
    }
  }
  return result;
}

KernelWeights lbs_weights(const Vec3& center, const Points& particles,
                          int k_lbs) {
  if (k_lbs < 1) {
    throw ParamError("skinning weights: neighbor count must be >= 1, got " +
                     std::to_string(k_lbs));
  }
  if (static_cast<int>(particles.size()) < k_lbs) {
    throw ParamError("skinning weights: need at least " +
                     std::to_string(k_lbs) + " particles, got " +
                     std::to_string(particles.size()));
  }

  KernelWeights out;
  out.indices = nearest_k(center, particles, k_lbs, -1);
  out.weights.assign(out.indices.size(), 0.0);

  // A particle sitting on the center would make its inverse distance
  // overflow; give coincident particles all the weight instead.
  std::vector<double> dist(out.indices.size());
  int coincident = 0;
  for (std::size_t j = 0; j < out.indices.size(); ++j) {
    dist[j] = (particles[out.indices[j]] - center).norm();
    if (dist[j] < 1e-300) ++coincident;
  }
  if (coincident > 0) {
    const double w = 1.0 / coincident;
    for (std::size_t j = 0; j < out.indices.size(); ++j) {
      if (dist[j] < 1e-300) out.weights[j] = w;
    }
    return out;
  }
  double total = 0.0;
  for (double d : dist) total += 1.0 / d;
  for (std::size_t j = 0; j < out.indices.size(); ++j) {
    out.weights[j] = (1.0 / dist[j]) / total;
  }
  return out;
}

KernelSet lbs_apply(const KernelSet& kernels, const Points& x_prev,
                    const Points& x_next, const ParticleRotations& rotations,
                    int k_lbs) {
  if (kernels.centers.size() != kernels.quats.size()) {
    throw ShapeError("skinning: kernel set has " +
                     std::to_string(kernels.centers.size()) +
                     " centers but " + std::to_string(kernels.quats.size()) +
                     " orientations");
  }
  if (kernels.centers.empty()) {
    throw ContractError("skinning: kernel set is empty");
  }
  if (x_prev.size() != x_next.size()) {
    throw ShapeError("skinning: frames have " + std::to_string(x_prev.size()) +
                     " and " + std::to_string(x_next.size()) +
                     " particles; correspondence requires equal counts");
  }
  if (rotations.rot.size() != x_prev.size()) {
    throw ShapeError("skinning: " + std::to_string(rotations.rot.size()) +
                     " rotations for " + std::to_string(x_prev.size()) +
                     " particles");
  }

  KernelSet out = kernels;
  for (std::size_t i = 0; i < kernels.centers.size(); ++i) {
    const Vec3& mu = kernels.centers[i];
    const KernelWeights kw = lbs_weights(mu, x_prev, k_lbs);

    Vec3 center = Vec3::Zero();
    Eigen::Vector4d blend = Eigen::Vector4d::Zero();
    const Quat& anchor = rotations.rot[static_cast<std::size_t>(kw.indices[0])];
    for (std::size_t j = 0; j < kw.indices.size(); ++j) {
      const int p = kw.indices[j];
      const double w = kw.weights[j];
      const Quat& rp = rotations.rot[static_cast<std::size_t>(p)];
      center += w * (rp * (mu - x_prev[p]) + x_prev[p] +
                     (x_next[p] - x_prev[p]));
      // Quaternions double-cover rotations; align each sign with the nearest
      // neighbor's so the weighted sum blends instead of cancelling.
      const double sign = anchor.coeffs().dot(rp.coeffs()) < 0.0 ? -1.0 : 1.0;
      blend += (w * sign) * rp.coeffs();
    }

    out.centers[i] = center;
    const double norm = blend.norm();
    Quat mixed = Quat::Identity();
    if (norm > 1e-12) {
      mixed = Quat(blend(3), blend(0), blend(1), blend(2));
      mixed.normalize();
    }
    Quat composed = mixed * kernels.quats[i];
    composed.normalize();
    out.quats[i] = composed;
  }
  return out;
}

KernelSet load_kernels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) {
    throw FormatError("kernel file: cannot open " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("kernel file: " + path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("centers") || !j.contains("quats")) {
    throw ValidationError(
        "kernel file: expected an object with centers and quats");
  }
  const auto& jc = j["centers"];
  const auto& jq = j["quats"];
  if (!jc.is_array() || !jq.is_array() || jc.size() != jq.size()) {
    throw ValidationError(
        "kernel file: centers and quats must be arrays of equal length");
  }
  if (jc.empty()) {
    throw ValidationError("kernel file: kernel set is empty");
  }

  KernelSet ks;
  ks.centers.reserve(jc.size());
  ks.quats.reserve(jq.size());
  for (const auto& c : jc) ks.centers.push_back(json_vec3(c));
  for (const auto& q : jq) {
    Quat quat = json_quat(q);
    if (std::abs(quat.norm() - 1.0) > 1e-9) {
      throw ValidationError(
          "kernel file: orientation is not unit length (norm " +
          std::to_string(quat.norm()) + ")");
    }
    ks.quats.push_back(quat);
  }
  ks.extra = j.contains("extra") ? j["extra"] : nlohmann::json();
  return ks;
}

void save_kernels(const std::string& path, const KernelSet& kernels) {
  nlohmann::json j;
  j["centers"] = nlohmann::json::array();
  j["quats"] = nlohmann::json::array();
  for (const auto& c : kernels.centers) j["centers"].push_back(vec3_json(c));
  for (const auto& q : kernels.quats) j["quats"].push_back(quat_json(q));
  j["extra"] = kernels.extra;
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) {
    throw FormatError("kernel file: cannot write " + path);
  }
  out << j.dump(2) << "\n";
  if (!out.good()) {
    throw FormatError("kernel file: write failed for " + path);
  }
}

}  // namespace pgnd
