#include "pgnd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>

#include "pgnd/error.hpp"

namespace pgnd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kBruteForceLimit = 256;  // reference-cloud size cutoff

double nn_brute(const Points& to, const Vec3& q) {
  double best = kInf;
  for (const auto& p : to) best = std::min(best, (p - q).squaredNorm());
  return std::sqrt(best);
}

// Uniform spatial hash over `to` with an expanding Chebyshev-ring search.
// Exact: a ring is skipped only when no point in it can beat the current
// best (with a small slack so borderline cells are still examined).
class SpatialHash {
 public:
  explicit SpatialHash(const Points& to) : to_(to) {
    Vec3 lo = to[0], hi = to[0];
    for (const auto& p : to) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec3 span = hi - lo;
    const double vol = std::max(span.x(), 1e-9) * std::max(span.y(), 1e-9) *
                       std::max(span.z(), 1e-9);
    // Cell size ~ expected nearest-neighbor spacing for a uniform cloud.
    cell_ = std::cbrt(vol / static_cast<double>(to.size()));
    cell_ = std::max(cell_, 1e-9);
    lo_ = lo;
    clo_ = coord(to[0]);
    chi_ = clo_;
    for (int i = 0; i < static_cast<int>(to.size()); ++i) {
      const Eigen::Vector3i c = coord(to[i]);
      clo_ = clo_.cwiseMin(c);
      chi_ = chi_.cwiseMax(c);
      cells_[key(c)].push_back(i);
    }
  }

  double nearest(const Vec3& q) const {
    const Eigen::Vector3i c = coord(q);
    // Ring range that can intersect the occupied cell box: r0 reaches its
    // nearest face, r1 its farthest corner. Beyond r1 every cell is empty.
    int r0 = 0, r1 = 0;
    for (int k = 0; k < 3; ++k) {
      r0 = std::max({r0, clo_[k] - c[k], c[k] - chi_[k]});
      r1 = std::max({r1, chi_[k] - c[k], c[k] - clo_[k]});
    }
    double best2 = kInf;
    for (int r = r0; r <= r1; ++r) {
      if (best2 < kInf) {
        // No point in ring r can be closer than (r-1)*cell; the slack keeps
        // borderline cells in play so the result matches brute force.
        const double bound = (r - 1) * cell_;
        if (bound > 0.0 && bound * bound > best2 * (1.0 + 1e-9) + 1e-18) break;
      }
      scan_ring(c, r, q, best2);
    }
    return std::sqrt(best2);
  }

 private:
  Eigen::Vector3i coord(const Vec3& p) const {
    return Eigen::Vector3i(
        static_cast<int>(std::floor((p.x() - lo_.x()) / cell_)),
        static_cast<int>(std::floor((p.y() - lo_.y()) / cell_)),
        static_cast<int>(std::floor((p.z() - lo_.z()) / cell_)));
  }

  static std::int64_t key(const Eigen::Vector3i& c) {
    // 21 bits per axis, offset to keep coordinates positive
    const std::int64_t off = 1 << 20;
    return ((c.x() + off) << 42) | ((c.y() + off) << 21) |
           (static_cast<std::int64_t>(c.z()) + off);
  }

  // Examine every occupied cell at Chebyshev distance exactly r from c,
  // enumerating only the ring's intersection with the occupied cell box so
  // rings through empty space cost nothing.
  void scan_ring(const Eigen::Vector3i& c, int r, const Vec3& q,
                 double& best2) const {
    auto visit = [&](int ix, int iy, int iz) {
      auto it = cells_.find(key(Eigen::Vector3i(ix, iy, iz)));
      if (it == cells_.end()) return;
      for (int i : it->second) {
        best2 = std::min(best2, (to_[i] - q).squaredNorm());
      }
    };
    if (r == 0) {
      visit(c.x(), c.y(), c.z());
      return;
    }
    const int ylo = std::max(c.y() - r, clo_.y());
    const int yhi = std::min(c.y() + r, chi_.y());
    const int zlo = std::max(c.z() - r, clo_.z());
    const int zhi = std::min(c.z() + r, chi_.z());
    for (int sx : {-r, r}) {  // the two x-faces of the ring cube
      const int ix = c.x() + sx;
      if (ix < clo_.x() || ix > chi_.x()) continue;
      for (int iy = ylo; iy <= yhi; ++iy) {
        for (int iz = zlo; iz <= zhi; ++iz) visit(ix, iy, iz);
      }
    }
    const int xlo = std::max(c.x() - r + 1, clo_.x());  // interior: no re-visit
    const int xhi = std::min(c.x() + r - 1, chi_.x());
    for (int sy : {-r, r}) {  // y-faces
      const int iy = c.y() + sy;
      if (iy < clo_.y() || iy > chi_.y()) continue;
      for (int ix = xlo; ix <= xhi; ++ix) {
        for (int iz = zlo; iz <= zhi; ++iz) visit(ix, iy, iz);
      }
    }
    const int iylo = std::max(c.y() - r + 1, clo_.y());
    const int iyhi = std::min(c.y() + r - 1, chi_.y());
    for (int sz : {-r, r}) {  // z-faces
      const int iz = c.z() + sz;
      if (iz < clo_.z() || iz > chi_.z()) continue;
      for (int ix = xlo; ix <= xhi; ++ix) {
        for (int iy = iylo; iy <= iyhi; ++iy) visit(ix, iy, iz);
      }
    }
  }

  const Points& to_;
  Vec3 lo_;
  Eigen::Vector3i clo_ = Eigen::Vector3i::Zero();
  Eigen::Vector3i chi_ = Eigen::Vector3i::Zero();
  double cell_ = 1.0;
  std::unordered_map<std::int64_t, std::vector<int>> cells_;
};

}  // namespace

std::vector<double> nn_distances(const Points& from, const Points& to) {
  if (to.empty()) throw ContractError("nearest neighbor: empty reference cloud");
  std::vector<double> out;
  out.reserve(from.size());
  if (static_cast<int>(to.size()) < kBruteForceLimit) {
    for (const auto& q : from) out.push_back(nn_brute(to, q));
    return out;
  }
  SpatialHash hash(to);
  for (const auto& q : from) out.push_back(hash.nearest(q));
  return out;
}

double mde(const Points& pred, const Points& truth) {
  if (pred.size() != truth.size()) {
    throw ContractError("mde: clouds have " + std::to_string(pred.size()) +
                        " vs " + std::to_string(truth.size()) + " points");
  }
  if (pred.empty()) throw ContractError("mde: empty clouds");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sum += (pred[i] - truth[i]).norm();
  }
  return sum / static_cast<double>(pred.size());
}

double chamfer(const Points& a, const Points& b) {
  if (a.empty() || b.empty()) throw ContractError("chamfer: empty cloud");
  double ab = 0.0, ba = 0.0;
  for (double d : nn_distances(a, b)) ab += d;
  for (double d : nn_distances(b, a)) ba += d;
  return 0.5 * (ab / static_cast<double>(a.size()) +
                ba / static_cast<double>(b.size()));
}

std::vector<int> min_cost_assignment(const std::vector<double>& cost, int n) {
  if (n < 1) throw ContractError("assignment: empty cost matrix");
  if (cost.size() != static_cast<std::size_t>(n) * n) {
    throw ShapeError("assignment: cost matrix size mismatch");
  }
  // Hungarian algorithm with row/column potentials, O(n^3).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) match[p[j] - 1] = j - 1;
  }
  return match;
}

double emd(const Points& a, const Points& b) {
  if (a.size() != b.size()) {
    throw ContractError("emd: clouds have " + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) +
                        " points (no partial matching)");
  }
  if (a.empty()) throw ContractError("emd: empty clouds");
  const int n = static_cast<int>(a.size());
  if (n > 512) {
    throw ParamError("emd: exact assignment supports at most 512 points");
  }
  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      cost[static_cast<std::size_t>(i) * n + j] = (a[i] - b[j]).norm();
    }
  }
  std::vector<int> match = min_cost_assignment(cost, n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    sum += cost[static_cast<std::size_t>(i) * n + match[i]];
  }
  return sum / static_cast<double>(n);
}

MetricStat summarize(const std::vector<double>& per_clip) {
  MetricStat s;
  s.per_clip = per_clip;
  if (per_clip.empty()) return s;
  double sum = 0.0;
  for (double v : per_clip) sum += v;
  s.mean = sum / static_cast<double>(per_clip.size());
  double var = 0.0;
  for (double v : per_clip) var += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(var / static_cast<double>(per_clip.size()));
  return s;
}

}  // namespace pgnd
