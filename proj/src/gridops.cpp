#include "pgnd/gridops.hpp"

#include <algorithm>
#include <cmath>

#include "pgnd/error.hpp"

namespace pgnd {

using tg::Tensor;

double bspline_weight_1d(double u) {
  const double a = std::abs(u);
  if (a <= 0.5) return 0.75 - u * u;
  if (a <= 1.5) {
    const double t = 1.5 - a;
    return 0.5 * t * t;
  }
  return 0.0;
}

double bspline_dweight_1d(double u) {
  const double a = std::abs(u);
  if (a <= 0.5) return -2.0 * u;
  if (a <= 1.5) return u > 0.0 ? -(1.5 - a) : (1.5 - a);
  return 0.0;
}

int spline_base(double x, double dx) {
  return static_cast<int>(std::floor(x / dx - 0.5));
}

Normalized normalize_to_grid(const Grid& grid, const Points& points,
                             const std::vector<ArmAction>& arms,
                             double margin_nodes) {
  if (points.empty()) throw ContractError("normalize_to_grid: empty cloud");
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 size = hi - lo;
  const double usable = grid.extent() - 2.0 * margin_nodes * grid.dx;
  for (int a = 0; a < 3; ++a) {
    if (size[a] > usable) {
      throw CapacityError("normalize_to_grid: cloud extent " +
                          std::to_string(size[a]) + " m on axis " +
                          std::to_string(a) + " exceeds usable grid extent " +
                          std::to_string(usable) + " m");
    }
  }
  // Subtract-then-shift keeps cancellation tight under world translations.
  const Vec3 bbox_center = 0.5 * (lo + hi);
  const Vec3 gc = grid.center();
  Normalized out;
  out.offset = gc - bbox_center;
  out.points.reserve(points.size());
  for (const auto& p : points) out.points.push_back((p - bbox_center) + gc);
  out.arms = arms;
  for (auto& a : out.arms) a.pos = (a.pos - bbox_center) + gc;
  return out;
}

namespace {

struct Support {
  int base[3];
  double w[3][3];  // [axis][offset]
};

Support particle_support(const Grid& grid, const Vec3& p) {
  Support s;
  for (int a = 0; a < 3; ++a) {
    const double xs = p[a] / grid.dx;
    s.base[a] = spline_base(p[a], grid.dx);
    if (s.base[a] < 0 || s.base[a] + 2 > grid.l - 1) {
      throw CapacityError("g2p: particle at grid coordinate " +
                          std::to_string(xs) + " lacks full spline support (l=" +
                          std::to_string(grid.l) + ")");
    }
    for (int o = 0; o < 3; ++o) {
      s.w[a][o] = bspline_weight_1d(xs - (s.base[a] + o));
    }
  }
  return s;
}

}  // namespace

Points g2p(const GridField& field, const Points& positions) {
  Points out;
  out.reserve(positions.size());
  for (const auto& p : positions) {
    const Support s = particle_support(field.grid, p);
    Vec3 v = Vec3::Zero();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
          const double w = s.w[0][i] * s.w[1][j] * s.w[2][k];
          v += w * field.v[static_cast<std::size_t>(field.grid.flat(
                   s.base[0] + i, s.base[1] + j, s.base[2] + k))];
        }
      }
    }
    out.push_back(v);
  }
  return out;
}

void gve_grasp(GridField& field, const GraspSpec& grasp) {
  const double r2 = grasp.radius * grasp.radius;
  for (std::int64_t id = 0; id < field.grid.num_nodes(); ++id) {
    const Vec3 x = field.grid.node_pos(id);
    if ((x - grasp.center).squaredNorm() <= r2) {
      field.v[static_cast<std::size_t>(id)] =
          grasp.omega.cross(x - grasp.center) + grasp.vel;
    }
  }
}

void gve_ground(GridField& field, double ground_z, double mu) {
  const double band = field.grid.dx;
  const double eps = 1e-10;
  for (std::int64_t id = 0; id < field.grid.num_nodes(); ++id) {
    const Vec3 x = field.grid.node_pos(id);
    if (x.z() > ground_z + band) continue;
    Vec3& v = field.v[static_cast<std::size_t>(id)];
    if (v.z() >= 0.0) continue;
    const double vt = std::sqrt(v.x() * v.x() + v.y() * v.y());
    const double s = std::max(0.0, 1.0 - mu * (-v.z()) / (vt + eps));
    v = Vec3(v.x() * s, v.y() * s, 0.0);
  }
}

ActiveSet build_active_set(const Grid& grid, const Points& grid_positions) {
  ActiveSet out;
  std::vector<std::int64_t> ids;
  ids.reserve(grid_positions.size() * 27);
  for (const auto& p : grid_positions) {
    const Support s = particle_support(grid, p);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
          ids.push_back(grid.flat(s.base[0] + i, s.base[1] + j, s.base[2] + k));
        }
      }
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  out.nodes = std::move(ids);
  out.row.reserve(out.nodes.size() * 2);
  for (std::size_t r = 0; r < out.nodes.size(); ++r) {
    out.row.emplace(out.nodes[r], static_cast<int>(r));
  }
  return out;
}

Tensor normalize_offset_t(const Grid& grid, const Tensor& pos_world) {
  const Vec3 gc = grid.center();
  Tensor lo = tg::colmin(pos_world);
  Tensor hi = tg::colmax(pos_world);
  Tensor center = tg::mul_scalar(tg::add(lo, hi), 0.5);
  Tensor gct = Tensor::from({gc.x(), gc.y(), gc.z()}, {1, 3}, false);
  return tg::sub(gct, center);
}

Tensor g2p_t(const Grid& grid, const ActiveSet& active, const Tensor& node_v,
             const Tensor& pos_grid) {
  const std::int64_t n = pos_grid.shape()[0];
  if (node_v.shape()[0] != active.size() || node_v.shape()[1] != 3) {
    throw ShapeError("g2p_t: node_v is " + tg::shape_str(node_v.shape()) +
                     " for " + std::to_string(active.size()) + " active nodes");
  }

  // Numeric bases drive which nodes are touched; weights stay on the tape.
  std::vector<int> base(static_cast<std::size_t>(n) * 3);
  for (std::int64_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      const double x = pos_grid.at(i, a);
      const int b = spline_base(x, grid.dx);
      if (b < 0 || b + 2 > grid.l - 1) {
        throw CapacityError("g2p_t: particle " + std::to_string(i) +
                            " lacks full spline support");
      }
      base[i * 3 + a] = b;
    }
  }

  // Per-axis weights: w_axis[a] is [n x 3] (columns = node offsets 0..2).
  Tensor w_axis[3];
  for (int a = 0; a < 3; ++a) {
    Tensor xs = tg::mul_scalar(tg::slice_cols(pos_grid, a, a + 1), 1.0 / grid.dx);
    std::vector<Tensor> cols;
    for (int o = 0; o < 3; ++o) {
      std::vector<double> shift(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) {
        shift[static_cast<std::size_t>(i)] = -static_cast<double>(base[i * 3 + a] + o);
      }
      Tensor u = tg::add_const(xs, shift);
      cols.push_back(tg::map_unary(u, &bspline_weight_1d, &bspline_dweight_1d));
    }
    w_axis[a] = tg::concat_cols(cols);
  }

  // Combined 27 weights per particle, z-fastest to match flat node order.
  std::vector<Tensor> combo;
  combo.reserve(27);
  for (int i = 0; i < 3; ++i) {
    Tensor wx = tg::slice_cols(w_axis[0], i, i + 1);
    for (int j = 0; j < 3; ++j) {
      Tensor wxy = tg::mul(wx, tg::slice_cols(w_axis[1], j, j + 1));
      for (int k = 0; k < 3; ++k) {
        combo.push_back(tg::mul(wxy, tg::slice_cols(w_axis[2], k, k + 1)));
      }
    }
  }
  Tensor W = tg::concat_cols(combo);                       // [n x 27]
  Tensor Wflat = tg::reshape(W, {n * 27, 1});

  std::vector<int> gather_idx(static_cast<std::size_t>(n) * 27);
  std::vector<int> scatter_idx(static_cast<std::size_t>(n) * 27);
  std::size_t c = 0;
  for (std::int64_t p = 0; p < n; ++p) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
          const std::int64_t id = grid.flat(base[p * 3 + 0] + i,
                                            base[p * 3 + 1] + j,
                                            base[p * 3 + 2] + k);
          auto it = active.row.find(id);
          if (it == active.row.end()) {
            throw ContractError("g2p_t: support node missing from active set");
          }
          gather_idx[c] = it->second;
          scatter_idx[c] = static_cast<int>(p);
          ++c;
        }
      }
    }
  }

  Tensor gathered = tg::gather_rows(node_v, gather_idx);   // [27n x 3]
  Tensor weighted = tg::rowscale(gathered, Wflat);
  return tg::scatter_add_rows(weighted, scatter_idx, n);   // [n x 3]
}

Tensor gve_ground_t(const Tensor& node_v, const std::vector<double>& node_z,
                    double ground_z, double band, double mu) {
  const std::int64_t A = node_v.shape()[0];
  if (node_v.shape()[1] != 3 ||
      static_cast<std::int64_t>(node_z.size()) != A) {
    throw ShapeError("gve_ground_t: node_v " + tg::shape_str(node_v.shape()) +
                     " vs " + std::to_string(node_z.size()) + " heights");
  }
  const double eps = 1e-10;
  const auto& in = node_v.data();
  std::vector<double> out = in;
  std::vector<char> edited(static_cast<std::size_t>(A), 0);
  for (std::int64_t i = 0; i < A; ++i) {
    if (node_z[static_cast<std::size_t>(i)] > ground_z + band) continue;
    const double vx = in[i * 3 + 0], vy = in[i * 3 + 1], vz = in[i * 3 + 2];
    if (vz >= 0.0) continue;
    const double vt = std::sqrt(vx * vx + vy * vy);
    const double s = std::max(0.0, 1.0 - mu * (-vz) / (vt + eps));
    out[i * 3 + 0] = vx * s;
    out[i * 3 + 1] = vy * s;
    out[i * 3 + 2] = 0.0;
    edited[static_cast<std::size_t>(i)] = 1;
  }

  return tg::custom_op(
      {node_v}, node_v.shape(), std::move(out),
      [A, mu, eps, edited](tg::TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::int64_t i = 0; i < A; ++i) {
          const double gx = self.grad[i * 3 + 0];
          const double gy = self.grad[i * 3 + 1];
          const double gz = self.grad[i * 3 + 2];
          if (!edited[static_cast<std::size_t>(i)]) {
            p->grad[i * 3 + 0] += gx;
            p->grad[i * 3 + 1] += gy;
            p->grad[i * 3 + 2] += gz;
            continue;
          }
          const double vx = p->data[i * 3 + 0];
          const double vy = p->data[i * 3 + 1];
          const double vz = p->data[i * 3 + 2];
          const double vt = std::sqrt(vx * vx + vy * vy);
          const double s = 1.0 - mu * (-vz) / (vt + eps);
          if (s <= 0.0) {
            // fully stuck: output identically zero around this point
            continue;
          }
          // out_x = vx * s(vx, vy, vz), out_y = vy * s, out_z = 0
          const double d = vt + eps;
          const double ds_dz = mu / d;
          double ds_dx = 0.0, ds_dy = 0.0;
          if (vt > 0.0) {
            const double common = mu * vz / (d * d);  // note vz < 0
            // s = 1 + mu*vz/d; ds/dvx = -mu*vz*vx/(vt*d^2)
            ds_dx = -common * vx / vt;
            ds_dy = -common * vy / vt;
          }
          p->grad[i * 3 + 0] += gx * (s + vx * ds_dx) + gy * (vy * ds_dx);
          p->grad[i * 3 + 1] += gx * (vx * ds_dy) + gy * (s + vy * ds_dy);
          p->grad[i * 3 + 2] += gx * (vx * ds_dz) + gy * (vy * ds_dz);
        }
      });
}

Tensor gve_grasp_t(const Tensor& node_v, const std::vector<Vec3>& node_pos,
                   const Tensor& center_t, const Vec3& omega, const Vec3& vel,
                   double radius) {
  const std::int64_t A = node_v.shape()[0];
  if (node_v.shape()[1] != 3 ||
      static_cast<std::int64_t>(node_pos.size()) != A) {
    throw ShapeError("gve_grasp_t: node_v " + tg::shape_str(node_v.shape()) +
                     " vs " + std::to_string(node_pos.size()) + " positions");
  }
  const Vec3 c_now(center_t.at(0, 0), center_t.at(0, 1), center_t.at(0, 2));
  std::vector<int> rows;
  std::vector<double> xs;
  const double r2 = radius * radius;
  for (std::int64_t i = 0; i < A; ++i) {
    const Vec3& x = node_pos[static_cast<std::size_t>(i)];
    if ((x - c_now).squaredNorm() <= r2) {
      rows.push_back(static_cast<int>(i));
      xs.push_back(x.x());
      xs.push_back(x.y());
      xs.push_back(x.z());
    }
  }
  if (rows.empty()) return node_v;

  const std::int64_t E = static_cast<std::int64_t>(rows.size());
  Tensor node_x = Tensor::from(std::move(xs), {E, 3}, false);
  Tensor rel = tg::sub(node_x, tg::repeat_rows(center_t, E));
  // omega x r as a row-vector product with the transposed skew matrix
  Tensor skew_t = Tensor::from({0.0, omega.z(), -omega.y(),
                                -omega.z(), 0.0, omega.x(),
                                omega.y(), -omega.x(), 0.0},
                               {3, 3}, false);
  Tensor vals = tg::add_rowvec(tg::matmul(rel, skew_t),
                               Tensor::from({vel.x(), vel.y(), vel.z()}, {3}, false));
  return tg::replace_rows(node_v, rows, vals);
}

}  // namespace pgnd
