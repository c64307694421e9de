#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "pgnd/tensor.hpp"
#include "pgnd/types.hpp"

namespace pgnd {

// Cubic lattice of l^3 nodes with spacing dx. Node (i,j,k) sits at
// (i*dx, j*dx, k*dx) in grid frame; flat index is z-fastest.
struct Grid {
  int l = 50;
  double dx = 0.02;

  double extent() const { return (l - 1) * dx; }
  Vec3 center() const {
    const double c = 0.5 * extent();
    return Vec3(c, c, c);
  }
  std::int64_t num_nodes() const {
    return static_cast<std::int64_t>(l) * l * l;
  }
  std::int64_t flat(int i, int j, int k) const {
    return (static_cast<std::int64_t>(i) * l + j) * l + k;
  }
  Vec3 node_pos(std::int64_t flat_id) const {
    const int k = static_cast<int>(flat_id % l);
    const int j = static_cast<int>((flat_id / l) % l);
    const int i = static_cast<int>(flat_id / (static_cast<std::int64_t>(l) * l));
    return Vec3(i * dx, j * dx, k * dx);
  }
};

// Dense velocity field over all grid nodes.
struct GridField {
  Grid grid;
  std::vector<Vec3> v;  // size l^3

  explicit GridField(const Grid& g = Grid{})
      : grid(g), v(static_cast<std::size_t>(g.num_nodes()), Vec3::Zero()) {}
};

// A rigid drive region around a grasping gripper (grid frame).
struct GraspSpec {
  Vec3 center{0, 0, 0};
  Vec3 omega{0, 0, 0};
  Vec3 vel{0, 0, 0};
  double radius = 0.1;
};

// ---- quadratic B-spline ------------------------------------------------------

// N(u): 3/4 - u^2 for |u| <= 1/2; (3/2 - |u|)^2 / 2 for 1/2 < |u| <= 3/2; 0 else.
double bspline_weight_1d(double u);
double bspline_dweight_1d(double u);

// Lowest of the 3 support nodes for coordinate x: floor(x/dx - 1/2).
int spline_base(double x, double dx);

// ---- normalization -----------------------------------------------------------

struct Normalized {
  Points points;                // grid frame
  std::vector<ArmAction> arms;  // poses translated by the same offset
  Vec3 offset;                  // grid = world + offset
};

// Margin in nodes kept free on every side; capacity error if the cloud
// cannot fit. An empty cloud is a contract error.
Normalized normalize_to_grid(const Grid& grid, const Points& points,
                             const std::vector<ArmAction>& arms,
                             double margin_nodes = 2.0);

// ---- transfers & edits (dense, plain) -----------------------------------------

// Grid-to-particle: weighted sum of the 27 support-node velocities.
// Capacity error if any particle lacks full support.
Points g2p(const GridField& field, const Points& positions);

// Assign rigid velocities on nodes within the grasp radius. Idempotent.
void gve_grasp(GridField& field, const GraspSpec& grasp);

// Project downward velocities to zero on nodes in the contact band
// (z <= ground_z + dx) and shrink the tangential part by Coulomb friction.
// Idempotent.
void gve_ground(GridField& field, double ground_z, double mu);

// ---- active node set -----------------------------------------------------------

// Union of the 3x3x3 spline supports of the given grid-frame positions.
// Node order is sorted flat id, so it is deterministic.
struct ActiveSet {
  std::vector<std::int64_t> nodes;           // sorted flat ids
  std::unordered_map<std::int64_t, int> row; // flat id -> row in tensors

  int size() const { return static_cast<int>(nodes.size()); }
};
ActiveSet build_active_set(const Grid& grid, const Points& grid_positions);

// ---- differentiable versions (active-set tensors) ------------------------------

// Translation offset that centers the cloud bounding box on the grid center.
// pos_world: [n x 3]; returns [1 x 3].
tg::Tensor normalize_offset_t(const Grid& grid, const tg::Tensor& pos_world);

// G2P with gradients through both node velocities and particle positions.
// node_v: [A x 3] over active.nodes; pos_grid: [n x 3] grid frame.
tg::Tensor g2p_t(const Grid& grid, const ActiveSet& active,
                 const tg::Tensor& node_v, const tg::Tensor& pos_grid);

// Ground contact editing on active-node velocities; node_z are the fixed
// grid-frame node heights. Piecewise-smooth with analytic backward.
tg::Tensor gve_ground_t(const tg::Tensor& node_v,
                        const std::vector<double>& node_z, double ground_z,
                        double band, double mu);

// Grasp editing: rows within radius of the (numeric) center get the rigid
// field omega x (x_g - c) + v, built from the center tensor so gradients
// flow through the normalization offset. center_t: [1 x 3] grid frame.
tg::Tensor gve_grasp_t(const tg::Tensor& node_v,
                       const std::vector<Vec3>& node_pos,
                       const tg::Tensor& center_t, const Vec3& omega,
                       const Vec3& vel, double radius);

}  // namespace pgnd
