#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgnd/types.hpp"

namespace pgnd {

// A set of oriented kernels riding on the particle cloud.  Only centers and
// orientations are ever modified; everything else a kernel file carries
// (scales, colors, opacities, ...) is kept opaquely in `extra` and written
// back untouched.
struct KernelSet {
  Points centers;            // K positions (m)
  std::vector<Quat> quats;   // K unit orientations
  nlohmann::json extra;      // opaque payload, round-tripped verbatim

  std::size_t size() const { return centers.size(); }
};

// Per-particle local rotations between two frames of the same cloud.
// `degenerate[p]` is set where the neighborhood could not determine a
// rotation (offsets of rank < 2); those entries fall back to the identity.
struct ParticleRotations {
  std::vector<Quat> rot;
  std::vector<std::uint8_t> degenerate;

  bool any_degenerate() const {
    for (std::uint8_t d : degenerate) {
      if (d) return true;
    }
    return false;
  }
};

// Interpolation weights of one kernel over its nearest particles.
struct KernelWeights {
  std::vector<int> indices;
  std::vector<double> weights;
};

// Estimate each particle's local rotation from frame `x_prev` to frame
// `x_next`, assuming local rigidity: the best-fit rotation (least squares
// over the k_rot nearest neighbors' relative offsets, proper-rotation
// constrained) that maps previous-frame offsets onto next-frame offsets.
ParticleRotations estimate_rotations(const Points& x_prev,
                                     const Points& x_next, int k_rot = 8);

// Inverse-distance weights of `center` over its k_lbs nearest particles,
// normalized to sum 1.  A particle coinciding with the center takes all the
// weight.
KernelWeights lbs_weights(const Vec3& center, const Points& particles,
                          int k_lbs = 8);

// Advance the kernels by one frame of particle motion: each kernel blends,
// over its nearest control particles, the particle's rotation applied to the
// kernel's local offset plus the particle's displacement; orientations blend
// the same rotations (sign-aligned weighted sum, normalized) composed onto
// the current orientation.
KernelSet lbs_apply(const KernelSet& kernels, const Points& x_prev,
                    const Points& x_next, const ParticleRotations& rotations,
                    int k_lbs = 8);

// Kernel file I/O: UTF-8 JSON {"centers": [[x,y,z],...],
// "quats": [[w,x,y,z],...], "extra": <anything>}.
KernelSet load_kernels(const std::string& path);
void save_kernels(const std::string& path, const KernelSet& kernels);

}  // namespace pgnd
