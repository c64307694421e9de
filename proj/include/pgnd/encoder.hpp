#pragma once

#include <vector>

#include "pgnd/nn.hpp"
#include "pgnd/tensor.hpp"
#include "pgnd/types.hpp"

namespace pgnd {

// ---------------------------------------------------------------------------
// Point-set encoder: shared per-point MLP, max-pooled global feature
// concatenated back onto every point, mixed down to a d-dim feature row.
// ---------------------------------------------------------------------------

struct EncoderDims {
  int in = 13;      // 3 position + 3*(h+1) velocities + 1 robot tag
  int hidden = 64;  // per-point MLP width (also the local feature size)
  int feat = 64;    // output feature dimension d
};

struct EncoderParams {
  EncoderDims dims;
  tg::Mlp point;  // [in -> hidden -> hidden]
  tg::Mlp mix;    // [2*hidden -> feat]
};

EncoderParams make_encoder(const EncoderDims& dims, Rng& rng,
                           bool requires_grad = true);

// input: [n x dims.in], rows follow particle order. Output: [n x feat].
tg::Tensor encode_points_t(const EncoderParams& enc, const tg::Tensor& input);

// ---------------------------------------------------------------------------
// Radius pooling: mean of feature rows within Euclidean distance r of the
// query point; an empty neighborhood yields the zero vector.
// ---------------------------------------------------------------------------

struct PooledFeature {
  std::vector<double> value;
  int support_count = 0;
};

PooledFeature pool_local(const tg::Tensor& features, const Points& positions,
                         const Vec3& query, double r);

// Batch version over many queries; returns [q x d]. Membership and counts
// are decided from the numeric positions (they carry no gradient); feature
// gradients flow through. `support_out`, when given, receives the counts.
tg::Tensor pool_local_t(const tg::Tensor& features, const Points& positions,
                        const std::vector<Vec3>& queries, double r,
                        std::vector<int>* support_out = nullptr);

// ---------------------------------------------------------------------------
// Sinusoidal positional encoding: per axis a, per k < F, the pair
// (sin(2^k pi x_a), cos(2^k pi x_a)); axis-major concatenation, length 6F.
// ---------------------------------------------------------------------------

std::vector<double> posenc(const Vec3& x, int freqs = 6);
tg::Tensor posenc_t(const tg::Tensor& pos, int freqs = 6);  // [q x 3] -> [q x 6F]

// ---------------------------------------------------------------------------
// Velocity-field MLP on concat(posenc(query), pooled feature).
// ---------------------------------------------------------------------------

struct FieldDims {
  int freqs = 6;    // positional-encoding frequency count
  int feat = 64;    // pooled feature dimension d
  int hidden = 128; // width of the two hidden layers
};

struct FieldParams {
  FieldDims dims;
  tg::Mlp mlp;  // [6*freqs + feat -> hidden -> hidden -> 3]
};

FieldParams make_field(const FieldDims& dims, Rng& rng,
                       bool requires_grad = true);

// queries: [q x 3] grid-frame positions; pooled: [q x feat]. Output [q x 3].
tg::Tensor field_eval_t(const FieldParams& field, const tg::Tensor& queries,
                        const tg::Tensor& pooled);

Vec3 field_eval(const FieldParams& field, const Vec3& query,
                const PooledFeature& pooled);

}  // namespace pgnd
