#include "pgnd/encoder.hpp"

#include <cmath>
#include <string>

#include "pgnd/error.hpp"

namespace pgnd {

using tg::Tensor;

namespace {

void require_finite(const Tensor& t, const char* where) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw ValidationError(std::string(where) + ": non-finite input");
    }
  }
}

}  // namespace

EncoderParams make_encoder(const EncoderDims& dims, Rng& rng,
                           bool requires_grad) {
  EncoderParams enc;
  enc.dims = dims;
  enc.point = tg::make_mlp({dims.in, dims.hidden, dims.hidden}, rng, requires_grad);
  enc.mix = tg::make_mlp({2 * dims.hidden, dims.feat}, rng, requires_grad);
  return enc;
}

Tensor encode_points_t(const EncoderParams& enc, const Tensor& input) {
  if (input.rank() != 2 || input.shape()[1] != enc.dims.in) {
    throw ShapeError("encode_points: input " + tg::shape_str(input.shape()) +
                     " vs expected [n x " + std::to_string(enc.dims.in) + "]");
  }
  if (input.shape()[0] == 0) {
    throw ContractError("encode_points: empty particle set");
  }
  require_finite(input, "encode_points");
  Tensor local = tg::mlp_forward(enc.point, input);           // [n x hidden]
  Tensor global = tg::colmax(local);                      // [1 x hidden]
  Tensor cat = tg::concat_cols(
      {local, tg::repeat_rows(global, input.shape()[0])});
  return tg::mlp_forward(enc.mix, cat);                       // [n x feat]
}

PooledFeature pool_local(const Tensor& features, const Points& positions,
                         const Vec3& query, double r) {
  Tensor batch = pool_local_t(features, positions, {query}, r, nullptr);
  PooledFeature out;
  out.value.assign(batch.data().begin(), batch.data().end());
  const double r2 = r * r;
  for (const auto& p : positions) {
    if ((p - query).squaredNorm() <= r2) ++out.support_count;
  }
  return out;
}

Tensor pool_local_t(const Tensor& features, const Points& positions,
                    const std::vector<Vec3>& queries, double r,
                    std::vector<int>* support_out) {
  if (r <= 0.0) throw ParamError("pool_local: radius must be positive");
  const std::int64_t n = features.shape()[0];
  if (static_cast<std::int64_t>(positions.size()) != n) {
    throw ShapeError("pool_local: " + std::to_string(positions.size()) +
                     " positions vs features " + tg::shape_str(features.shape()));
  }
  const std::int64_t q = static_cast<std::int64_t>(queries.size());
  const double r2 = r * r;

  std::vector<int> gather, scatter;
  std::vector<int> counts(static_cast<std::size_t>(q), 0);
  for (std::int64_t qi = 0; qi < q; ++qi) {
    const Vec3& c = queries[static_cast<std::size_t>(qi)];
    for (std::int64_t i = 0; i < n; ++i) {
      if ((positions[static_cast<std::size_t>(i)] - c).squaredNorm() <= r2) {
        gather.push_back(static_cast<int>(i));
        scatter.push_back(static_cast<int>(qi));
        ++counts[static_cast<std::size_t>(qi)];
      }
    }
  }
  if (support_out) *support_out = counts;

  std::vector<double> inv(static_cast<std::size_t>(q));
  for (std::int64_t qi = 0; qi < q; ++qi) {
    const int c = counts[static_cast<std::size_t>(qi)];
    inv[static_cast<std::size_t>(qi)] = c > 0 ? 1.0 / c : 0.0;
  }
  if (gather.empty()) {
    // no member anywhere: all-zero pooled block, detached from the tape
    return Tensor::zeros({q, features.shape()[1]});
  }
  Tensor picked = tg::gather_rows(features, gather);
  Tensor sums = tg::scatter_add_rows(picked, scatter, q);
  return tg::scale_rows_const(sums, inv);
}

std::vector<double> posenc(const Vec3& x, int freqs) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(6 * freqs));
  for (int a = 0; a < 3; ++a) {
    double w = M_PI;
    for (int k = 0; k < freqs; ++k, w *= 2.0) {
      out.push_back(std::sin(w * x[a]));
      out.push_back(std::cos(w * x[a]));
    }
  }
  return out;
}

Tensor posenc_t(const Tensor& pos, int freqs) {
  if (pos.rank() != 2 || pos.shape()[1] != 3) {
    throw ShapeError("posenc: positions " + tg::shape_str(pos.shape()) +
                     " vs expected [q x 3]");
  }
  std::vector<Tensor> cols;
  cols.reserve(static_cast<std::size_t>(6 * freqs));
  for (int a = 0; a < 3; ++a) {
    Tensor xa = tg::slice_cols(pos, a, a + 1);
    double w = M_PI;
    for (int k = 0; k < freqs; ++k, w *= 2.0) {
      Tensor scaled = tg::mul_scalar(xa, w);
      cols.push_back(tg::sin(scaled));
      cols.push_back(tg::cos(scaled));
    }
  }
  return tg::concat_cols(cols);
}

FieldParams make_field(const FieldDims& dims, Rng& rng, bool requires_grad) {
  FieldParams f;
  f.dims = dims;
  f.mlp = tg::make_mlp({6 * dims.freqs + dims.feat, dims.hidden, dims.hidden, 3},
                   rng, requires_grad);
  return f;
}

Tensor field_eval_t(const FieldParams& field, const Tensor& queries,
                    const Tensor& pooled) {
  if (pooled.rank() != 2 || pooled.shape()[1] != field.dims.feat ||
      pooled.shape()[0] != queries.shape()[0]) {
    throw ShapeError("field_eval: pooled " + tg::shape_str(pooled.shape()) +
                     " vs queries " + tg::shape_str(queries.shape()) +
                     " and feature dim " + std::to_string(field.dims.feat));
  }
  require_finite(queries, "field_eval");
  require_finite(pooled, "field_eval");
  Tensor input = tg::concat_cols({posenc_t(queries, field.dims.freqs), pooled});
  return tg::mlp_forward(field.mlp, input);
}

Vec3 field_eval(const FieldParams& field, const Vec3& query,
                const PooledFeature& pooled) {
  Tensor q = Tensor::from({query.x(), query.y(), query.z()}, {1, 3}, false);
  std::vector<double> v = pooled.value;
  Tensor p = Tensor::from(std::move(v),
                          {1, static_cast<std::int64_t>(pooled.value.size())},
                          false);
  Tensor out = field_eval_t(field, q, p);
  return Vec3(out.at(0, 0), out.at(0, 1), out.at(0, 2));
}

}  // namespace pgnd
