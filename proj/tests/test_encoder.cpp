#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "pgnd/encoder.hpp"
#include "pgnd/error.hpp"
#include "pgnd/rng.hpp"
#include "testutil.hpp"

using namespace pgnd;
using tg::Tensor;
using testutil::check_gradients;
using testutil::rand_tensor;
using testutil::weighted_sum;

TEST_CASE("encoder construction follows the configured dimensions") {
  Rng rng(3);
  EncoderDims dims;  // defaults
  CHECK(dims.in == 13);
  CHECK(dims.hidden == 64);
  CHECK(dims.feat == 64);
  EncoderParams enc = make_encoder(dims, rng);
  REQUIRE(enc.point.W.size() == 2);
  CHECK(enc.point.W[0].shape() == std::vector<std::int64_t>{13, 64});
  CHECK(enc.point.W[1].shape() == std::vector<std::int64_t>{64, 64});
  REQUIRE(enc.mix.W.size() == 1);
  CHECK(enc.mix.W[0].shape() == std::vector<std::int64_t>{128, 64});

  // a history of h=2 grid-frame velocity frames plus the current one and the
  // position makes 12 state values; the robot tag brings the input to 13
  const int h = 2;
  CHECK(3 + 3 * (h + 1) + 1 == dims.in);
}

TEST_CASE("point encoding is exactly permutation equivariant") {
  Rng rng(5);
  EncoderDims dims{7, 16, 6};
  EncoderParams enc = make_encoder(dims, rng, false);
  const int n = 9;
  Tensor x = rand_tensor(rng, {n, 7}, -1, 1, false);
  Tensor y = encode_points_t(enc, x);

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);

  std::vector<double> px(static_cast<std::size_t>(n) * 7);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 7; ++j) {
      px[static_cast<std::size_t>(i * 7 + j)] = x.at(perm[static_cast<std::size_t>(i)], j);
    }
  }
  Tensor yp = encode_points_t(enc, Tensor::from(std::move(px), {n, 7}, false));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 6; ++j) {
      CHECK(yp.at(i, j) == y.at(perm[static_cast<std::size_t>(i)], j));
    }
  }
}

TEST_CASE("duplicate particles produce identical feature rows") {
  Rng rng(7);
  EncoderParams enc = make_encoder({5, 8, 4}, rng, false);
  Tensor x = rand_tensor(rng, {3, 5}, -1, 1, false);
  std::vector<double> dup = x.data();
  for (int j = 0; j < 5; ++j) dup.push_back(x.at(1, j));
  Tensor y = encode_points_t(enc, Tensor::from(std::move(dup), {4, 5}, false));
  for (int j = 0; j < 4; ++j) CHECK(y.at(3, j) == y.at(1, j));
}

TEST_CASE("point encoding input validation") {
  Rng rng(9);
  EncoderParams enc = make_encoder({5, 8, 4}, rng, false);
  CHECK_THROWS_AS(encode_points_t(enc, Tensor::zeros({0, 5})), ContractError);
  CHECK_THROWS_AS(encode_points_t(enc, Tensor::zeros({2, 4})), ShapeError);
  std::vector<double> bad(10, 0.0);
  bad[3] = std::nan("");
  CHECK_THROWS_AS(encode_points_t(enc, Tensor::from(std::move(bad), {2, 5}, false)),
                  ValidationError);
}

TEST_CASE("point encoding gradients match finite differences") {
  Rng rng(11);
  EncoderDims dims{5, 6, 4};
  EncoderParams enc = make_encoder(dims, rng);
  Tensor x = rand_tensor(rng, {4, 5});
  std::vector<Tensor> leaves = {x};
  for (auto& t : tg::mlp_params(enc.point)) leaves.push_back(t);
  for (auto& t : tg::mlp_params(enc.mix)) leaves.push_back(t);

  Rng wrng(13);
  check_gradients(leaves, [&](std::vector<Tensor>& L) {
    Rng w = wrng;
    return weighted_sum(w, encode_points_t(enc, L[0]));
  }, 1e-5, 1e-8);
}

TEST_CASE("radius pooling") {
  Rng rng(17);
  const int n = 4, d = 5;
  Tensor feats = rand_tensor(rng, {n, d}, -1, 1, false);
  Points pos = {Vec3(0, 0, 0), Vec3(0.1, 0, 0), Vec3(0.25, 0, 0), Vec3(1, 1, 1)};

  SUBCASE("single particle in range returns its feature verbatim") {
    PooledFeature p = pool_local(feats, pos, Vec3(1.0, 1.0, 1.05), 0.1);
    CHECK(p.support_count == 1);
    for (int j = 0; j < d; ++j) CHECK(p.value[static_cast<std::size_t>(j)] == feats.at(3, j));
  }

  SUBCASE("two particles in range average their features") {
    PooledFeature p = pool_local(feats, pos, Vec3(0.05, 0, 0), 0.08);
    CHECK(p.support_count == 2);
    for (int j = 0; j < d; ++j) {
      CHECK(p.value[static_cast<std::size_t>(j)] ==
            doctest::Approx(0.5 * (feats.at(0, j) + feats.at(1, j))).epsilon(1e-15));
    }
  }

  SUBCASE("empty neighborhood yields the zero vector") {
    // nearest particle sits 0.25 m away; the 0.2 m radius sees nothing
    PooledFeature p = pool_local(feats, pos, Vec3(0.5, 0, 0), 0.2);
    CHECK(p.support_count == 0);
    for (double v : p.value) CHECK(v == 0.0);
  }

  SUBCASE("pooling is invariant to particle permutation") {
    std::vector<int> perm = {2, 0, 3, 1};
    std::vector<double> pf;
    Points ppos;
    for (int i : perm) {
      for (int j = 0; j < d; ++j) pf.push_back(feats.at(i, j));
      ppos.push_back(pos[static_cast<std::size_t>(i)]);
    }
    Tensor feats2 = Tensor::from(std::move(pf), {n, d}, false);
    for (int t = 0; t < 10; ++t) {
      Vec3 q(rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2));
      PooledFeature a = pool_local(feats, pos, q, 0.3);
      PooledFeature b = pool_local(feats2, ppos, q, 0.3);
      CHECK(a.support_count == b.support_count);
      for (int j = 0; j < d; ++j) {
        CHECK(a.value[static_cast<std::size_t>(j)] ==
              doctest::Approx(b.value[static_cast<std::size_t>(j)]).epsilon(1e-12));
      }
    }
  }

  SUBCASE("moving an out-of-range particle further out changes nothing") {
    Vec3 q(0.05, 0, 0);
    PooledFeature a = pool_local(feats, pos, q, 0.08);
    Points moved = pos;
    moved[3] = Vec3(5, 5, 5);
    PooledFeature b = pool_local(feats, moved, q, 0.08);
    CHECK(a.support_count == b.support_count);
    for (int j = 0; j < d; ++j) {
      CHECK(a.value[static_cast<std::size_t>(j)] == b.value[static_cast<std::size_t>(j)]);
    }
  }

  SUBCASE("invalid radius is rejected") {
    CHECK_THROWS_AS(pool_local(feats, pos, Vec3(0, 0, 0), 0.0), ParamError);
    CHECK_THROWS_AS(pool_local(feats, pos, Vec3(0, 0, 0), -1.0), ParamError);
  }
}

TEST_CASE("batch pooling matches single-query pooling and is differentiable") {
  Rng rng(19);
  const int n = 12, d = 6;
  Tensor feats = rand_tensor(rng, {n, d});
  Points pos;
  for (int i = 0; i < n; ++i) {
    pos.push_back(Vec3(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)));
  }
  std::vector<Vec3> queries;
  for (int i = 0; i < 7; ++i) {
    queries.push_back(Vec3(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)));
  }
  queries.push_back(Vec3(9, 9, 9));  // guaranteed empty

  std::vector<int> support;
  Tensor batch = pool_local_t(feats, pos, queries, 0.3, &support);
  REQUIRE(batch.shape() == std::vector<std::int64_t>{8, d});
  REQUIRE(support.size() == 8);
  CHECK(support[7] == 0);
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    PooledFeature single = pool_local(feats.detached(), pos, queries[qi], 0.3);
    CHECK(single.support_count == support[qi]);
    for (int j = 0; j < d; ++j) {
      CHECK(batch.at(static_cast<std::int64_t>(qi), j) ==
            doctest::Approx(single.value[static_cast<std::size_t>(j)]).epsilon(1e-15));
    }
  }

  Rng wrng(23);
  check_gradients({feats}, [&](std::vector<Tensor>& L) {
    Rng w = wrng;
    return weighted_sum(w, pool_local_t(L[0], pos, queries, 0.3, nullptr));
  }, 1e-6, 1e-9);
}

TEST_CASE("sinusoidal positional encoding closed forms") {
  const int F = 6;
  SUBCASE("origin gives the alternating 0,1 pattern") {
    std::vector<double> e = posenc(Vec3::Zero(), F);
    REQUIRE(e.size() == 36);
    for (std::size_t i = 0; i < e.size(); i += 2) {
      CHECK(e[i] == 0.0);
      CHECK(e[i + 1] == 1.0);
    }
  }

  SUBCASE("half-unit x excites the base frequency fully") {
    std::vector<double> e = posenc(Vec3(0.5, 0, 0), F);
    CHECK(e[0] == doctest::Approx(1.0).epsilon(1e-15));        // sin(pi/2)
    CHECK(std::abs(e[1]) <= 1e-15);                            // cos(pi/2)
    // second frequency: sin(pi) ~ 0, cos(pi) = -1
    CHECK(std::abs(e[2]) <= 1e-12);
    CHECK(e[3] == doctest::Approx(-1.0).epsilon(1e-15));
    // y and z blocks are untouched by x
    for (std::size_t i = 12; i < 36; i += 2) {
      CHECK(e[i] == 0.0);
      CHECK(e[i + 1] == 1.0);
    }
  }

  SUBCASE("layout is axis-major with doubling frequencies") {
    const Vec3 x(0.31, -0.77, 1.23);
    std::vector<double> e = posenc(x, F);
    for (int a = 0; a < 3; ++a) {
      for (int k = 0; k < F; ++k) {
        const double w = std::pow(2.0, k) * M_PI;
        CHECK(e[static_cast<std::size_t>(2 * (a * F + k))] ==
              doctest::Approx(std::sin(w * x[a])).epsilon(1e-15));
        CHECK(e[static_cast<std::size_t>(2 * (a * F + k) + 1)] ==
              doctest::Approx(std::cos(w * x[a])).epsilon(1e-15));
      }
    }
  }

  SUBCASE("tensor version matches the scalar version and is differentiable") {
    Rng rng(29);
    Tensor pos = rand_tensor(rng, {5, 3});
    Tensor enc = posenc_t(pos, 4);
    REQUIRE(enc.shape() == std::vector<std::int64_t>{5, 24});
    for (int i = 0; i < 5; ++i) {
      std::vector<double> want =
          posenc(Vec3(pos.at(i, 0), pos.at(i, 1), pos.at(i, 2)), 4);
      for (int j = 0; j < 24; ++j) {
        CHECK(enc.at(i, j) == doctest::Approx(want[static_cast<std::size_t>(j)])
                                  .epsilon(1e-14));
      }
    }
    Rng wrng(31);
    check_gradients({pos}, [&](std::vector<Tensor>& L) {
      Rng w = wrng;
      return weighted_sum(w, posenc_t(L[0], 4));
    }, 1e-5, 1e-8);
  }
}

TEST_CASE("velocity-field evaluation") {
  Rng rng(37);
  FieldDims dims{2, 4, 8};
  FieldParams field = make_field(dims, rng);
  REQUIRE(field.mlp.W.size() == 3);
  CHECK(field.mlp.W[0].shape() == std::vector<std::int64_t>{16, 8});
  CHECK(field.mlp.W[2].shape() == std::vector<std::int64_t>{8, 3});

  SUBCASE("zero parameters give zero velocity everywhere") {
    FieldParams zeroed = make_field(dims, rng);
    for (auto& t : tg::mlp_params(zeroed.mlp)) {
      std::fill(t.data().begin(), t.data().end(), 0.0);
    }
    PooledFeature pooled;
    pooled.value.assign(4, 0.0);
    const Vec3 v = field_eval(zeroed, Vec3(0.3, 0.4, 0.5), pooled);
    CHECK(v.norm() == 0.0);
  }

  SUBCASE("evaluation is deterministic") {
    PooledFeature pooled;
    pooled.value = {0.1, -0.2, 0.3, 0.7};
    pooled.support_count = 3;
    const Vec3 q(0.21, 0.43, 0.65);
    const Vec3 a = field_eval(field, q, pooled);
    const Vec3 b = field_eval(field, q, pooled);
    CHECK(a.x() == b.x());
    CHECK(a.y() == b.y());
    CHECK(a.z() == b.z());
  }

  SUBCASE("scalar wrapper agrees with the batch evaluation") {
    Tensor queries = rand_tensor(rng, {3, 3}, 0.0, 1.0, false);
    Tensor pooledb = rand_tensor(rng, {3, 4}, -1.0, 1.0, false);
    Tensor out = field_eval_t(field, queries, pooledb);
    for (int i = 0; i < 3; ++i) {
      PooledFeature p;
      for (int j = 0; j < 4; ++j) p.value.push_back(pooledb.at(i, j));
      const Vec3 v = field_eval(
          field, Vec3(queries.at(i, 0), queries.at(i, 1), queries.at(i, 2)), p);
      for (int a = 0; a < 3; ++a) CHECK(out.at(i, a) == doctest::Approx(v[a]).epsilon(1e-15));
    }
  }

  SUBCASE("parameter gradients match finite differences") {
    Tensor queries = rand_tensor(rng, {4, 3}, 0.0, 1.0);
    Tensor pooled = rand_tensor(rng, {4, 4});
    std::vector<Tensor> leaves = {queries, pooled};
    for (auto& t : tg::mlp_params(field.mlp)) leaves.push_back(t);
    Rng wrng(41);
    check_gradients(leaves, [&](std::vector<Tensor>& L) {
      Rng w = wrng;
      return weighted_sum(w, field_eval_t(field, L[0], L[1]));
    }, 1e-6, 1e-8);
  }

  SUBCASE("non-finite inputs are rejected") {
    Tensor queries = Tensor::from({0.1, 0.2, std::nan("")}, {1, 3}, false);
    Tensor pooled = Tensor::zeros({1, 4});
    CHECK_THROWS_AS(field_eval_t(field, queries, pooled), ValidationError);
  }
}
