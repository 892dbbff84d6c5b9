#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fnh/error.hpp"
#include "fnh/scatter.hpp"
#include "support.hpp"

using namespace fnh;
using fnh::testing::max_abs_diff;
using fnh::testing::random_field;
using fnh::testing::random_image;

namespace {

SceneParams constant_params(int h, int w, int c, double a, double beta, double d) {
  return {ImagePlane(h, w, c, a), ScalarField(h, w, beta), ScalarField(h, w, d)};
}

BiasInputs fig4(double d_alf, double d_asc, double d_depth) {
  return {1.0, 0.35, 1.0, 0.8, d_alf, d_asc, d_depth};
}

}  // namespace

TEST_CASE("transmission") {
  CHECK(transmission(ScalarField(2, 2, 0.0), ScalarField(2, 2, 3.0))[3] == 1.0);
  CHECK(transmission(ScalarField(1, 1, 0.35), ScalarField(1, 1, 1.0))[0] == doctest::Approx(0.704688).epsilon(1e-6));
  CHECK(transmission(ScalarField(1, 1, 0.55), ScalarField(1, 1, 2.0))[0] == doctest::Approx(0.332871).epsilon(1e-6));
  CHECK_THROWS_AS(transmission(ScalarField(1, 2), ScalarField(2, 1)), DimensionMismatch);
  CHECK_THROWS_AS(transmission(ScalarField(1, 1, -0.1), ScalarField(1, 1, 1.0)), InvalidArgument);
  CHECK_THROWS_AS(transmission(ScalarField(1, 1, 0.1), ScalarField(1, 1, 0.0)), InvalidArgument);
}

TEST_CASE("synthesize") {
  Rng rng = substream(2, 0);
  const auto j = random_image(rng, 4, 5, 3);
  const auto p0 = constant_params(4, 5, 3, 0.9, 0.0, 2.0);
  CHECK(max_abs_diff(synthesize(j, p0).data(), j.data()) == 0.0);

  const auto far = constant_params(4, 5, 3, 0.7, 10.0, 10.0);
  CHECK(max_abs_diff(synthesize(j, far).data(), far.alf.data()) < 1e-8);

  const auto i = synthesize(ImagePlane(1, 1, 1, 0.6), constant_params(1, 1, 1, 1.0, 0.35, 1.0));
  CHECK(i[0] == doctest::Approx(0.7181248).epsilon(1e-7));

  const auto hazy = synthesize(j, {random_image(rng, 4, 5, 3), random_field(rng, 4, 5, 0, 1), random_field(rng, 4, 5, 0.1, 5)});
  CHECK(hazy.in_unit_range());

  CHECK_THROWS_AS(synthesize(ImagePlane(4, 4, 3), p0), DimensionMismatch);
  CHECK_THROWS_AS(synthesize(j, constant_params(4, 5, 1, 0.9, 0.0, 2.0)), DimensionMismatch);
  CHECK_THROWS_AS(synthesize(j, constant_params(4, 5, 3, 0.9, -1.0, 2.0)), InvalidArgument);
}

TEST_CASE("reduces to the homogeneous and partially homogeneous models") {
  Rng rng = substream(2, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 3, w = 4;
    const auto j = random_image(rng, h, w, 3);
    const double beta = uniform(rng, 0, 1);
    const auto depth = random_field(rng, h, w, 0.5, 5);

    // Constant A and beta: I = J e^{-beta d} + A (1 - e^{-beta d}).
    const double a = uniform01(rng);
    const auto i1 = synthesize(j, {ImagePlane(h, w, 3, a), ScalarField(h, w, beta), depth});
    // Constant beta, varying A.
    const auto alf = random_image(rng, h, w, 3);
    const auto i3 = synthesize(j, {alf, ScalarField(h, w, beta), depth});
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double t = std::exp(-beta * depth.at(y, x));
        for (int c = 0; c < 3; ++c) {
          CHECK(std::abs(i1.at(y, x, c) - (j.at(y, x, c) * t + a * (1 - t))) < 1e-12);
          CHECK(std::abs(i3.at(y, x, c) - (j.at(y, x, c) * t + alf.at(y, x, c) * (1 - t))) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("dehaze inverts synthesize") {
  const auto p = constant_params(1, 1, 1, 1.0, 0.35, 1.0);
  const auto r = dehaze(ImagePlane(1, 1, 1, 0.718125), p);
  CHECK(r.unclamped[0] == doctest::Approx(0.6).epsilon(1e-5));

  Rng rng = substream(2, 2);
  const auto a = random_image(rng, 6, 6, 3);
  const auto same = dehaze(a, {a, random_field(rng, 6, 6, 0, 2), random_field(rng, 6, 6, 0.1, 4)});
  CHECK(max_abs_diff(same.unclamped.data(), a.data()) < 1e-15);

  for (int trial = 0; trial < 50; ++trial) {
    const auto j = random_image(rng, 8, 8, 3);
    auto beta = random_field(rng, 8, 8, 0, 1);
    const auto depth = random_field(rng, 8, 8, 0.1, 5);
    for (std::size_t i = 0; i < beta.size(); ++i) beta[i] = std::min(beta[i], 5.0 / depth[i]);
    const SceneParams params{random_image(rng, 8, 8, 3), beta, depth};
    const auto back = dehaze(synthesize(j, params), params);
    CHECK(max_abs_diff(back.unclamped.data(), j.data()) < 1e-9);
    CHECK(back.clamped.in_unit_range());
  }
}

TEST_CASE("dehaze clamps and enforces the exposure cap") {
  const auto p = constant_params(1, 2, 1, 1.0, 1.0, 2.0);
  const auto r = dehaze(ImagePlane(1, 2, 1, std::vector<double>{0.0, 1.0}), p);
  CHECK(r.unclamped[0] < 0.0);
  CHECK(r.clamped[0] == 0.0);
  CHECK(r.clamped[1] == 1.0);

  CHECK_THROWS_AS(dehaze(ImagePlane(1, 1, 1, 0.5), constant_params(1, 1, 1, 1.0, 2.1, 10.0)), IllConditioned);
  CHECK_NOTHROW(dehaze(ImagePlane(1, 1, 1, 0.5), constant_params(1, 1, 1, 1.0, 2.0, 10.0)));
  DehazeOptions opts;
  opts.max_exposure = 1.0;
  CHECK_THROWS_AS(dehaze(ImagePlane(1, 1, 1, 0.5), constant_params(1, 1, 1, 1.0, 0.6, 2.0), opts), IllConditioned);
}

TEST_CASE("bias formulas at the reference setting") {
  CHECK(bias_exact(fig4(0, 0, 0)) == 0.0);
  CHECK(bias_exact(fig4(0.1, 0, 0)) == doctest::Approx(-0.0419068).epsilon(1e-6));
  CHECK(std::abs(bias_exact(fig4(0.1, 0, 0)) - bias_alf(0.35, 1.0, 0.1)) < 1e-15);
  CHECK(std::abs(bias_exact(fig4(0, 0.1, 0)) - -0.0298489) < 1e-7);
  CHECK(std::abs(bias_exact(fig4(0, 0.1, 0)) - -0.029848) < 1e-6);
  CHECK(std::abs(bias_expfactor(0.8, 1.0, 0.35, 1.0, 0.1) - -0.0298489) < 1e-7);
  CHECK(std::abs(bias_expfactor(0.8, 1.0, 0.35, 1.0, -0.1) - 0.0270084) < 1e-7);
  CHECK(std::abs(bias_expfactor(0.8, 1.0, 0.35, 1.0, 0.1)) > std::abs(bias_expfactor(0.8, 1.0, 0.35, 1.0, -0.1)));
  CHECK(bias_expfactor(0.8, 1.0, 0.35, 1.0, 0.0) == 0.0);

  CHECK(bias_alf(0.35, 1.0, 0.0) == 0.0);
  CHECK(bias_alf(0.35, 1.0, 0.1) == doctest::Approx(-0.0419068).epsilon(1e-6));
  CHECK(bias_alf(0.35, 1.0, -0.1) == doctest::Approx(0.0419068).epsilon(1e-6));

  CHECK_THROWS_AS(bias_exact(fig4(0, -0.5, 0)), InvalidArgument);
  CHECK_THROWS_AS(bias_exact(fig4(0, 0, -1.0)), InvalidArgument);
  CHECK_THROWS_AS(bias_alf(-0.1, 1.0, 0.1), InvalidArgument);
}

TEST_CASE("bias formula properties on random inputs") {
  Rng rng = substream(2, 3);
  for (int i = 0; i < 10000; ++i) {
    const double a = uniform(rng, 0.3, 1.0);
    const double beta = uniform(rng, 0.0, 1.0);
    const double d = uniform(rng, 0.2, 3.0);
    const double in = uniform(rng, 0.0, 1.0);
    const double da = uniform(rng, -0.3, 0.3);
    const double db = uniform(rng, -beta, 0.5);
    const double dd = uniform(rng, -0.9 * d, 1.0);

    const double e13 = bias_exact({a, beta, d, in, da, 0, 0});
    const double e14 = bias_exact({a, beta, d, in, 0, db, 0});
    const double e15 = bias_exact({a, beta, d, in, 0, 0, dd});
    const double tol = 1e-12;
    CHECK(std::abs(e13 - bias_alf(beta, d, da)) <= tol * std::max(1.0, std::abs(e13)));
    CHECK(std::abs(e14 - bias_expfactor(in, a, beta, d, db)) <= tol * std::max(1.0, std::abs(e14)));
    CHECK(std::abs(e15 - bias_expfactor(in, a, d, beta, dd)) <= tol * std::max(1.0, std::abs(e15)));

    // Linear in dA and independent of A_gt.
    const double c = uniform(rng, -3, 3);
    CHECK(bias_alf(beta, d, c * da) == doctest::Approx(c * bias_alf(beta, d, da)).epsilon(1e-14));
    const double e13b = bias_exact({uniform(rng, 0.3, 1.0), beta, d, in, da, 0, 0});
    CHECK(std::abs(e13 - e13b) <= 1e-12);

    // Nonlinear in the exponent factors.
    if (std::abs(in - a) > 1e-3 && std::abs(db) > 1e-3) {
      CHECK(std::abs(bias_expfactor(in, a, beta, d, 2 * db) - 2 * bias_expfactor(in, a, beta, d, db)) > 0.0);
    }
  }
}

TEST_CASE("positive bias is more severe") {
  Rng rng = substream(2, 4);
  for (int i = 0; i < 2000; ++i) {
    const double a = uniform(rng, 0.5, 1.0);
    const double in = uniform(rng, 0.0, a - 1e-3);
    const double base = uniform(rng, 0.05, 1.0);
    const double other = uniform(rng, 0.5, 3.0);
    const double delta = uniform(rng, 1e-3, base);
    CHECK(std::abs(bias_expfactor(in, a, base, other, delta)) >
          std::abs(bias_expfactor(in, a, base, other, -delta)));
  }
}

TEST_CASE("bias surfaces") {
  SurfaceGrid g;
  g.kind = SurfaceKind::kAlf;
  g.param_values = {1.0};
  g.deltas = {-0.1, 0.0, 0.1};
  const auto rows = bias_surface(g);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].delta_j == 0.0);
  for (const auto& r : rows) CHECK(r.delta_j == bias_alf(g.asc, g.depth, r.delta));

  SurfaceGrid s;
  s.kind = SurfaceKind::kAsc;
  s.param_values = {0.2, 0.4, 0.6};
  s.deltas = {0.05};
  const auto srows = bias_surface(s);
  REQUIRE(srows.size() == 3);
  CHECK(std::abs(srows[0].delta_j) < std::abs(srows[1].delta_j));
  CHECK(std::abs(srows[1].delta_j) < std::abs(srows[2].delta_j));
  for (const auto& r : srows) CHECK(r.delta_j == bias_expfactor(s.intensity, s.alf, r.param_gt, s.depth, r.delta));

  SurfaceGrid d = s;
  d.kind = SurfaceKind::kDepth;
  d.param_values = {1.0, 2.0};
  for (const auto& r : bias_surface(d)) CHECK(r.delta_j == bias_expfactor(d.intensity, d.alf, r.param_gt, d.asc, r.delta));

  SurfaceGrid empty;
  CHECK_THROWS_AS(bias_surface(empty), InvalidArgument);

  std::ostringstream os;
  write_surface_csv(os, rows);
  CHECK(os.str().rfind("param_gt,delta,delta_j\n", 0) == 0);
  CHECK(os.str().find("1,0,0\n") != std::string::npos);
  CHECK(os.str().find("1,0.1,-0.0419067549\n") != std::string::npos);
}

TEST_CASE("default grids have an exact zero delta") {
  for (auto kind : {SurfaceKind::kAlf, SurfaceKind::kAsc, SurfaceKind::kDepth}) {
    const auto g = default_surface_grid(kind);
    CHECK(g.kind == kind);
    CHECK(std::count(g.deltas.begin(), g.deltas.end(), 0.0) == 1);
    for (const auto& r : bias_surface(g)) {
      if (r.delta == 0.0) CHECK(r.delta_j == 0.0);
    }
  }
  CHECK(parse_surface_kind("asc") == SurfaceKind::kAsc);
  CHECK_THROWS_AS(parse_surface_kind("foo"), InvalidArgument);
  const auto l = linspace(0.0, 1.0, 5);
  CHECK(l.size() == 5);
  CHECK(l.back() == 1.0);
  CHECK(symmetric_range(0.1, 10)[10] == 0.0);
}
