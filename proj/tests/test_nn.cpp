#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fnh/error.hpp"
#include "fnh/io.hpp"
#include "fnh/nn/checkpoint.hpp"
#include "fnh/nn/model.hpp"
#include "fnh/scatter.hpp"
#include "support.hpp"

using namespace fnh;
using namespace fnh::nn;
using fnh::testing::TempDir;

namespace {

struct Fixture {
  ImagePlane hazy;
  ImagePlane clean;
  ImagePlane alf;
  ScalarField depth;
  ScalarField asc;

  Targets targets() const { return {&clean, &alf, &depth, &asc}; }
};

Fixture make_fixture(int h, int w, std::uint64_t seed) {
  Rng rng = substream(seed, 0);
  Fixture f;
  f.clean = fnh::testing::random_image(rng, h, w, 3, 0.05, 0.95);
  f.alf = fnh::testing::random_image(rng, h, w, 3, 0.6, 0.9);
  f.depth = fnh::testing::random_field(rng, h, w, 1.0, 3.0);
  f.asc = fnh::testing::random_field(rng, h, w, 0.0, 0.35);
  f.hazy = synthesize(f.clean, {f.alf, f.asc, f.depth});
  return f;
}

LossSelection all_losses() {
  LossSelection s;
  s.mse_dehazed = 1.0;
  s.beta = 0.7;
  s.depth = 0.5;
  s.fwb = 1e-3;
  s.lambdas = {5.0, 1.3};
  return s;
}

}  // namespace

TEST_CASE("bounded ReLU") {
  CHECK(brelu(-0.5) == 0.0);
  CHECK(brelu(0.0) == 0.0);
  CHECK(brelu(0.25) == 0.25);
  CHECK(brelu(1.0) == 1.0);
  CHECK(brelu(3.0) == 1.0);
}

TEST_CASE("softplus helpers") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(50.0) == 50.0);
  for (double y : {1e-3, 0.2, 2.0, 40.0}) CHECK(softplus(softplus_inverse(y)) == doctest::Approx(y).epsilon(1e-12));
  CHECK_THROWS_AS(softplus_inverse(0.0), InvalidArgument);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) == 0.0);
}

TEST_CASE("config validation and slot layout") {
  ToyNetConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.levels = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.kernel_size = 2;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);

  cfg = {};
  cfg.upsample = UpsampleMode::kTransposed;
  const nlohmann::json j = cfg;
  CHECK(j.at("upsample") == "transposed");
  CHECK(j.get<ToyNetConfig>().upsample == UpsampleMode::kTransposed);
  nlohmann::json bad = j;
  bad["upsample"] = "bilinear";
  CHECK_THROWS_AS(bad.get<ToyNetConfig>(), InvalidArgument);

  const ToyModel m(cfg);
  CHECK(m.slots().front().name == "encoder.l0");
  CHECK(m.slots().back().name == "ehim.refine");
  CHECK(m.find_slot("decoder.depth.head") == m.head_slot(Head::kDepth));
  CHECK_THROWS_AS(m.find_slot("nope"), InvalidArgument);
  std::size_t total = 0;
  for (const auto& s : m.slots()) total += s.weight_count() + s.out_channels;
  CHECK(total == m.param_count());

  const auto mask = m.group_mask({ParamGroup::kEncoder});
  const auto& enc = m.slots()[m.encoder_slot(0)];
  CHECK(mask[enc.weight_offset] == 1);
  CHECK(mask[m.slots()[m.refine_slot()].weight_offset] == 0);
}

TEST_CASE("forward preserves shape and ranges") {
  for (auto mode : {UpsampleMode::kNearestConv, UpsampleMode::kTransposed}) {
    ToyNetConfig cfg;
    cfg.levels = 3;
    cfg.base_channels = 4;
    cfg.upsample = mode;
    const auto m = ToyModel::create(cfg, 11);
    const auto f = make_fixture(16, 24, 2);
    const auto p = forward(m, f.hazy);
    CHECK(p.dehazed.same_shape(f.hazy));
    CHECK(p.alf.same_shape(f.hazy));
    CHECK(p.depth.same_spatial(f.hazy));
    CHECK(p.asc.same_spatial(f.hazy));
    CHECK(p.dehazed.in_unit_range());
    CHECK(p.alf.in_unit_range());
    for (double v : p.depth.data()) CHECK(v >= cfg.positivity_offset);
    for (double v : p.asc.data()) CHECK(v >= cfg.positivity_offset);
  }
  const auto m = ToyModel::create(ToyNetConfig{}, 1);
  CHECK_THROWS_AS(forward(m, ImagePlane(12, 16, 3)), InvalidArgument);
  CHECK_THROWS_AS(forward(m, ImagePlane(16, 16, 1)), InvalidArgument);
}

TEST_CASE("zero weights give the closed-form output") {
  ToyNetConfig cfg;
  cfg.levels = 2;
  const ToyModel m(cfg);
  Rng rng = substream(8, 0);
  const auto hazy = fnh::testing::random_image(rng, 8, 8, 3);
  const auto p = forward(m, hazy);
  const double pos = std::log(2.0) + 1e-3;
  for (double v : p.alf.data()) CHECK(v == 0.0);
  for (double v : p.depth.data()) CHECK(v == doctest::Approx(pos).epsilon(1e-15));
  for (double v : p.asc.data()) CHECK(v == doctest::Approx(pos).epsilon(1e-15));
  for (double v : p.dehazed.data()) CHECK(v == 0.0);
}

TEST_CASE("create is deterministic and sets head outputs") {
  ToyNetConfig cfg;
  cfg.levels = 2;
  cfg.base_channels = 2;
  const auto a = ToyModel::create(cfg, 5);
  const auto b = ToyModel::create(cfg, 5);
  const auto c = ToyModel::create(cfg, 6);
  CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  CHECK_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));

  ToyModel z(cfg);
  const double alf[3] = {0.6, 0.7, 0.8};
  z.set_head_outputs(alf, 2.5, 0.2);
  const auto p = forward(z, ImagePlane(4, 4, 3, 0.5));
  CHECK(p.alf.at(1, 1, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(p.alf.at(1, 1, 2) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(p.depth.at(2, 3) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(p.asc.at(0, 0) == doctest::Approx(0.2).epsilon(1e-12));
}

static void check_gradients(const ToyNetConfig& cfg, const LossSelection& sel, std::uint64_t seed) {
  ToyModel model = ToyModel::create(cfg, seed);
  REQUIRE(model.param_count() <= 500);
  const auto f = make_fixture(8, 8, seed + 1);
  const auto res = backward(model, f.hazy, f.targets(), sel);
  CHECK(res.losses.total == doctest::Approx(evaluate_losses(model, f.hazy, f.targets(), sel).total).epsilon(1e-14));

  std::vector<std::size_t> idx(model.param_count());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = substream(99, seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min<std::size_t>(100, idx.size()));

  const double h = 1e-6;
  int checked = 0;
  int excluded = 0;
  double worst = 0.0;
  for (std::size_t i : idx) {
    const double orig = model.params()[i];
    model.params()[i] = orig + h;
    const double fp = evaluate_losses(model, f.hazy, f.targets(), sel).total;
    model.params()[i] = orig - h;
    const double fm = evaluate_losses(model, f.hazy, f.targets(), sel).total;
    model.params()[i] = orig;
    const double f0 = res.losses.total;
    const double right = (fp - f0) / h;
    const double left = (f0 - fm) / h;
    // A kink between orig - h and orig + h makes the one-sided slopes disagree.
    if (std::abs(right - left) > 1e-3 * std::max({std::abs(right), std::abs(left), 1e-6})) {
      ++excluded;
      continue;
    }
    const double numeric = (fp - fm) / (2 * h);
    const double analytic = res.grads[i];
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, rel);
    ++checked;
  }
  CAPTURE(excluded);
  CAPTURE(checked);
  CHECK(checked >= 0.8 * static_cast<double>(idx.size()));
  CHECK(worst < 1e-3);
}

TEST_CASE("network gradients match finite differences") {
  SUBCASE("single level, MSE only") {
    ToyNetConfig cfg;
    cfg.levels = 1;
    cfg.base_channels = 1;
    LossSelection sel;
    sel.mse_dehazed = 1.0;
    check_gradients(cfg, sel, 30);
  }
  SUBCASE("two levels, all losses, nearest upsampling") {
    ToyNetConfig cfg;
    cfg.levels = 2;
    cfg.base_channels = 1;
    check_gradients(cfg, all_losses(), 31);
  }
  SUBCASE("two levels, all losses, transposed upsampling") {
    ToyNetConfig cfg;
    cfg.levels = 2;
    cfg.base_channels = 1;
    cfg.upsample = UpsampleMode::kTransposed;
    check_gradients(cfg, all_losses(), 32);
  }
}

TEST_CASE("gradient scaling and zero loss") {
  ToyNetConfig cfg;
  cfg.levels = 2;
  cfg.base_channels = 2;
  const auto model = ToyModel::create(cfg, 3);
  const auto f = make_fixture(8, 8, 6);
  auto sel = all_losses();
  const auto g1 = backward(model, f.hazy, f.targets(), sel);
  sel.mse_dehazed *= 2;
  sel.beta *= 2;
  sel.depth *= 2;
  sel.fwb *= 2;
  const auto g2 = backward(model, f.hazy, f.targets(), sel);
  CHECK(g2.losses.total == doctest::Approx(2 * g1.losses.total).epsilon(1e-14));
  for (std::size_t i = 0; i < g1.grads.size(); ++i) CHECK(g2.grads[i] == doctest::Approx(2 * g1.grads[i]).epsilon(1e-12));

  // Targets equal to the prediction: every term and gradient vanishes.
  const auto p = forward(model, f.hazy);
  const Targets self{&p.dehazed, &p.alf, &p.depth, &p.asc};
  const auto g0 = backward(model, f.hazy, self, all_losses());
  CHECK(g0.losses.total == 0.0);
  for (double g : g0.grads) CHECK(g == 0.0);

  LossSelection only_mse;
  only_mse.mse_dehazed = 1.0;
  CHECK_THROWS_AS(backward(model, f.hazy, Targets{}, only_mse), InvalidArgument);
}

TEST_CASE("encoder gradients can be frozen") {
  ToyNetConfig cfg;
  cfg.levels = 2;
  cfg.base_channels = 2;
  const auto model = ToyModel::create(cfg, 3);
  const auto f = make_fixture(8, 8, 7);
  const auto full = backward(model, f.hazy, f.targets(), all_losses(), true);
  const auto dec = backward(model, f.hazy, f.targets(), all_losses(), false);
  const auto enc = model.group_mask({ParamGroup::kEncoder});
  bool any_encoder = false;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    if (enc[i]) {
      CHECK(dec.grads[i] == 0.0);
      any_encoder = any_encoder || full.grads[i] != 0.0;
    } else {
      CHECK(dec.grads[i] == full.grads[i]);
    }
  }
  CHECK(any_encoder);
}

TEST_CASE("checkpoint round trip") {
  TempDir dir("ckpt");
  ToyNetConfig cfg;
  cfg.levels = 3;
  cfg.base_channels = 2;
  cfg.upsample = UpsampleMode::kTransposed;
  const auto m = ToyModel::create(cfg, 17);
  save_checkpoint(m, dir / "m.fnhd");
  const auto back = load_checkpoint(dir / "m.fnhd");
  CHECK(back.config().levels == 3);
  CHECK(back.config().upsample == UpsampleMode::kTransposed);
  REQUIRE(back.param_count() == m.param_count());
  for (std::size_t i = 0; i < m.param_count(); ++i) {
    CHECK(back.params()[i] == static_cast<double>(static_cast<float>(m.params()[i])));
  }
  save_checkpoint(back, dir / "again.fnhd");
  CHECK(read_file_bytes(dir / "m.fnhd") == read_file_bytes(dir / "again.fnhd"));

  auto bytes = read_file_bytes(dir / "m.fnhd");
  auto broken = bytes;
  broken[0] = 'X';
  write_file_bytes(dir / "magic.fnhd", broken);
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.fnhd"), FormatError);
  broken = bytes;
  broken.pop_back();
  write_file_bytes(dir / "short.fnhd", broken);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.fnhd"), FormatError);
  broken = bytes;
  broken[4] = 9;
  write_file_bytes(dir / "version.fnhd", broken);
  CHECK_THROWS_AS(load_checkpoint(dir / "version.fnhd"), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.fnhd"), IoError);
}
