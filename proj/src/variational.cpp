#include "fnh/variational.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fnh/error.hpp"

namespace fnh {

void VariationalConfig::validate() const {
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
  if (!(step > 0.0) || !(alf_step_scale >= 0.0)) throw InvalidArgument("step sizes must be positive");
  if (!(smooth_weight >= 0.0) || !(dark_weight >= 0.0)) throw InvalidArgument("weights must be >= 0");
  if (!(asc_init >= 0.0)) throw InvalidArgument("asc_init must be >= 0");
  if (!(depth_min > 0.0) || !(depth_near >= depth_min) || !(depth_far >= depth_min)) {
    throw InvalidArgument("depth ramp must stay above depth_min > 0");
  }
  if (!(bright_fraction > 0.0 && bright_fraction <= 1.0)) throw InvalidArgument("bright_fraction must lie in (0, 1]");
}

void to_json(nlohmann::json& j, const VariationalConfig& c) {
  j = nlohmann::json{{"max_iterations", c.max_iterations}, {"tolerance", c.tolerance},
                     {"step", c.step},                     {"alf_step_scale", c.alf_step_scale},
                     {"smooth_weight", c.smooth_weight},   {"dark_weight", c.dark_weight},
                     {"asc_init", c.asc_init},             {"depth_far", c.depth_far},
                     {"depth_near", c.depth_near},         {"depth_min", c.depth_min},
                     {"bright_fraction", c.bright_fraction}};
}

void from_json(const nlohmann::json& j, VariationalConfig& c) {
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.step = j.value("step", c.step);
  c.alf_step_scale = j.value("alf_step_scale", c.alf_step_scale);
  c.smooth_weight = j.value("smooth_weight", c.smooth_weight);
  c.dark_weight = j.value("dark_weight", c.dark_weight);
  c.asc_init = j.value("asc_init", c.asc_init);
  c.depth_far = j.value("depth_far", c.depth_far);
  c.depth_near = j.value("depth_near", c.depth_near);
  c.depth_min = j.value("depth_min", c.depth_min);
  c.bright_fraction = j.value("bright_fraction", c.bright_fraction);
}

namespace {

// Gray airlight from the brightest pixels' strongest channel.
double bright_prior(const ImagePlane& img, double fraction) {
  const std::size_t n = img.pixels();
  const int ch = img.channels();
  std::vector<double> lum(n);
  for (std::size_t p = 0; p < n; ++p) {
    double s = 0.0;
    for (int c = 0; c < ch; ++c) s += img[p * ch + c];
    lum[p] = s / ch;
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(n)));
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return lum[a] > lum[b] || (lum[a] == lum[b] && a < b); });
  double best = 0.0;
  for (int c = 0; c < ch; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += img[idx[i] * ch + c];
    best = std::max(best, s / static_cast<double>(k));
  }
  return std::clamp(best, 0.0, 1.0);
}

// Adds w * sum of squared forward differences of `v` (stride `ch`, channel
// `c`) to the objective and its gradient to `g`.
double smooth_term(std::span<const double> v, std::span<double> g, int h, int w, int ch, int c, double weight) {
  if (weight == 0.0) return 0.0;
  double e = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * w + x) * ch + c;
      if (x + 1 < w) {
        const std::size_t j = i + ch;
        const double d = v[i] - v[j];
        e += d * d;
        g[i] += 2.0 * weight * d;
        g[j] -= 2.0 * weight * d;
      }
      if (y + 1 < h) {
        const std::size_t j = i + static_cast<std::size_t>(w) * ch;
        const double d = v[i] - v[j];
        e += d * d;
        g[i] += 2.0 * weight * d;
        g[j] -= 2.0 * weight * d;
      }
    }
  }
  return weight * e;
}

}  // namespace

VariationalResult variational_estimate(const ImagePlane& hazy, const VariationalConfig& cfg) {
  cfg.validate();
  if (!hazy.in_unit_range()) throw InvalidArgument("variational_estimate: hazy image must lie in [0, 1]");
  const int H = hazy.height();
  const int W = hazy.width();
  const int C = hazy.channels();
  const std::size_t n = hazy.pixels();

  ImagePlane alf(H, W, C, bright_prior(hazy, cfg.bright_fraction));
  ScalarField asc(H, W, cfg.asc_init);
  ScalarField depth(H, W);
  for (int y = 0; y < H; ++y) {
    const double f = H > 1 ? static_cast<double>(y) / (H - 1) : 1.0;
    for (int x = 0; x < W; ++x) depth.at(y, x) = cfg.depth_far + (cfg.depth_near - cfg.depth_far) * f;
  }

  std::vector<double> ga(alf.size());
  std::vector<double> gb(n);
  std::vector<double> gd(n);
  const double precond = 1.0 / (1.0 + 8.0 * cfg.smooth_weight);
  const double step = cfg.step * precond;
  const double step_a = step * cfg.alf_step_scale;

  auto I = hazy.data();
  auto A = alf.data();
  auto B = asc.data();
  auto D = depth.data();

  VariationalResult res;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iterations; ++it) {
    std::fill(ga.begin(), ga.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    std::fill(gd.begin(), gd.end(), 0.0);
    double e = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double s = B[p] * D[p];
      const double amp = std::exp(std::min(s, 20.0));
      const double t = 1.0 / amp;
      double ds = 0.0;
      double dark = std::numeric_limits<double>::infinity();
      int dark_c = 0;
      for (int c = 0; c < C; ++c) {
        const std::size_t i = p * C + c;
        const double j = (I[i] - A[i]) * amp + A[i];
        if (j < dark) {
          dark = j;
          dark_c = c;
        }
        const double jc = std::clamp(j, 0.0, 1.0);
        if (jc == j) continue;  // exact reconstruction, zero gradient
        const double r = jc * t + A[i] * (1.0 - t) - I[i];
        e += r * r;
        ga[i] += 2.0 * r * (1.0 - t);
        // dt/ds = -t
        ds += 2.0 * r * (jc - A[i]) * -t;
      }
      if (dark > 0.0 && cfg.dark_weight > 0.0) {
        const std::size_t i = p * C + dark_c;
        e += cfg.dark_weight * dark * dark;
        const double k = 2.0 * cfg.dark_weight * dark;
        ga[i] += k * (1.0 - amp);
        if (s < 20.0) ds += k * (I[i] - A[i]) * amp;
      }
      gb[p] += ds * D[p];
      gd[p] += ds * B[p];
    }
    for (int c = 0; c < C; ++c) e += smooth_term(A, ga, H, W, C, c, cfg.smooth_weight);
    e += smooth_term(B, gb, H, W, 1, 0, cfg.smooth_weight);
    e += smooth_term(D, gd, H, W, 1, 0, cfg.smooth_weight);
    if (!std::isfinite(e)) throw Divergence("variational objective became non-finite at iteration " + std::to_string(it));

    res.objective = e / static_cast<double>(n);
    res.iterations = it + 1;
    if (std::abs(prev - e) <= cfg.tolerance * std::max(1.0, std::abs(e))) break;
    prev = e;

    for (std::size_t i = 0; i < ga.size(); ++i) A[i] = std::clamp(A[i] - step_a * ga[i], 0.0, 1.0);
    for (std::size_t p = 0; p < n; ++p) {
      B[p] = std::max(0.0, B[p] - step * gb[p]);
      D[p] = std::max(cfg.depth_min, D[p] - step * gd[p]);
    }
  }

  // Feasibility: shrink beta*d until every channel of J lies in [0,1].
  for (std::size_t p = 0; p < n; ++p) {
    double s_max = std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      const std::size_t i = p * C + c;
      const double gap = I[i] - A[i];
      if (gap > 0.0) {
        s_max = std::min(s_max, std::log((1.0 - A[i]) / gap));
      } else if (gap < 0.0) {
        s_max = std::min(s_max, std::log(A[i] / -gap));
      }
    }
    s_max = std::clamp(s_max, 0.0, 20.0);
    if (B[p] * D[p] <= s_max) continue;
    if (B[p] * cfg.depth_min <= s_max) {
      D[p] = std::max(cfg.depth_min, s_max / B[p]);
    } else {
      D[p] = cfg.depth_min;
      B[p] = s_max / cfg.depth_min;
    }
  }

  res.params = SceneParams{std::move(alf), std::move(asc), std::move(depth)};
  res.dehazed = dehaze(hazy, res.params).clamped;
  const ImagePlane back = synthesize(res.dehazed, res.params);
  double r = 0.0;
  for (std::size_t i = 0; i < back.size(); ++i) r = std::max(r, std::abs(back[i] - hazy[i]));
  res.residual = r;
  return res;
}

}  // namespace fnh
