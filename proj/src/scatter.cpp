#include "fnh/scatter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "fnh/error.hpp"
#include "fnh/kernels.hpp"

namespace fnh {

void validate(const SceneParams& params) {
  require_same_shape(params.asc, params.depth, "scene params asc vs depth");
  require_same_spatial(params.asc, params.alf, "scene params asc vs alf");
  for (double b : params.asc.data()) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidArgument("scattering coefficient must be finite and >= 0");
  }
  for (double d : params.depth.data()) {
    if (!(d > 0.0) || !std::isfinite(d)) throw InvalidArgument("depth must be finite and > 0");
  }
}

ScalarField transmission(const ScalarField& asc, const ScalarField& depth) {
  require_same_shape(asc, depth, "transmission");
  ScalarField t(asc.height(), asc.width());
  for (std::size_t i = 0; i < asc.size(); ++i) {
    if (!(asc[i] >= 0.0)) throw InvalidArgument("transmission: negative scattering coefficient");
    if (!(depth[i] > 0.0)) throw InvalidArgument("transmission: non-positive depth");
    t[i] = std::exp(-asc[i] * depth[i]);
  }
  return t;
}

ImagePlane synthesize(const ImagePlane& clean, const SceneParams& params) {
  require_same_shape(clean, params.alf, "synthesize clean vs alf");
  validate(params);
  ImagePlane hazy(clean.height(), clean.width(), clean.channels());
  kernels::omp::synthesize(clean.data(), params.alf.data(), params.asc.data(), params.depth.data(),
                           clean.channels(), hazy.data());
  return hazy;
}

DehazeResult dehaze(const ImagePlane& hazy, const SceneParams& params, const DehazeOptions& opts) {
  require_same_shape(hazy, params.alf, "dehaze hazy vs alf");
  validate(params);
  for (std::size_t i = 0; i < params.asc.size(); ++i) {
    const double exposure = params.asc[i] * params.depth[i];
    if (exposure > opts.max_exposure) {
      throw IllConditioned("dehaze: beta*d = " + std::to_string(exposure) + " exceeds exposure cap " +
                           std::to_string(opts.max_exposure));
    }
  }
  DehazeResult out{ImagePlane(hazy.height(), hazy.width(), hazy.channels()),
                   ImagePlane(hazy.height(), hazy.width(), hazy.channels())};
  kernels::omp::dehaze(hazy.data(), params.alf.data(), params.asc.data(), params.depth.data(), hazy.channels(),
                       out.unclamped.data());
  out.clamped = clamp_unit(out.unclamped);
  return out;
}

// ---------------------------------------------------------------------------

double bias_exact(const BiasInputs& b) {
  if (!(b.asc_gt >= 0.0) || !(b.depth_gt > 0.0)) throw InvalidArgument("bias_exact: invalid ground truth");
  if (!(b.asc_gt + b.d_asc >= 0.0)) throw InvalidArgument("bias_exact: perturbed beta is negative");
  if (!(b.depth_gt + b.d_depth > 0.0)) throw InvalidArgument("bias_exact: perturbed depth is not positive");
  const double est = (b.intensity - b.alf_gt - b.d_alf) * std::exp((b.asc_gt + b.d_asc) * (b.depth_gt + b.d_depth));
  const double gt = (b.intensity - b.alf_gt) * std::exp(b.asc_gt * b.depth_gt);
  return est - gt + b.d_alf;
}

double bias_alf(double asc_gt, double depth_gt, double d_alf) {
  if (!(asc_gt >= 0.0) || !(depth_gt > 0.0)) throw InvalidArgument("bias_alf: invalid ground truth");
  return (1.0 - std::exp(asc_gt * depth_gt)) * d_alf;
}

double bias_expfactor(double intensity, double alf_gt, double base_gt, double other_gt, double delta) {
  if (!(base_gt >= 0.0)) throw InvalidArgument("bias_expfactor: base must be >= 0");
  return (intensity - alf_gt) * (std::exp(other_gt * delta) - 1.0) * std::exp(other_gt * base_gt);
}

std::vector<SurfaceRow> bias_surface(const SurfaceGrid& g) {
  if (g.param_values.empty() || g.deltas.empty()) throw InvalidArgument("bias_surface: empty grid");
  std::vector<SurfaceRow> rows;
  rows.reserve(g.param_values.size() * g.deltas.size());
  for (double p : g.param_values) {
    if (!std::isfinite(p)) throw InvalidArgument("bias_surface: non-finite grid value");
    for (double d : g.deltas) {
      if (!std::isfinite(d)) throw InvalidArgument("bias_surface: non-finite grid value");
      double dj = 0.0;
      switch (g.kind) {
        case SurfaceKind::kAlf:
          dj = bias_alf(g.asc, g.depth, d);
          break;
        case SurfaceKind::kAsc:
          dj = bias_expfactor(g.intensity, g.alf, p, g.depth, d);
          break;
        case SurfaceKind::kDepth:
          dj = bias_expfactor(g.intensity, g.alf, p, g.asc, d);
          break;
      }
      rows.push_back({p, d, dj});
    }
  }
  return rows;
}

void write_surface_csv(std::ostream& os, const std::vector<SurfaceRow>& rows) {
  os << "param_gt,delta,delta_j\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", r.param_gt + 0.0, r.delta + 0.0, r.delta_j + 0.0);
    os << buf;
  }
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw InvalidArgument("linspace: n must be >= 1");
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  v.back() = hi;
  return v;
}

std::vector<double> symmetric_range(double half_width, int half_steps) {
  if (half_steps < 1) throw InvalidArgument("symmetric_range: half_steps must be >= 1");
  std::vector<double> v(2 * half_steps + 1);
  const double step = half_width / half_steps;
  for (int i = 0; i < static_cast<int>(v.size()); ++i) v[i] = (i - half_steps) * step;
  return v;
}

SurfaceGrid default_surface_grid(SurfaceKind kind) {
  SurfaceGrid g;
  g.kind = kind;
  switch (kind) {
    case SurfaceKind::kAlf:
      g.param_values = linspace(0.3, 1.5, 13);
      g.deltas = symmetric_range(0.1, 10);
      break;
    case SurfaceKind::kAsc:
      g.param_values = linspace(0.0, 1.0, 11);
      g.deltas = symmetric_range(0.1, 10);
      break;
    case SurfaceKind::kDepth:
      g.param_values = linspace(0.5, 5.0, 10);
      g.deltas = symmetric_range(0.5, 10);
      break;
  }
  return g;
}

SurfaceKind parse_surface_kind(const std::string& name) {
  if (name == "alf") return SurfaceKind::kAlf;
  if (name == "asc" || name == "beta") return SurfaceKind::kAsc;
  if (name == "depth") return SurfaceKind::kDepth;
  throw InvalidArgument("unknown surface kind '" + name + "' (expected alf, asc or depth)");
}

}  // namespace fnh
