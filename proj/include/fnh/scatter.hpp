#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fnh/image.hpp"

namespace fnh {

/// Per-pixel scene parameters of the fully non-homogeneous scattering
/// model. `alf` is per channel; `asc` and `depth` are shared by all
/// channels.
struct SceneParams {
  ImagePlane alf;     // A(x,y,c) in [0,1]
  ScalarField asc;    // beta(x,y) >= 0, 1/m
  ScalarField depth;  // d(x,y) > 0, m
};

// Throws InvalidArgument / DimensionMismatch when the invariants do not hold.
void validate(const SceneParams& params);

// t = exp(-beta d) elementwise.
ScalarField transmission(const ScalarField& asc, const ScalarField& depth);

// I = J t + A (1 - t).
ImagePlane synthesize(const ImagePlane& clean, const SceneParams& params);

struct DehazeOptions {
  // Largest beta*d accepted before the inversion is considered meaningless.
  double max_exposure = 20.0;
};

struct DehazeResult {
  ImagePlane clamped;    // J clipped to [0,1]
  ImagePlane unclamped;  // raw (I - A) exp(beta d) + A
};

DehazeResult dehaze(const ImagePlane& hazy, const SceneParams& params, const DehazeOptions& opts = {});

// ---------------------------------------------------------------------------
// Bias propagation: how estimation errors in A, beta and d move J.

struct BiasInputs {
  double alf_gt = 0.0;
  double asc_gt = 0.0;
  double depth_gt = 1.0;
  double intensity = 0.0;  // observed hazy value I
  double d_alf = 0.0;
  double d_asc = 0.0;
  double d_depth = 0.0;
};

// Exact Delta J for arbitrary simultaneous perturbations.
double bias_exact(const BiasInputs& b);

// Delta J when only A is perturbed: (1 - exp(beta d)) dA.
double bias_alf(double asc_gt, double depth_gt, double d_alf);

// Delta J when only one exponent factor is perturbed. With base = beta and
// other = d this is the scattering-coefficient case; with base = d and
// other = beta it is the depth case.
double bias_expfactor(double intensity, double alf_gt, double base_gt, double other_gt, double delta);

enum class SurfaceKind { kAlf, kAsc, kDepth };

struct SurfaceGrid {
  SurfaceKind kind = SurfaceKind::kAlf;
  std::vector<double> param_values;  // ground-truth value of the swept parameter
  std::vector<double> deltas;
  // Fixed context; the swept parameter's own slot is ignored.
  double intensity = 0.8;
  double alf = 1.0;
  double asc = 0.35;
  double depth = 1.0;
};

struct SurfaceRow {
  double param_gt;
  double delta;
  double delta_j;
};

std::vector<SurfaceRow> bias_surface(const SurfaceGrid& grid);

// CSV with header "param_gt,delta,delta_j", 9 significant digits.
void write_surface_csv(std::ostream& os, const std::vector<SurfaceRow>& rows);

// Default sweep for each kind; its delta axis always contains an exact 0.
SurfaceGrid default_surface_grid(SurfaceKind kind);

// n evenly spaced values in [lo, hi] (n >= 1).
std::vector<double> linspace(double lo, double hi, int n);
// 2*half_steps+1 values (i - half_steps) * half_width / half_steps, so the
// centre is exactly zero.
std::vector<double> symmetric_range(double half_width, int half_steps);

SurfaceKind parse_surface_kind(const std::string& name);

}  // namespace fnh
