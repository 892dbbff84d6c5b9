#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fnh/image.hpp"

namespace fnh {

/// Loss value plus, optionally, d(loss)/d(est) laid out like est.data().
struct LossReport {
  double value = 0.0;
  std::optional<std::vector<double>> gradient;

  bool has_gradient() const { return gradient.has_value(); }
};

/// Bases of the cost-sensitive exponential losses. lambda1 = exp(mean depth)
/// drives the scattering-coefficient loss, lambda2 = exp(mean beta) the
/// depth loss. Both must exceed 1.
struct LossConfig {
  double lambda1 = 5.212;
  double lambda2 = 1.195;

  static LossConfig from_dataset_means(double mean_depth, double mean_beta);
  void validate() const;
};

namespace presets {
inline constexpr double kLambda1 = 5.212;
// lambda2 published for base scattering coefficients 0.35, 0.55 and 0.75.
inline constexpr double kLambda2Beta035 = 1.195;
inline constexpr double kLambda2Beta055 = 1.290;
inline constexpr double kLambda2Beta075 = 1.471;
// Returns the published lambda2 for one of the three base values above.
double lambda2_for_base_beta(double base_beta);
}  // namespace presets

enum class GradientMode { kNone, kCompute };

// (1/N) sum |lambda^est - lambda^gt| over raw spans; building block for
// the two cost-sensitive losses. Subgradient at ties is 0.
LossReport exp_cost_loss(std::span<const double> est, std::span<const double> gt, double lambda,
                         GradientMode mode = GradientMode::kCompute);

// Scattering-coefficient loss with base lambda1.
LossReport beta_loss(const ScalarField& est, const ScalarField& gt, const LossConfig& cfg,
                     GradientMode mode = GradientMode::kCompute);

// Depth loss with base lambda2.
LossReport d_loss(const ScalarField& est, const ScalarField& gt, const LossConfig& cfg,
                  GradientMode mode = GradientMode::kCompute);

struct FwbOptions {
  // Divide the sum by the pixel count.
  bool normalized = false;
};

// Sum over pixels and L,a,b channels of the squared CIELAB difference; the
// gradient is taken through the sRGB -> CIELAB conversion.
LossReport fwb_loss(std::span<const double> est_rgb, std::span<const double> gt_rgb,
                    const FwbOptions& opts = {}, GradientMode mode = GradientMode::kCompute);
LossReport fwb_loss(const ImagePlane& est, const ImagePlane& gt, const FwbOptions& opts = {},
                    GradientMode mode = GradientMode::kCompute);

LossReport mse_loss(std::span<const double> est, std::span<const double> gt,
                    GradientMode mode = GradientMode::kCompute);
LossReport mse_loss(const ImagePlane& est, const ImagePlane& gt, GradientMode mode = GradientMode::kCompute);
LossReport mse_loss(const ScalarField& est, const ScalarField& gt, GradientMode mode = GradientMode::kCompute);

// ---------------------------------------------------------------------------
// Finite-difference verification

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::vector<std::size_t> excluded;  // components skipped as non-differentiable
};

// Compares `analytic` against central differences (f(x+e) - f(x-e)) / 2e.
// Relative error per component is |a - n| / max(|a|, |n|, floor).
// Components for which `is_tie` returns true are excluded and reported.
GradCheckResult grad_check(const std::function<double(std::span<const double>)>& value_fn,
                           std::span<const double> point, std::span<const double> analytic, double eps,
                           const std::function<bool(std::size_t)>& is_tie = {}, double floor = 1e-8);

// Tie predicate for the absolute-value losses: |est - gt| <= eps.
std::function<bool(std::size_t)> abs_loss_ties(std::span<const double> est, std::span<const double> gt, double eps);

}  // namespace fnh
