#include "fnh/losses.hpp"

#include <algorithm>
#include <cmath>

#include "fnh/color.hpp"
#include "fnh/error.hpp"
#include "fnh/kernels.hpp"

namespace fnh {

LossConfig LossConfig::from_dataset_means(double mean_depth, double mean_beta) {
  LossConfig cfg{std::exp(mean_depth), std::exp(mean_beta)};
  cfg.validate();
  return cfg;
}

void LossConfig::validate() const {
  if (!(lambda1 > 1.0) || !std::isfinite(lambda1)) throw InvalidArgument("lambda1 must be finite and > 1");
  if (!(lambda2 > 1.0) || !std::isfinite(lambda2)) throw InvalidArgument("lambda2 must be finite and > 1");
}

double presets::lambda2_for_base_beta(double base_beta) {
  if (std::abs(base_beta - 0.35) < 1e-9) return kLambda2Beta035;
  if (std::abs(base_beta - 0.55) < 1e-9) return kLambda2Beta055;
  if (std::abs(base_beta - 0.75) < 1e-9) return kLambda2Beta075;
  throw InvalidArgument("no published lambda2 for base beta " + std::to_string(base_beta));
}

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw DimensionMismatch(std::string(what) + ": length mismatch");
  if (a.empty()) throw InvalidArgument(std::string(what) + ": empty input");
}

}  // namespace

LossReport exp_cost_loss(std::span<const double> est, std::span<const double> gt, double lambda, GradientMode mode) {
  require_same_length(est, gt, "exp_cost_loss");
  if (!(lambda > 1.0)) throw InvalidArgument("exp_cost_loss: lambda must be > 1");
  const double log_lambda = std::log(lambda);
  const std::size_t n = est.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> terms(n);
  LossReport out;
  if (mode == GradientMode::kCompute) out.gradient.emplace(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double pe = std::exp(log_lambda * est[i]);
    const double diff = pe - std::exp(log_lambda * gt[i]);
    terms[i] = std::abs(diff);
    if (out.gradient) {
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      (*out.gradient)[i] = inv_n * sign * log_lambda * pe;
    }
  }
  out.value = kernels::pairwise_sum(terms) * inv_n;
  return out;
}

LossReport beta_loss(const ScalarField& est, const ScalarField& gt, const LossConfig& cfg, GradientMode mode) {
  require_same_shape(est, gt, "beta_loss");
  cfg.validate();
  return exp_cost_loss(est.data(), gt.data(), cfg.lambda1, mode);
}

LossReport d_loss(const ScalarField& est, const ScalarField& gt, const LossConfig& cfg, GradientMode mode) {
  require_same_shape(est, gt, "d_loss");
  cfg.validate();
  return exp_cost_loss(est.data(), gt.data(), cfg.lambda2, mode);
}

LossReport fwb_loss(std::span<const double> est, std::span<const double> gt, const FwbOptions& opts,
                    GradientMode mode) {
  require_same_length(est, gt, "fwb_loss");
  if (est.size() % 3 != 0) throw InvalidArgument("fwb_loss: input is not RGB");
  const std::size_t n = est.size() / 3;
  const double scale = opts.normalized ? 1.0 / static_cast<double>(n) : 1.0;
  std::vector<double> terms(n);
  LossReport out;
  if (mode == GradientMode::kCompute) out.gradient.emplace(est.size(), 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    LabJacobian jac;
    const Lab le = srgb_to_lab({est[3 * p], est[3 * p + 1], est[3 * p + 2]}, jac);
    const Lab lg = srgb_to_lab({gt[3 * p], gt[3 * p + 1], gt[3 * p + 2]});
    double sq = 0.0;
    double diff[3];
    for (int k = 0; k < 3; ++k) {
      diff[k] = le[k] - lg[k];
      sq += diff[k] * diff[k];
    }
    terms[p] = sq;
    if (out.gradient) {
      for (int i = 0; i < 3; ++i) {
        double g = 0.0;
        for (int k = 0; k < 3; ++k) g += 2.0 * diff[k] * jac[k][i];
        (*out.gradient)[3 * p + i] = scale * g;
      }
    }
  }
  out.value = kernels::pairwise_sum(terms) * scale;
  return out;
}

LossReport fwb_loss(const ImagePlane& est, const ImagePlane& gt, const FwbOptions& opts, GradientMode mode) {
  if (est.channels() != 3 || gt.channels() != 3) throw InvalidArgument("fwb_loss requires RGB images");
  require_same_shape(est, gt, "fwb_loss");
  return fwb_loss(est.data(), gt.data(), opts, mode);
}

LossReport mse_loss(std::span<const double> est, std::span<const double> gt, GradientMode mode) {
  require_same_length(est, gt, "mse_loss");
  const std::size_t n = est.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> terms(n);
  LossReport out;
  if (mode == GradientMode::kCompute) out.gradient.emplace(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = est[i] - gt[i];
    terms[i] = d * d;
    if (out.gradient) (*out.gradient)[i] = 2.0 * d * inv_n;
  }
  out.value = kernels::pairwise_sum(terms) * inv_n;
  return out;
}

LossReport mse_loss(const ImagePlane& est, const ImagePlane& gt, GradientMode mode) {
  require_same_shape(est, gt, "mse_loss");
  return mse_loss(est.data(), gt.data(), mode);
}

LossReport mse_loss(const ScalarField& est, const ScalarField& gt, GradientMode mode) {
  require_same_shape(est, gt, "mse_loss");
  return mse_loss(est.data(), gt.data(), mode);
}

GradCheckResult grad_check(const std::function<double(std::span<const double>)>& value_fn,
                           std::span<const double> point, std::span<const double> analytic, double eps,
                           const std::function<bool(std::size_t)>& is_tie, double floor) {
  if (!(eps > 0.0) || eps > 1e-3) throw InvalidArgument("grad_check: eps must lie in (0, 1e-3]");
  if (point.size() != analytic.size()) throw DimensionMismatch("grad_check: gradient length mismatch");
  GradCheckResult res;
  std::vector<double> x(point.begin(), point.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (is_tie && is_tie(i)) {
      res.excluded.push_back(i);
      continue;
    }
    const double orig = x[i];
    x[i] = orig + eps;
    const double fp = value_fn(x);
    x[i] = orig - eps;
    const double fm = value_fn(x);
    x[i] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic[i] - numeric) / denom);
    ++res.checked;
  }
  return res;
}

std::function<bool(std::size_t)> abs_loss_ties(std::span<const double> est, std::span<const double> gt, double eps) {
  return [est, gt, eps](std::size_t i) { return std::abs(est[i] - gt[i]) <= eps; };
}

}  // namespace fnh
