#pragma once

#include <json.hpp>

#include "fnh/image.hpp"
#include "fnh/scatter.hpp"

namespace fnh {

struct VariationalConfig {
  int max_iterations = 800;
  // Stop when the objective changes by less than this fraction.
  double tolerance = 1e-9;
  double step = 0.05;
  // Relative step for A.
  double alf_step_scale = 0.1;
  double smooth_weight = 0.05;
  // Pushes the darkest channel of J toward zero.
  double dark_weight = 0.02;
  double asc_init = 0.1;
  // Depth ramp from the top row (far) to the bottom row (near).
  double depth_far = 3.0;
  double depth_near = 1.0;
  double depth_min = 1e-3;
  // Fraction of brightest pixels averaged for the airlight prior.
  double bright_fraction = 1e-3;

  void validate() const;
};

void to_json(nlohmann::json& j, const VariationalConfig& c);
void from_json(const nlohmann::json& j, VariationalConfig& c);

struct VariationalResult {
  SceneParams params;
  ImagePlane dehazed;  // clamped to [0,1]
  double objective = 0.0;  // per pixel, at the last iteration
  // max |synthesize(dehazed, params) - hazy|
  double residual = 0.0;
  int iterations = 0;
};

// Per-pixel projected gradient descent on (A, beta, d). The data term
// penalises the mismatch left after clamping J to [0,1] and the darkest
// channel of J; forward differences regularise every map. A final
// projection shrinks beta*d wherever J would leave [0,1].
VariationalResult variational_estimate(const ImagePlane& hazy, const VariationalConfig& cfg = {});

}  // namespace fnh
