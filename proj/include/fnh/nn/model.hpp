#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fnh/image.hpp"
#include "fnh/losses.hpp"
#include "fnh/nn/tensor.hpp"

namespace fnh::nn {

enum class UpsampleMode {
  kNearestConv,  // nearest-neighbour x2 followed by a 3x3 convolution
  kTransposed,   // 2x2 stride-2 transposed convolution
};

struct ToyNetConfig {
  int levels = 4;
  int base_channels = 8;
  int kernel_size = 3;
  UpsampleMode upsample = UpsampleMode::kNearestConv;
  // beta and d heads emit softplus(z) + positivity_offset.
  double positivity_offset = 1e-3;
  // beta*d is clipped here inside the dehazing module.
  double exposure_cap = 20.0;

  void validate() const;
  int channels_at(int level) const { return base_channels << level; }
  // Spatial dimensions must be divisible by this.
  int spatial_multiple() const { return 1 << (levels - 1); }
};

void to_json(nlohmann::json& j, const ToyNetConfig& c);
void from_json(const nlohmann::json& j, ToyNetConfig& c);

enum class Head { kAlf = 0, kDepth = 1, kAsc = 2 };
inline constexpr int kHeadCount = 3;
const char* head_name(Head h);

enum class ParamGroup : std::uint8_t { kEncoder, kDecoderAlf, kDecoderDepth, kDecoderAsc, kRefine };

/// One convolution's parameters inside the flat parameter vector.
struct ParamSlot {
  std::string name;
  ParamGroup group;
  int in_channels;
  int out_channels;
  int kernel;
  bool transposed;
  std::size_t weight_offset;
  std::size_t bias_offset;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
  }
};

/// The miniature encoder / three-decoder estimator with its haze-free
/// image module. All weights live in one flat vector so optimisers and
/// checkpoints treat the model uniformly.
class ToyModel {
 public:
  // Layout only; parameters are zero.
  explicit ToyModel(const ToyNetConfig& cfg);

  // He-normal weights, zero biases, identity refinement kernel and mild
  // head offsets.
  static ToyModel create(const ToyNetConfig& cfg, std::uint64_t seed);

  const ToyNetConfig& config() const { return cfg_; }
  const std::vector<ParamSlot>& slots() const { return slots_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> weight(std::size_t slot) {
    return std::span<double>(params_).subspan(slots_[slot].weight_offset, slots_[slot].weight_count());
  }
  std::span<const double> weight(std::size_t slot) const {
    return std::span<const double>(params_).subspan(slots_[slot].weight_offset, slots_[slot].weight_count());
  }
  std::span<double> bias(std::size_t slot) {
    return std::span<double>(params_).subspan(slots_[slot].bias_offset, slots_[slot].out_channels);
  }
  std::span<const double> bias(std::size_t slot) const {
    return std::span<const double>(params_).subspan(slots_[slot].bias_offset, slots_[slot].out_channels);
  }

  // Slot indices.
  std::size_t encoder_slot(int level) const { return encoder_[level]; }
  std::size_t bottleneck_slot(Head h) const { return decoders_[static_cast<int>(h)].bottleneck; }
  std::size_t up_slot(Head h, int level) const { return decoders_[static_cast<int>(h)].up[level]; }
  std::size_t merge_slot(Head h, int level) const { return decoders_[static_cast<int>(h)].merge[level]; }
  std::size_t head_slot(Head h) const { return decoders_[static_cast<int>(h)].head; }
  std::size_t refine_slot() const { return refine_; }
  std::size_t find_slot(const std::string& name) const;

  // Per-parameter mask (1 = trainable) selecting the given groups.
  std::vector<std::uint8_t> group_mask(std::initializer_list<ParamGroup> groups) const;

  // Sets head biases; a zero-feature input then maps to the given values.
  void set_head_outputs(const double alf[3], double depth, double asc);

 private:
  struct DecoderSlots {
    std::size_t bottleneck = 0;
    std::vector<std::size_t> up;     // indexed by target level 0..levels-2
    std::vector<std::size_t> merge;  // indexed by level 0..levels-2
    std::size_t head = 0;
  };

  std::size_t add_slot(const std::string& name, ParamGroup g, int in, int out, int k, bool transposed);

  ToyNetConfig cfg_;
  std::vector<ParamSlot> slots_;
  std::vector<double> params_;
  std::vector<std::size_t> encoder_;
  DecoderSlots decoders_[kHeadCount];
  std::size_t refine_ = 0;
};

/// Everything the backward pass needs from a forward evaluation.
struct ForwardCache {
  Tensor input;
  std::vector<Tensor> pooled;   // pooled[l] feeds encoder level l (l >= 1)
  std::vector<Tensor> encoded;  // post-ReLU encoder outputs per level

  struct DecoderCache {
    Tensor bottleneck;            // post-ReLU
    std::vector<Tensor> up_in;    // input of the up layer per level (x or upsampled x)
    std::vector<Tensor> up_out;   // post-ReLU
    std::vector<Tensor> merge_in; // concat(up_out, encoded[l])
    std::vector<Tensor> merge_out;
    Tensor head_in;
    Tensor head_out;  // pre-activation z
  } decoders[kHeadCount];

  Tensor alf;     // 3 x H x W, brelu(z)
  Tensor depth;   // 1 x H x W
  Tensor asc;     // 1 x H x W
  Tensor exposure_raw;  // beta * d before clipping
  Tensor amplification; // exp(min(beta d, cap))
  Tensor ehim;     // J0 = (I - A) amp + A
  Tensor refined;  // conv output before brelu
  Tensor dehazed;  // brelu(refined)
};

struct Prediction {
  ImagePlane alf;
  ScalarField depth;
  ScalarField asc;
  ImagePlane dehazed;
};

ForwardCache forward_cached(const ToyModel& model, const ImagePlane& hazy);
Prediction forward(const ToyModel& model, const ImagePlane& hazy);

/// Ground truth available for one sample. Pointers may be null when the
/// corresponding loss is not selected.
struct Targets {
  const ImagePlane* clean = nullptr;
  const ImagePlane* alf = nullptr;
  const ScalarField* depth = nullptr;
  const ScalarField* asc = nullptr;
};

/// Weighted composite objective. A zero weight disables a term.
struct LossSelection {
  double mse_dehazed = 0.0;
  double beta = 0.0;
  double depth = 0.0;
  double fwb = 0.0;
  LossConfig lambdas;
  FwbOptions fwb_options{true};
};

struct LossValues {
  double total = 0.0;
  double mse_dehazed = 0.0;
  double beta = 0.0;
  double depth = 0.0;
  double fwb = 0.0;
};

struct BackwardResult {
  std::vector<double> grads;  // d(total) / d(params)
  LossValues losses;
};

// Evaluates the composite loss only.
LossValues evaluate_losses(const ToyModel& model, const ImagePlane& hazy, const Targets& targets,
                           const LossSelection& sel);

// Reverse-mode gradients of the composite loss with respect to every
// parameter. When `include_encoder` is false the encoder gradients are left
// at zero and the backward pass stops at the decoder inputs.
BackwardResult backward(const ToyModel& model, const ImagePlane& hazy, const Targets& targets,
                        const LossSelection& sel, bool include_encoder = true);

}  // namespace fnh::nn
