#include "fnh/nn/model.hpp"

#include <algorithm>
#include <cmath>

#include "fnh/error.hpp"
#include "fnh/rng.hpp"

namespace fnh::nn {

void ToyNetConfig::validate() const {
  if (levels < 1 || levels > 8) throw InvalidArgument("levels must lie in [1, 8]");
  if (base_channels < 1) throw InvalidArgument("base_channels must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw InvalidArgument("kernel_size must be odd");
  if (!(positivity_offset >= 0.0)) throw InvalidArgument("positivity_offset must be >= 0");
  if (!(exposure_cap > 0.0)) throw InvalidArgument("exposure_cap must be > 0");
}

void to_json(nlohmann::json& j, const ToyNetConfig& c) {
  j = nlohmann::json{{"levels", c.levels},
                     {"base_channels", c.base_channels},
                     {"kernel_size", c.kernel_size},
                     {"upsample", c.upsample == UpsampleMode::kTransposed ? "transposed" : "nearest_conv"},
                     {"positivity_offset", c.positivity_offset},
                     {"exposure_cap", c.exposure_cap}};
}

void from_json(const nlohmann::json& j, ToyNetConfig& c) {
  c.levels = j.value("levels", c.levels);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.kernel_size = j.value("kernel_size", c.kernel_size);
  const auto up = j.value("upsample", std::string("nearest_conv"));
  if (up == "nearest_conv") {
    c.upsample = UpsampleMode::kNearestConv;
  } else if (up == "transposed") {
    c.upsample = UpsampleMode::kTransposed;
  } else {
    throw InvalidArgument("unknown upsample mode '" + up + "'");
  }
  c.positivity_offset = j.value("positivity_offset", c.positivity_offset);
  c.exposure_cap = j.value("exposure_cap", c.exposure_cap);
}

const char* head_name(Head h) {
  switch (h) {
    case Head::kAlf:
      return "alf";
    case Head::kDepth:
      return "depth";
    case Head::kAsc:
      return "asc";
  }
  return "?";
}

namespace {

constexpr Head kHeads[kHeadCount] = {Head::kAlf, Head::kDepth, Head::kAsc};

int head_channels(Head h) { return h == Head::kAlf ? 3 : 1; }

ParamGroup head_group(Head h) {
  switch (h) {
    case Head::kAlf:
      return ParamGroup::kDecoderAlf;
    case Head::kDepth:
      return ParamGroup::kDecoderDepth;
    case Head::kAsc:
      return ParamGroup::kDecoderAsc;
  }
  return ParamGroup::kDecoderAlf;
}

}  // namespace

ToyModel::ToyModel(const ToyNetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int L = cfg_.levels;
  const int k = cfg_.kernel_size;
  for (int l = 0; l < L; ++l) {
    const int in = l == 0 ? 3 : cfg_.channels_at(l - 1);
    encoder_.push_back(add_slot("encoder.l" + std::to_string(l), ParamGroup::kEncoder, in, cfg_.channels_at(l), k, false));
  }
  for (Head h : kHeads) {
    auto& d = decoders_[static_cast<int>(h)];
    const std::string prefix = std::string("decoder.") + head_name(h) + ".";
    const ParamGroup g = head_group(h);
    const int top = cfg_.channels_at(L - 1);
    d.bottleneck = add_slot(prefix + "bottleneck", g, top, top, k, false);
    d.up.assign(std::max(0, L - 1), 0);
    d.merge.assign(std::max(0, L - 1), 0);
    for (int l = L - 2; l >= 0; --l) {
      const int c = cfg_.channels_at(l);
      if (cfg_.upsample == UpsampleMode::kTransposed) {
        d.up[l] = add_slot(prefix + "up.l" + std::to_string(l), g, cfg_.channels_at(l + 1), c, 2, true);
      } else {
        d.up[l] = add_slot(prefix + "up.l" + std::to_string(l), g, cfg_.channels_at(l + 1), c, k, false);
      }
      d.merge[l] = add_slot(prefix + "merge.l" + std::to_string(l), g, 2 * c, c, k, false);
    }
    d.head = add_slot(prefix + "head", g, cfg_.channels_at(0), head_channels(h), k, false);
  }
  refine_ = add_slot("ehim.refine", ParamGroup::kRefine, 3, 3, k, false);
}

std::size_t ToyModel::add_slot(const std::string& name, ParamGroup g, int in, int out, int k, bool transposed) {
  ParamSlot s{name, g, in, out, k, transposed, params_.size(), 0};
  s.bias_offset = s.weight_offset + s.weight_count();
  params_.resize(s.bias_offset + out, 0.0);
  slots_.push_back(std::move(s));
  return slots_.size() - 1;
}

std::size_t ToyModel::find_slot(const std::string& name) const {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name == name) return i;
  }
  throw InvalidArgument("no parameter slot named '" + name + "'");
}

std::vector<std::uint8_t> ToyModel::group_mask(std::initializer_list<ParamGroup> groups) const {
  std::vector<std::uint8_t> mask(params_.size(), 0);
  for (const auto& s : slots_) {
    if (std::find(groups.begin(), groups.end(), s.group) == groups.end()) continue;
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(s.weight_offset),
              mask.begin() + static_cast<std::ptrdiff_t>(s.bias_offset + s.out_channels), 1);
  }
  return mask;
}

void ToyModel::set_head_outputs(const double alf[3], double depth, double asc) {
  auto a = bias(head_slot(Head::kAlf));
  for (int c = 0; c < 3; ++c) a[c] = alf[c];
  const double off = cfg_.positivity_offset;
  bias(head_slot(Head::kDepth))[0] = softplus_inverse(std::max(depth - off, 1e-6));
  bias(head_slot(Head::kAsc))[0] = softplus_inverse(std::max(asc - off, 1e-6));
}

ToyModel ToyModel::create(const ToyNetConfig& cfg, std::uint64_t seed) {
  ToyModel m(cfg);
  Rng rng = substream(seed, 0x6d6f64656cULL);
  for (std::size_t i = 0; i < m.slots_.size(); ++i) {
    const auto& s = m.slots_[i];
    const double fan_in = s.transposed ? s.in_channels : static_cast<double>(s.in_channels) * s.kernel * s.kernel;
    double stddev = std::sqrt(2.0 / fan_in);
    const bool is_head = s.name.ends_with(".head");
    if (is_head) stddev *= 0.1;
    auto w = m.weight(i);
    if (i == m.refine_) {
      std::fill(w.begin(), w.end(), 0.0);
      const int centre = s.kernel / 2;
      for (int c = 0; c < 3; ++c) w[((c * 3 + c) * s.kernel + centre) * s.kernel + centre] = 1.0;
      continue;
    }
    for (double& x : w) x = stddev * normal01(rng);
  }
  const double alf[3] = {0.7, 0.7, 0.7};
  m.set_head_outputs(alf, 2.0, 0.1);
  return m;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

Tensor conv_slot(const ToyModel& m, std::size_t slot, const Tensor& in) {
  const auto& s = m.slots()[slot];
  if (s.transposed) return conv_transpose2x2(in, m.weight(slot), m.bias(slot), s.out_channels);
  return conv2d(in, m.weight(slot), m.bias(slot), s.out_channels, s.kernel);
}

Tensor conv_slot_backward(const ToyModel& m, std::size_t slot, const Tensor& in, const Tensor& grad_out,
                          std::vector<double>& grads, bool need_input) {
  const auto& s = m.slots()[slot];
  std::span<double> gw(grads.data() + s.weight_offset, s.weight_count());
  std::span<double> gb(grads.data() + s.bias_offset, static_cast<std::size_t>(s.out_channels));
  if (s.transposed) return conv_transpose2x2_backward(in, grad_out, m.weight(slot), gw, gb);
  return conv2d_backward(in, grad_out, m.weight(slot), gw, gb, s.kernel, need_input);
}

}  // namespace

ForwardCache forward_cached(const ToyModel& model, const ImagePlane& hazy) {
  const auto& cfg = model.config();
  if (hazy.channels() != 3) throw InvalidArgument("forward: input must be RGB");
  const int mult = cfg.spatial_multiple();
  if (hazy.height() % mult != 0 || hazy.width() % mult != 0) {
    throw InvalidArgument("forward: spatial dimensions " + std::to_string(hazy.height()) + "x" +
                          std::to_string(hazy.width()) + " are not divisible by " + std::to_string(mult));
  }
  const int L = cfg.levels;
  ForwardCache fc;
  fc.input = from_image(hazy);
  fc.pooled.resize(L);
  fc.encoded.resize(L);
  for (int l = 0; l < L; ++l) {
    const Tensor* in = &fc.input;
    if (l > 0) {
      fc.pooled[l] = avg_pool2(fc.encoded[l - 1]);
      in = &fc.pooled[l];
    }
    fc.encoded[l] = conv_slot(model, model.encoder_slot(l), *in);
    relu_inplace(fc.encoded[l]);
  }

  for (Head h : kHeads) {
    auto& dc = fc.decoders[static_cast<int>(h)];
    dc.bottleneck = conv_slot(model, model.bottleneck_slot(h), fc.encoded[L - 1]);
    relu_inplace(dc.bottleneck);
    dc.up_in.resize(std::max(0, L - 1));
    dc.up_out.resize(std::max(0, L - 1));
    dc.merge_in.resize(std::max(0, L - 1));
    dc.merge_out.resize(std::max(0, L - 1));
    const Tensor* x = &dc.bottleneck;
    for (int l = L - 2; l >= 0; --l) {
      dc.up_in[l] = cfg.upsample == UpsampleMode::kTransposed ? *x : upsample_nearest2(*x);
      dc.up_out[l] = conv_slot(model, model.up_slot(h, l), dc.up_in[l]);
      relu_inplace(dc.up_out[l]);
      dc.merge_in[l] = concat_channels(dc.up_out[l], fc.encoded[l]);
      dc.merge_out[l] = conv_slot(model, model.merge_slot(h, l), dc.merge_in[l]);
      relu_inplace(dc.merge_out[l]);
      x = &dc.merge_out[l];
    }
    dc.head_in = *x;
    dc.head_out = conv_slot(model, model.head_slot(h), dc.head_in);
  }

  const double off = cfg.positivity_offset;
  fc.alf = fc.decoders[static_cast<int>(Head::kAlf)].head_out;
  for (double& v : fc.alf.v) v = brelu(v);
  fc.depth = fc.decoders[static_cast<int>(Head::kDepth)].head_out;
  for (double& v : fc.depth.v) v = softplus(v) + off;
  fc.asc = fc.decoders[static_cast<int>(Head::kAsc)].head_out;
  for (double& v : fc.asc.v) v = softplus(v) + off;

  const std::size_t n = fc.input.plane();
  fc.exposure_raw = Tensor(1, fc.input.h, fc.input.w);
  fc.amplification = Tensor(1, fc.input.h, fc.input.w);
  fc.ehim = Tensor(3, fc.input.h, fc.input.w);
  for (std::size_t p = 0; p < n; ++p) {
    const double s = fc.asc.v[p] * fc.depth.v[p];
    fc.exposure_raw.v[p] = s;
    const double amp = std::exp(std::min(s, cfg.exposure_cap));
    fc.amplification.v[p] = amp;
    for (int c = 0; c < 3; ++c) {
      const std::size_t i = c * n + p;
      fc.ehim.v[i] = (fc.input.v[i] - fc.alf.v[i]) * amp + fc.alf.v[i];
    }
  }
  fc.refined = conv_slot(model, model.refine_slot(), fc.ehim);
  fc.dehazed = fc.refined;
  for (double& v : fc.dehazed.v) v = brelu(v);
  return fc;
}

Prediction forward(const ToyModel& model, const ImagePlane& hazy) {
  const ForwardCache fc = forward_cached(model, hazy);
  return {to_image(fc.alf), to_field(fc.depth), to_field(fc.asc), to_image(fc.dehazed)};
}

// ---------------------------------------------------------------------------
// Losses and backward

namespace {

struct LossGrads {
  LossValues values;
  Tensor d_dehazed;  // empty when unused
  Tensor d_alf;
  Tensor d_depth;
  Tensor d_asc;
};

void require_target(const void* p, const char* what) {
  if (p == nullptr) throw InvalidArgument(std::string("backward: selected loss needs missing target '") + what + "'");
}

LossGrads compute_losses(const ForwardCache& fc, const Targets& t, const LossSelection& sel, GradientMode mode) {
  LossGrads out;
  const int H = fc.input.h;
  const int W = fc.input.w;
  if (sel.mse_dehazed != 0.0) {
    require_target(t.clean, "clean");
    const ImagePlane est = to_image(fc.dehazed);
    require_same_shape(est, *t.clean, "mse target");
    auto r = mse_loss(est, *t.clean, mode);
    out.values.mse_dehazed = r.value;
    out.values.total += sel.mse_dehazed * r.value;
    if (r.gradient) {
      for (double& g : *r.gradient) g *= sel.mse_dehazed;
      out.d_dehazed = from_hwc(*r.gradient, 3, H, W);
    }
  }
  if (sel.fwb != 0.0) {
    require_target(t.alf, "alf");
    const ImagePlane est = to_image(fc.alf);
    if (t.alf->channels() != 3) throw InvalidArgument("backward: alf target must be RGB");
    require_same_shape(est, *t.alf, "alf target");
    auto r = fwb_loss(est, *t.alf, sel.fwb_options, mode);
    out.values.fwb = r.value;
    out.values.total += sel.fwb * r.value;
    if (r.gradient) {
      for (double& g : *r.gradient) g *= sel.fwb;
      out.d_alf = from_hwc(*r.gradient, 3, H, W);
    }
  }
  if (sel.beta != 0.0) {
    require_target(t.asc, "asc");
    if (t.asc->height() != H || t.asc->width() != W) throw DimensionMismatch("asc target shape");
    sel.lambdas.validate();
    auto r = exp_cost_loss(fc.asc.v, t.asc->data(), sel.lambdas.lambda1, mode);
    out.values.beta = r.value;
    out.values.total += sel.beta * r.value;
    if (r.gradient) {
      out.d_asc = Tensor(1, H, W);
      for (std::size_t i = 0; i < out.d_asc.v.size(); ++i) out.d_asc.v[i] = sel.beta * (*r.gradient)[i];
    }
  }
  if (sel.depth != 0.0) {
    require_target(t.depth, "depth");
    if (t.depth->height() != H || t.depth->width() != W) throw DimensionMismatch("depth target shape");
    sel.lambdas.validate();
    auto r = exp_cost_loss(fc.depth.v, t.depth->data(), sel.lambdas.lambda2, mode);
    out.values.depth = r.value;
    out.values.total += sel.depth * r.value;
    if (r.gradient) {
      out.d_depth = Tensor(1, H, W);
      for (std::size_t i = 0; i < out.d_depth.v.size(); ++i) out.d_depth.v[i] = sel.depth * (*r.gradient)[i];
    }
  }
  return out;
}

void ensure(Tensor& t, int c, int h, int w) {
  if (t.v.empty()) t = Tensor(c, h, w);
}

}  // namespace

LossValues evaluate_losses(const ToyModel& model, const ImagePlane& hazy, const Targets& targets,
                           const LossSelection& sel) {
  const ForwardCache fc = forward_cached(model, hazy);
  return compute_losses(fc, targets, sel, GradientMode::kNone).values;
}

BackwardResult backward(const ToyModel& model, const ImagePlane& hazy, const Targets& targets,
                        const LossSelection& sel, bool include_encoder) {
  const auto& cfg = model.config();
  const ForwardCache fc = forward_cached(model, hazy);
  LossGrads lg = compute_losses(fc, targets, sel, GradientMode::kCompute);

  BackwardResult res;
  res.losses = lg.values;
  res.grads.assign(model.param_count(), 0.0);
  const int H = fc.input.h;
  const int W = fc.input.w;
  const std::size_t n = fc.input.plane();
  const int L = cfg.levels;

  // Haze-free image module.
  if (!lg.d_dehazed.v.empty()) {
    Tensor dr = lg.d_dehazed;
    for (std::size_t i = 0; i < dr.v.size(); ++i) {
      const double r = fc.refined.v[i];
      if (!(r > 0.0 && r < 1.0)) dr.v[i] = 0.0;
    }
    const Tensor dj0 = conv_slot_backward(model, model.refine_slot(), fc.ehim, dr, res.grads, true);
    ensure(lg.d_alf, 3, H, W);
    ensure(lg.d_asc, 1, H, W);
    ensure(lg.d_depth, 1, H, W);
    for (std::size_t p = 0; p < n; ++p) {
      const double amp = fc.amplification.v[p];
      double d_amp = 0.0;
      for (int c = 0; c < 3; ++c) {
        const std::size_t i = c * n + p;
        d_amp += dj0.v[i] * (fc.input.v[i] - fc.alf.v[i]);
        lg.d_alf.v[i] += dj0.v[i] * (1.0 - amp);
      }
      if (fc.exposure_raw.v[p] < cfg.exposure_cap) {
        const double ds = d_amp * amp;
        lg.d_asc.v[p] += ds * fc.depth.v[p];
        lg.d_depth.v[p] += ds * fc.asc.v[p];
      }
    }
  }

  std::vector<Tensor> d_encoded(L);
  if (include_encoder) {
    for (int l = 0; l < L; ++l) d_encoded[l] = Tensor(fc.encoded[l].c, fc.encoded[l].h, fc.encoded[l].w);
  }

  for (Head h : kHeads) {
    const auto& dc = fc.decoders[static_cast<int>(h)];
    Tensor dz;
    switch (h) {
      case Head::kAlf:
        if (lg.d_alf.v.empty()) continue;
        dz = lg.d_alf;
        for (std::size_t i = 0; i < dz.v.size(); ++i) {
          const double z = dc.head_out.v[i];
          if (!(z > 0.0 && z < 1.0)) dz.v[i] = 0.0;
        }
        break;
      case Head::kDepth:
        if (lg.d_depth.v.empty()) continue;
        dz = lg.d_depth;
        for (std::size_t i = 0; i < dz.v.size(); ++i) dz.v[i] *= sigmoid(dc.head_out.v[i]);
        break;
      case Head::kAsc:
        if (lg.d_asc.v.empty()) continue;
        dz = lg.d_asc;
        for (std::size_t i = 0; i < dz.v.size(); ++i) dz.v[i] *= sigmoid(dc.head_out.v[i]);
        break;
    }

    Tensor gx = conv_slot_backward(model, model.head_slot(h), dc.head_in, dz, res.grads, true);
    for (int l = 0; l <= L - 2; ++l) {
      relu_backward_inplace(gx, dc.merge_out[l]);
      const Tensor gcat = conv_slot_backward(model, model.merge_slot(h, l), dc.merge_in[l], gx, res.grads, true);
      Tensor gu;
      Tensor ge;
      split_channels(gcat, dc.up_out[l].c, gu, ge);
      if (include_encoder) add_inplace(d_encoded[l], ge);
      relu_backward_inplace(gu, dc.up_out[l]);
      Tensor gin = conv_slot_backward(model, model.up_slot(h, l), dc.up_in[l], gu, res.grads, true);
      gx = cfg.upsample == UpsampleMode::kTransposed ? std::move(gin) : upsample_nearest2_backward(gin);
    }
    relu_backward_inplace(gx, dc.bottleneck);
    const Tensor ge_top =
        conv_slot_backward(model, model.bottleneck_slot(h), fc.encoded[L - 1], gx, res.grads, include_encoder);
    if (include_encoder) add_inplace(d_encoded[L - 1], ge_top);
  }

  if (include_encoder) {
    for (int l = L - 1; l >= 0; --l) {
      relu_backward_inplace(d_encoded[l], fc.encoded[l]);
      const Tensor& in = l == 0 ? fc.input : fc.pooled[l];
      const Tensor gin = conv_slot_backward(model, model.encoder_slot(l), in, d_encoded[l], res.grads, l > 0);
      if (l > 0) add_inplace(d_encoded[l - 1], avg_pool2_backward(gin));
    }
  }
  return res;
}

}  // namespace fnh::nn
