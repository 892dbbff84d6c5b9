#include "fnh/nn/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "fnh/error.hpp"
#include "fnh/metrics.hpp"
#include "fnh/rng.hpp"

namespace fnh::nn {

void sgd_step(std::span<double> weights, std::span<const double> grads, OptimState& state,
              std::span<const std::uint8_t> mask) {
  if (grads.size() != weights.size()) {
    throw DimensionMismatch("sgd_step: " + std::to_string(grads.size()) + " gradients for " +
                            std::to_string(weights.size()) + " weights");
  }
  if (!mask.empty() && mask.size() != weights.size()) throw DimensionMismatch("sgd_step: mask size");
  if (state.velocity.empty()) state.velocity.assign(weights.size(), 0.0);
  if (state.velocity.size() != weights.size()) throw DimensionMismatch("sgd_step: velocity size");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    double& v = state.velocity[i];
    v = state.momentum * v + (grads[i] + state.weight_decay * weights[i]);
    weights[i] -= state.lr * v;
  }
  ++state.iteration;
}

std::vector<TrainingSample> load_samples(const DatasetManifest& manifest) {
  if (manifest.entries.empty()) throw InvalidArgument("training manifest has no entries");
  std::vector<TrainingSample> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    TrainingSample s{e.stem,
                     load_image(manifest.resolve(e.hazy)),
                     load_image(manifest.resolve(e.clean)),
                     read_plane(manifest.resolve(e.alf)),
                     read_field(manifest.resolve(e.depth)),
                     read_field(manifest.resolve(e.beta))};
    if (s.hazy.channels() != 3) throw InvalidArgument("training needs RGB images: " + e.stem);
    require_same_shape(s.hazy, s.clean, e.stem);
    require_same_shape(s.hazy, s.alf, e.stem);
    require_same_spatial(s.depth, s.hazy, e.stem);
    require_same_spatial(s.asc, s.hazy, e.stem);
    out.push_back(std::move(s));
  }
  return out;
}

void TrainConfig::validate() const {
  net.validate();
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw InvalidArgument("lr and weight_decay must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
  if (iterations_per_phase < 1) throw InvalidArgument("iterations_per_phase must be >= 1");
  if (max_cycles < 1) throw InvalidArgument("max_cycles must be >= 1");
  if (patience < 1) throw InvalidArgument("patience must be >= 1");
  if (!(clip_norm >= 0.0)) throw InvalidArgument("clip_norm must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"net", c.net},
                     {"lr", c.lr},
                     {"weight_decay", c.weight_decay},
                     {"momentum", c.momentum},
                     {"iterations_per_phase", c.iterations_per_phase},
                     {"max_cycles", c.max_cycles},
                     {"convergence_tol", c.convergence_tol},
                     {"patience", c.patience},
                     {"beta_weight", c.beta_weight},
                     {"depth_weight", c.depth_weight},
                     {"fwb_weight", c.fwb_weight},
                     {"clip_norm", c.clip_norm},
                     {"init_head_biases", c.init_head_biases},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("net")) c.net = j.at("net").get<ToyNetConfig>();
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.momentum = j.value("momentum", c.momentum);
  c.iterations_per_phase = j.value("iterations_per_phase", c.iterations_per_phase);
  c.max_cycles = j.value("max_cycles", c.max_cycles);
  c.convergence_tol = j.value("convergence_tol", c.convergence_tol);
  c.patience = j.value("patience", c.patience);
  c.beta_weight = j.value("beta_weight", c.beta_weight);
  c.depth_weight = j.value("depth_weight", c.depth_weight);
  c.fwb_weight = j.value("fwb_weight", c.fwb_weight);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.init_head_biases = j.value("init_head_biases", c.init_head_biases);
  c.seed = j.value("seed", c.seed);
}

void write_training_log_csv(const TrainLog& log, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (f == nullptr) throw IoError("cannot open " + path.string() + " for writing");
  std::fputs("cycle,phase,iteration,loss_name,value\n", f);
  for (const auto& r : log.records) {
    for (const auto& [name, value] : r.losses) {
      std::fprintf(f, "%d,%d,%d,%s,%.17g\n", r.cycle, r.phase, r.iteration, name.c_str(), value);
    }
  }
  const bool bad = std::ferror(f) != 0;
  if (std::fclose(f) != 0 || bad) throw IoError("failed writing " + path.string());
}

void initialize_head_biases(ToyModel& model, std::span<const TrainingSample> samples) {
  if (samples.empty()) throw InvalidArgument("initialize_head_biases: no samples");
  std::vector<ScalarField> depth;
  std::vector<ScalarField> asc;
  std::vector<ScalarField> alf[3];
  for (const auto& s : samples) {
    depth.push_back(s.depth);
    asc.push_back(s.asc);
    for (int c = 0; c < 3; ++c) alf[c].push_back(extract_channel(s.alf, c));
  }
  const double a[3] = {dataset_mean(alf[0]), dataset_mean(alf[1]), dataset_mean(alf[2])};
  model.set_head_outputs(a, dataset_mean(depth), dataset_mean(asc));
}

namespace {

// Endless shuffled pass over sample indices.
class SampleOrder {
 public:
  SampleOrder(std::size_t n, std::uint64_t seed) : order_(n), rng_(substream(seed, 0x747261696eULL)) {}

  std::size_t next() {
    if (pos_ == 0) reshuffle();
    const std::size_t i = order_[pos_];
    pos_ = (pos_ + 1) % order_.size();
    return i;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = order_.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng_) * static_cast<double>(i));
      std::swap(order_[i - 1], order_[std::min(j, i - 1)]);
    }
  }

  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t pos_ = 0;
};

void clip_gradients(std::vector<double>& g, std::span<const std::uint8_t> mask, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (mask[i] != 0) sq += g[i] * g[i];
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (double& x : g) x *= s;
}

}  // namespace

TrainResult train(ToyModel model, std::span<const TrainingSample> samples, const LossConfig& lambdas,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  lambdas.validate();
  if (samples.empty()) throw InvalidArgument("train: no samples");
  if (cfg.init_head_biases) initialize_head_biases(model, samples);

  const auto decoder_mask =
      model.group_mask({ParamGroup::kDecoderAlf, ParamGroup::kDecoderDepth, ParamGroup::kDecoderAsc});
  const auto full_mask = model.group_mask({ParamGroup::kEncoder, ParamGroup::kDecoderAlf, ParamGroup::kDecoderDepth,
                                           ParamGroup::kDecoderAsc, ParamGroup::kRefine});

  LossSelection phase1;
  phase1.beta = cfg.beta_weight;
  phase1.depth = cfg.depth_weight;
  phase1.fwb = cfg.fwb_weight;
  phase1.lambdas = lambdas;
  LossSelection phase2;
  phase2.mse_dehazed = 1.0;
  phase2.lambdas = lambdas;

  OptimState opt;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  opt.momentum = cfg.momentum;

  SampleOrder order(samples.size(), cfg.seed);
  TrainLog log;
  double prev_mse = 0.0;
  int stalled = 0;

  for (int cycle = 0; cycle < cfg.max_cycles; ++cycle) {
    double mse_sum = 0.0;
    for (int phase = 1; phase <= 2; ++phase) {
      const bool p1 = phase == 1;
      const auto& sel = p1 ? phase1 : phase2;
      const auto& mask = p1 ? decoder_mask : full_mask;
      for (int it = 0; it < cfg.iterations_per_phase; ++it) {
        const auto& s = samples[order.next()];
        const Targets t{&s.clean, &s.alf, &s.depth, &s.asc};
        BackwardResult br = backward(model, s.hazy, t, sel, !p1);
        if (!std::isfinite(br.losses.total)) {
          throw Divergence("non-finite loss at cycle " + std::to_string(cycle) + " phase " + std::to_string(phase) +
                           " iteration " + std::to_string(it) + " (sample " + s.stem + ")");
        }
        clip_gradients(br.grads, mask, cfg.clip_norm);
        sgd_step(model.params(), br.grads, opt, mask);

        IterationRecord rec{cycle, phase, it, {}};
        if (p1) {
          rec.losses = {{"beta", br.losses.beta}, {"depth", br.losses.depth}, {"fwb", br.losses.fwb},
                        {"total", br.losses.total}};
        } else {
          rec.losses = {{"mse", br.losses.mse_dehazed}, {"total", br.losses.total}};
          mse_sum += br.losses.mse_dehazed;
        }
        if (hooks.on_iteration) hooks.on_iteration(rec);
        log.records.push_back(std::move(rec));
      }
    }
    log.cycles_completed = cycle + 1;
    if (hooks.on_cycle) hooks.on_cycle(cycle, model);

    const double mse = mse_sum / cfg.iterations_per_phase;
    if (cycle > 0) {
      const double gain = prev_mse > 0.0 ? (prev_mse - mse) / prev_mse : 0.0;
      stalled = gain < cfg.convergence_tol ? stalled + 1 : 0;
      if (stalled >= cfg.patience) {
        log.converged = true;
        break;
      }
    }
    prev_mse = mse;
  }
  return {std::move(model), std::move(log)};
}

TrainResult train(const DatasetManifest& manifest, const TrainConfig& cfg, const TrainHooks& hooks) {
  const auto samples = load_samples(manifest);
  const auto lambdas = LossConfig::from_dataset_means(manifest.mean_depth, manifest.mean_beta);
  return train(ToyModel::create(cfg.net, cfg.seed), samples, lambdas, cfg, hooks);
}

double mean_dehazed_psnr(const ToyModel& model, std::span<const TrainingSample> samples) {
  if (samples.empty()) throw InvalidArgument("mean_dehazed_psnr: no samples");
  double sum = 0.0;
  for (const auto& s : samples) sum += psnr(forward(model, s.hazy).dehazed, s.clean);
  return sum / static_cast<double>(samples.size());
}

double mean_hazy_psnr(std::span<const TrainingSample> samples) {
  if (samples.empty()) throw InvalidArgument("mean_hazy_psnr: no samples");
  double sum = 0.0;
  for (const auto& s : samples) sum += psnr(s.hazy, s.clean);
  return sum / static_cast<double>(samples.size());
}

}  // namespace fnh::nn
