#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fnh/nn/model.hpp"
#include "fnh/synthesis.hpp"

namespace fnh::nn {

struct OptimState {
  std::vector<double> velocity;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double momentum = 0.9;
  std::uint64_t iteration = 0;
};

// v <- mu v + (g + wd theta); theta <- theta - lr v. Entries whose mask byte
// is 0 keep both weight and velocity. An empty velocity is zero-initialised.
void sgd_step(std::span<double> weights, std::span<const double> grads, OptimState& state,
              std::span<const std::uint8_t> mask = {});

struct TrainingSample {
  std::string stem;
  ImagePlane hazy;
  ImagePlane clean;
  ImagePlane alf;
  ScalarField depth;
  ScalarField asc;
};

std::vector<TrainingSample> load_samples(const DatasetManifest& manifest);

struct TrainConfig {
  ToyNetConfig net;
  double lr = 1e-2;
  double weight_decay = 1e-4;
  double momentum = 0.9;
  int iterations_per_phase = 100;
  int max_cycles = 20;
  // Stop once the phase-2 mean MSE improves by less than this fraction for
  // `patience` consecutive cycles.
  double convergence_tol = 1e-3;
  int patience = 2;
  // Phase-1 weights.
  double beta_weight = 1.0;
  double depth_weight = 1.0;
  double fwb_weight = 1e-3;
  // Global L2 gradient clipping; 0 disables.
  double clip_norm = 1.0;
  bool init_head_biases = true;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct IterationRecord {
  int cycle = 0;
  int phase = 0;      // 1 or 2
  int iteration = 0;  // within the phase
  std::vector<std::pair<std::string, double>> losses;
};

struct TrainLog {
  std::vector<IterationRecord> records;  // one per executed iteration
  int cycles_completed = 0;
  bool converged = false;
};

// Rows `cycle,phase,iteration,loss_name,value`.
void write_training_log_csv(const TrainLog& log, const std::filesystem::path& path);

// Heads emit the dataset means of A, d and beta for a featureless input.
void initialize_head_biases(ToyModel& model, std::span<const TrainingSample> samples);

struct TrainHooks {
  std::function<void(const IterationRecord&)> on_iteration;
  std::function<void(int cycle, const ToyModel&)> on_cycle;
};

struct TrainResult {
  ToyModel model;
  TrainLog log;
};

TrainResult train(ToyModel model, std::span<const TrainingSample> samples, const LossConfig& lambdas,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});
TrainResult train(const DatasetManifest& manifest, const TrainConfig& cfg, const TrainHooks& hooks = {});

// Mean PSNR of the network output and of the raw hazy inputs against the
// clean images.
double mean_dehazed_psnr(const ToyModel& model, std::span<const TrainingSample> samples);
double mean_hazy_psnr(std::span<const TrainingSample> samples);

}  // namespace fnh::nn
