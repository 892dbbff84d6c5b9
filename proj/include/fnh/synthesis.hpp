#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fnh/image.hpp"
#include "fnh/io.hpp"
#include "fnh/rng.hpp"
#include "fnh/scatter.hpp"

namespace fnh {

enum class BetaJitterMode {
  // beta(x,y) ~ Uniform[0, base_beta), i.i.d. per pixel.
  kUniformZeroToBase,
};

struct SynthConfig {
  double base_beta = 0.35;
  double alf_low = 0.3;
  double alf_high = 1.5;
  double alf_jitter = 0.2;
  BetaJitterMode beta_jitter_mode = BetaJitterMode::kUniformZeroToBase;
  std::uint64_t seed = 0;
  BitDepth hazy_bit_depth = BitDepth::k16;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

// Draws per-pixel scattering coefficients and atmospheric light for one
// image. Generated values are float32-representable and match the FMAP
// files written later bit for bit.
SceneParams gen_param_maps(const ScalarField& depth, int channels, const SynthConfig& cfg, Rng& rng);

struct ManifestEntry {
  std::string stem;
  // Relative to the manifest's directory.
  std::filesystem::path clean;
  std::filesystem::path hazy;
  std::filesystem::path beta;
  std::filesystem::path depth;
  std::filesystem::path alf;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  SynthConfig config;
  double mean_depth = 0.0;
  double mean_beta = 0.0;
  // Directory the relative entry paths resolve against.
  std::filesystem::path root;

  std::filesystem::path resolve(const std::filesystem::path& rel) const { return root / rel; }
};

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& root);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

inline constexpr const char* kManifestName = "manifest.json";

// Pairs `<stem>.png` clean images with `<stem>.fmap` depth maps in
// `corpus_dir`, synthesises hazy images and ground-truth fields under
// `out_dir`, and writes `out_dir/manifest.json`.
DatasetManifest synth_dataset(const std::filesystem::path& corpus_dir, const SynthConfig& cfg,
                              const std::filesystem::path& out_dir);

// Mean of every pixel across a set of fields, summed per field pairwise and
// then across fields in order.
double dataset_mean(const std::vector<ScalarField>& fields);

/// Average bias and proportion of strictly positive bias of est - gt.
struct BiasReport {
  double average_bias = 0.0;
  double proportion_positive = 0.0;
  std::size_t count = 0;
};

BiasReport bias_stats(const ScalarField& est, const ScalarField& gt);
// {"AB": ..., "PoPB": ..., "count": ...}
nlohmann::json bias_report_json(const BiasReport& r);

struct CorpusOptions {
  int count = 16;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 0;
  double near_depth = 1.0;
  double far_depth_min = 4.0;
  double far_depth_max = 6.0;
};

// Procedural RGB-D scenes (8-bit PNG + FMAP depth in metres) standing in
// for a real RGB-D corpus.
void make_corpus(const std::filesystem::path& dir, const CorpusOptions& opts);

}  // namespace fnh
