#include "fnh/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>

#include "fnh/error.hpp"
#include "fnh/kernels.hpp"

namespace fnh {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
  if (!(base_beta > 0.0) || !std::isfinite(base_beta)) throw InvalidArgument("base_beta must be > 0");
  if (!(alf_low > 0.0) || !(alf_low <= alf_high) || !std::isfinite(alf_high)) {
    throw InvalidArgument("alf range must satisfy 0 < low <= high");
  }
  if (!(alf_jitter >= 0.0) || !(alf_jitter < 1.0)) throw InvalidArgument("alf_jitter must lie in [0, 1)");
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json{{"base_beta", c.base_beta},
                     {"alf_base_range", {c.alf_low, c.alf_high}},
                     {"alf_jitter", c.alf_jitter},
                     {"beta_jitter_mode", "uniform_zero_to_base"},
                     {"seed", c.seed},
                     {"hazy_bit_depth", static_cast<int>(c.hazy_bit_depth)}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  c.base_beta = j.value("base_beta", c.base_beta);
  if (j.contains("alf_base_range")) {
    c.alf_low = j.at("alf_base_range").at(0).get<double>();
    c.alf_high = j.at("alf_base_range").at(1).get<double>();
  }
  c.alf_jitter = j.value("alf_jitter", c.alf_jitter);
  const auto mode = j.value("beta_jitter_mode", std::string("uniform_zero_to_base"));
  if (mode != "uniform_zero_to_base") throw InvalidArgument("unknown beta_jitter_mode '" + mode + "'");
  c.seed = j.value("seed", c.seed);
  const int bits = j.value("hazy_bit_depth", static_cast<int>(c.hazy_bit_depth));
  if (bits != 8 && bits != 16) throw InvalidArgument("hazy_bit_depth must be 8 or 16");
  c.hazy_bit_depth = bits == 8 ? BitDepth::k8 : BitDepth::k16;
}

SceneParams gen_param_maps(const ScalarField& depth, int channels, const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  for (double d : depth.data()) {
    if (!(d > 0.0)) throw InvalidArgument("gen_param_maps: depth must be > 0 everywhere");
  }
  const int H = depth.height();
  const int W = depth.width();
  SceneParams p{ImagePlane(H, W, channels), ScalarField(H, W), depth};

  const double alf_base = uniform(rng, cfg.alf_low, cfg.alf_high);
  for (double& b : p.asc.data()) {
    // Rounding to float can only move a value toward base_beta; keep the
    // half-open range.
    float v = static_cast<float>(uniform(rng, 0.0, cfg.base_beta));
    if (static_cast<double>(v) >= cfg.base_beta) v = std::nextafter(static_cast<float>(cfg.base_beta), 0.0f);
    if (static_cast<double>(v) >= cfg.base_beta) v = std::nextafter(v, 0.0f);
    b = v;
  }
  for (double& a : p.alf.data()) {
    const double jitter = cfg.alf_jitter > 0.0 ? uniform(rng, -cfg.alf_jitter, cfg.alf_jitter) : 0.0;
    a = static_cast<float>(std::clamp(alf_base * (1.0 + jitter), 0.0, 1.0));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Manifest

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"stem", e.stem},
                       {"clean", e.clean.generic_string()},
                       {"hazy", e.hazy.generic_string()},
                       {"beta", e.beta.generic_string()},
                       {"depth", e.depth.generic_string()},
                       {"alf", e.alf.generic_string()}});
  }
  return {{"config", m.config}, {"mean_depth", m.mean_depth}, {"mean_beta", m.mean_beta}, {"entries", entries}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j, const fs::path& root) {
  DatasetManifest m;
  m.root = root;
  m.config = j.at("config").get<SynthConfig>();
  m.mean_depth = j.at("mean_depth").get<double>();
  m.mean_beta = j.at("mean_beta").get<double>();
  for (const auto& e : j.at("entries")) {
    m.entries.push_back({e.at("stem").get<std::string>(), e.at("clean").get<std::string>(),
                         e.at("hazy").get<std::string>(), e.at("beta").get<std::string>(),
                         e.at("depth").get<std::string>(), e.at("alf").get<std::string>()});
  }
  return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest_to_json(m).dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    return manifest_from_json(j, path.parent_path());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

double dataset_mean(const std::vector<ScalarField>& fields) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& f : fields) {
    total += kernels::pairwise_sum(f.data());
    count += f.size();
  }
  if (count == 0) return 0.0;
  return total / static_cast<double>(count);
}

namespace {

struct CorpusPair {
  std::string stem;
  fs::path image;
  fs::path depth;
};

std::vector<CorpusPair> scan_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
  std::map<std::string, fs::path> images;
  std::map<std::string, fs::path> depths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    const auto stem = entry.path().stem().string();
    if (ext == ".png") images[stem] = entry.path();
    if (ext == ".fmap") depths[stem] = entry.path();
  }
  std::vector<CorpusPair> pairs;
  for (const auto& [stem, img] : images) {
    auto it = depths.find(stem);
    if (it == depths.end()) throw InvalidArgument("corpus: image '" + stem + "' has no matching depth map");
    pairs.push_back({stem, img, it->second});
  }
  for (const auto& [stem, d] : depths) {
    if (!images.contains(stem)) throw InvalidArgument("corpus: depth map '" + stem + "' has no matching image");
  }
  return pairs;
}

}  // namespace

DatasetManifest synth_dataset(const fs::path& corpus_dir, const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const auto pairs = scan_corpus(corpus_dir);
  for (const char* sub : {"clean", "hazy", "beta", "depth", "alf"}) fs::create_directories(out_dir / sub);

  DatasetManifest manifest;
  manifest.config = cfg;
  manifest.root = out_dir;
  manifest.entries.resize(pairs.size());
  std::vector<ScalarField> betas(pairs.size());
  std::vector<ScalarField> depths(pairs.size());
  std::vector<std::exception_ptr> errors(pairs.size());

  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& pair = pairs[i];
    try {
      const ImagePlane clean = load_image(pair.image);
      const ScalarField depth = read_field(pair.depth);
      if (!depth.same_spatial(clean)) {
        throw DimensionMismatch("corpus '" + pair.stem + "': image and depth dimensions differ");
      }
      Rng rng = substream(cfg.seed, static_cast<std::uint64_t>(i));
      const SceneParams params = gen_param_maps(depth, clean.channels(), cfg, rng);
      const ImagePlane hazy = clamp_unit(synthesize(clean, params));

      ManifestEntry e{pair.stem,
                      fs::path("clean") / (pair.stem + ".png"),
                      fs::path("hazy") / (pair.stem + ".png"),
                      fs::path("beta") / (pair.stem + ".fmap"),
                      fs::path("depth") / (pair.stem + ".fmap"),
                      fs::path("alf") / (pair.stem + ".fmap")};
      fs::copy_file(pair.image, out_dir / e.clean, fs::copy_options::overwrite_existing);
      save_image(hazy, out_dir / e.hazy, cfg.hazy_bit_depth);
      write_field(params.asc, out_dir / e.beta);
      write_field(params.depth, out_dir / e.depth);
      write_plane(params.alf, out_dir / e.alf);

      manifest.entries[i] = std::move(e);
      betas[i] = params.asc;
      depths[i] = params.depth;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  manifest.mean_beta = dataset_mean(betas);
  manifest.mean_depth = dataset_mean(depths);
  write_manifest(manifest, out_dir / kManifestName);
  return manifest;
}

BiasReport bias_stats(const ScalarField& est, const ScalarField& gt) {
  require_same_shape(est, gt, "bias_stats");
  if (est.empty()) throw InvalidArgument("bias_stats: empty field");
  std::vector<double> diff(est.size());
  std::size_t positive = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    diff[i] = est[i] - gt[i];
    if (diff[i] > 0.0) ++positive;
  }
  BiasReport r;
  r.count = est.size();
  r.average_bias = kernels::pairwise_sum(diff) / static_cast<double>(r.count);
  r.proportion_positive = static_cast<double>(positive) / static_cast<double>(r.count);
  return r;
}

nlohmann::json bias_report_json(const BiasReport& r) {
  return {{"AB", r.average_bias}, {"PoPB", r.proportion_positive}, {"count", r.count}};
}

// ---------------------------------------------------------------------------
// Procedural RGB-D corpus

namespace {

struct Rect {
  int y0, x0, y1, x1;
};

Rect random_rect(Rng& rng, int H, int W) {
  const int h = std::max(2, static_cast<int>(uniform(rng, 0.15, 0.45) * H));
  const int w = std::max(2, static_cast<int>(uniform(rng, 0.15, 0.45) * W));
  const int y0 = static_cast<int>(uniform01(rng) * (H - h));
  const int x0 = static_cast<int>(uniform01(rng) * (W - w));
  return {y0, x0, y0 + h, x0 + w};
}

}  // namespace

void make_corpus(const fs::path& dir, const CorpusOptions& opts) {
  if (opts.count < 0 || opts.height < 4 || opts.width < 4) throw InvalidArgument("make_corpus: bad options");
  if (!(opts.near_depth > 0.0) || !(opts.far_depth_min >= opts.near_depth) ||
      !(opts.far_depth_max >= opts.far_depth_min)) {
    throw InvalidArgument("make_corpus: depth range must satisfy 0 < near <= far_min <= far_max");
  }
  fs::create_directories(dir);
  const int H = opts.height;
  const int W = opts.width;
  for (int k = 0; k < opts.count; ++k) {
    Rng rng = substream(opts.seed, static_cast<std::uint64_t>(k));
    ImagePlane img(H, W, 3);
    ScalarField depth(H, W);

    const double far = uniform(rng, opts.far_depth_min, opts.far_depth_max);
    const int horizon = static_cast<int>(uniform(rng, 0.3, 0.6) * H);
    double wall[3];
    double floor[3];
    for (int c = 0; c < 3; ++c) {
      wall[c] = uniform(rng, 0.2, 0.95);
      floor[c] = uniform(rng, 0.05, 0.7);
    }
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (y < horizon) {
          depth.at(y, x) = far;
          const double shade = 0.85 + 0.15 * static_cast<double>(y) / horizon;
          for (int c = 0; c < 3; ++c) img.at(y, x, c) = wall[c] * shade;
        } else {
          const double s = static_cast<double>(H - 1 - y) / std::max(1, H - 1 - horizon);
          depth.at(y, x) = opts.near_depth + (far - opts.near_depth) * s;
          for (int c = 0; c < 3; ++c) img.at(y, x, c) = floor[c] * (0.7 + 0.3 * (1.0 - s));
        }
      }
    }

    const int objects = 2 + static_cast<int>(uniform01(rng) * 3);
    for (int o = 0; o < objects; ++o) {
      const Rect r = random_rect(rng, H, W);
      const double d = uniform(rng, opts.near_depth, 0.5 * (opts.near_depth + far));
      double col[3];
      for (double& c : col) c = uniform01(rng);
      const bool striped = uniform01(rng) < 0.4;
      for (int y = r.y0; y < r.y1; ++y) {
        for (int x = r.x0; x < r.x1; ++x) {
          depth.at(y, x) = d;
          const double mod = striped && ((x / 3) % 2 == 0) ? 0.6 : 1.0;
          for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[c] * mod;
        }
      }
    }

    for (double& v : img.data()) v = std::clamp(v + 0.01 * normal01(rng), 0.0, 1.0);

    char stem[32];
    std::snprintf(stem, sizeof stem, "scene_%03d", k);
    save_image(img, dir / (std::string(stem) + ".png"), BitDepth::k8);
    write_field(depth, dir / (std::string(stem) + ".fmap"));
  }
}

}  // namespace fnh
