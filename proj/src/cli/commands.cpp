#include "fnh/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>

#include <json.hpp>

#include "fnh/error.hpp"
#include "fnh/io.hpp"
#include "fnh/metrics.hpp"
#include "fnh/nn/checkpoint.hpp"
#include "fnh/nn/train.hpp"
#include "fnh/parallel.hpp"
#include "fnh/scatter.hpp"
#include "fnh/synthesis.hpp"
#include "fnh/variational.hpp"

namespace fnh::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options that can also come from the --config file. Explicit flags win.
class Bindings {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key, T& var, const std::string& desc) {
    auto* o = app->add_option(flag, var, desc)->capture_default_str();
    items_.push_back({o, key, [&var](const json& j) { var = j.get<T>(); }, [&var] { return json(var); }});
    return o;
  }

  CLI::Option* flag(CLI::App* app, const std::string& flag, const std::string& key, bool& var, const std::string& desc) {
    auto* o = app->add_flag(flag, var, desc);
    items_.push_back({o, key, [&var](const json& j) { var = j.get<bool>(); }, [&var] { return json(var); }});
    return o;
  }

  void resolve(const json& file, const std::string& section) {
    const json* scoped = nullptr;
    if (file.contains(section) && file.at(section).is_object()) scoped = &file.at(section);
    for (auto& b : items_) {
      if (b.opt->count() > 0) continue;
      try {
        if (scoped != nullptr && scoped->contains(b.key)) {
          b.load(scoped->at(b.key));
        } else if (file.contains(b.key)) {
          b.load(file.at(b.key));
        }
      } catch (const json::exception& e) {
        throw UsageError("config key '" + b.key + "': " + e.what());
      }
    }
  }

  void dump(json& into) const {
    for (const auto& b : items_) into[b.key] = b.dump();
  }

 private:
  struct Item {
    CLI::Option* opt;
    std::string key;
    std::function<void(const json&)> load;
    std::function<json()> dump;
  };
  std::vector<Item> items_;
};

struct Global {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw FormatError("config file " + path + " must hold a JSON object");
  return j;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
}

BitDepth bit_depth_from(int bits) {
  if (bits == 8) return BitDepth::k8;
  if (bits == 16) return BitDepth::k16;
  throw UsageError("bit depth must be 8 or 16, got " + std::to_string(bits));
}

void write_json(const fs::path& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string format_psnr(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// ---------------------------------------------------------------------------

struct CorpusOpts {
  int count = 16;
  int height = 64;
  int width = 64;
};

struct SynthOpts {
  std::string corpus;
  double base_beta = 0.35;
  double alf_low = 0.3;
  double alf_high = 1.5;
  double alf_jitter = 0.2;
  int bit_depth = 16;
};

struct DehazeOpts {
  std::string hazy;
  std::string mode;  // fields | network | variational; inferred when empty
  std::string beta;
  std::string depth;
  std::string alf;
  std::string checkpoint;
  bool emit_params = false;
  int bit_depth = 8;
  double max_exposure = 20.0;
  VariationalConfig var;
};

struct TrainOpts {
  std::string manifest;
  nn::TrainConfig cfg;
  std::string upsample = "nearest_conv";
};

struct EvalOpts {
  std::string ref;
  std::string test;
  std::string ssim_mode = "luminance";
};

struct AnalyzeOpts {
  std::string surface;
  std::vector<std::string> stats;
};

int run_corpus(const Global& g, const CorpusOpts& o, std::ostream& out) {
  CorpusOptions co;
  co.count = o.count;
  co.height = o.height;
  co.width = o.width;
  co.seed = g.seed;
  make_corpus(g.out, co);
  out << "corpus: " << co.count << " scenes in " << g.out << "\n";
  return kExitOk;
}

int run_synth(const Global& g, const SynthOpts& o, std::ostream& out) {
  SynthConfig cfg;
  cfg.base_beta = o.base_beta;
  cfg.alf_low = o.alf_low;
  cfg.alf_high = o.alf_high;
  cfg.alf_jitter = o.alf_jitter;
  cfg.seed = g.seed;
  cfg.hazy_bit_depth = bit_depth_from(o.bit_depth);
  const auto m = synth_dataset(o.corpus, cfg, g.out);
  out << "manifest: " << (fs::path(g.out) / kManifestName).string() << "\n";
  out << "images: " << m.entries.size() << "\n";
  out << "mean_depth: " << format_real(m.mean_depth) << "\n";
  out << "mean_beta: " << format_real(m.mean_beta) << "\n";
  return kExitOk;
}

ImagePlane broadcast_alf(const ImagePlane& alf, int channels) {
  if (alf.channels() == channels) return alf;
  if (alf.channels() != 1) throw DimensionMismatch("atmospheric light map has " + std::to_string(alf.channels()) +
                                                   " channels, image has " + std::to_string(channels));
  ImagePlane out(alf.height(), alf.width(), channels);
  for (std::size_t p = 0; p < alf.pixels(); ++p) {
    for (int c = 0; c < channels; ++c) out[p * channels + c] = alf[p];
  }
  return out;
}

int run_dehaze(const Global& g, DehazeOpts o, std::ostream& out) {
  if (o.mode.empty()) {
    if (!o.checkpoint.empty()) {
      o.mode = "network";
    } else if (!o.beta.empty() || !o.depth.empty() || !o.alf.empty()) {
      o.mode = "fields";
    } else {
      throw UsageError("dehaze needs an estimation source: --beta/--depth/--alf, --checkpoint or --mode variational");
    }
  }
  const ImagePlane hazy = load_image(o.hazy);
  SceneParams params;
  ImagePlane dehazed;
  json report{{"mode", o.mode}, {"hazy", o.hazy}};

  if (o.mode == "fields") {
    if (o.beta.empty() || o.depth.empty() || o.alf.empty()) {
      throw UsageError("field mode needs --beta, --depth and --alf");
    }
    params = SceneParams{broadcast_alf(read_plane(o.alf), hazy.channels()), read_field(o.beta), read_field(o.depth)};
    DehazeOptions dopts;
    dopts.max_exposure = o.max_exposure;
    dehazed = dehaze(hazy, params, dopts).clamped;
  } else if (o.mode == "network") {
    require(o.checkpoint, "--checkpoint");
    const auto model = nn::load_checkpoint(o.checkpoint);
    auto pred = nn::forward(model, hazy);
    params = SceneParams{std::move(pred.alf), std::move(pred.asc), std::move(pred.depth)};
    dehazed = std::move(pred.dehazed);
  } else if (o.mode == "variational") {
    auto res = variational_estimate(hazy, o.var);
    params = std::move(res.params);
    dehazed = std::move(res.dehazed);
    report["residual"] = res.residual;
    report["objective"] = res.objective;
    report["iterations"] = res.iterations;
    out << "residual: " << format_real(res.residual) << "\n";
  } else {
    throw UsageError("unknown dehaze mode '" + o.mode + "'");
  }

  const fs::path dst = fs::path(g.out) / "dehazed.png";
  save_image(dehazed, dst, bit_depth_from(o.bit_depth));
  out << "dehazed: " << dst.string() << "\n";
  if (o.emit_params) {
    write_field(params.asc, fs::path(g.out) / "asc.fmap");
    write_field(params.depth, fs::path(g.out) / "depth.fmap");
    write_plane(params.alf, fs::path(g.out) / "alf.fmap");
    out << "params: asc.fmap depth.fmap alf.fmap\n";
  }
  write_json(fs::path(g.out) / "dehaze_report.json", report);
  return kExitOk;
}

int run_train(const Global& g, TrainOpts o, std::ostream& out) {
  require(o.manifest, "--manifest");
  nn::ToyNetConfig probe;
  nn::from_json(json{{"upsample", o.upsample}}, probe);
  o.cfg.net.upsample = probe.upsample;
  o.cfg.seed = g.seed;
  o.cfg.validate();

  const auto manifest = load_manifest(o.manifest);
  const auto samples = nn::load_samples(manifest);
  const auto lambdas = LossConfig::from_dataset_means(manifest.mean_depth, manifest.mean_beta);
  const double hazy_psnr = nn::mean_hazy_psnr(samples);
  out << "samples: " << samples.size() << "  lambda1: " << format_real(lambdas.lambda1)
      << "  lambda2: " << format_real(lambdas.lambda2) << "  hazy psnr: " << format_psnr(hazy_psnr) << "\n";

  nn::TrainHooks hooks;
  hooks.on_cycle = [&](int cycle, const nn::ToyModel& m) {
    out << "cycle " << cycle << "  dehazed psnr: " << format_psnr(nn::mean_dehazed_psnr(m, samples)) << "\n";
    out.flush();
  };
  auto result = nn::train(nn::ToyModel::create(o.cfg.net, o.cfg.seed), samples, lambdas, o.cfg, hooks);

  const fs::path ckpt = fs::path(g.out) / "model.fnhd";
  nn::save_checkpoint(result.model, ckpt);
  nn::write_training_log_csv(result.log, fs::path(g.out) / "train_log.csv");
  const double final_psnr = nn::mean_dehazed_psnr(result.model, samples);
  write_json(fs::path(g.out) / "train_summary.json",
             json{{"cycles_completed", result.log.cycles_completed},
                  {"converged", result.log.converged},
                  {"iterations", result.log.records.size()},
                  {"hazy_psnr", hazy_psnr},
                  {"dehazed_psnr", final_psnr},
                  {"lambda1", lambdas.lambda1},
                  {"lambda2", lambdas.lambda2}});
  out << "checkpoint: " << ckpt.string() << "\n";
  return kExitOk;
}

int run_eval(const Global& g, const EvalOpts& o, std::ostream& out) {
  require(o.ref, "--ref");
  require(o.test, "--test");
  SsimOptions sopts;
  if (o.ssim_mode == "luminance") {
    sopts.mode = SsimMode::kLuminance;
  } else if (o.ssim_mode == "per_channel") {
    sopts.mode = SsimMode::kPerChannel;
  } else {
    throw UsageError("--ssim-mode must be luminance or per_channel");
  }
  if (!fs::is_directory(o.ref)) throw IoError("reference directory not found: " + o.ref);
  if (!fs::is_directory(o.test)) throw IoError("test directory not found: " + o.test);
  std::map<std::string, fs::path> refs;
  for (const auto& e : fs::directory_iterator(o.ref)) {
    if (e.is_regular_file() && e.path().extension() == ".png") refs[e.path().filename().string()] = e.path();
  }
  if (refs.empty()) throw InvalidArgument("no PNG images in " + o.ref);

  std::string csv = "image,psnr_db,ssim\n";
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  for (const auto& [name, ref_path] : refs) {
    const fs::path test_path = fs::path(o.test) / name;
    if (!fs::exists(test_path)) throw IoError("missing test image " + test_path.string());
    const auto m = evaluate(load_image(test_path), load_image(ref_path), sopts);
    csv += name + "," + format_psnr(m.psnr_db) + "," + format_real(m.ssim) + "\n";
    psnr_sum += m.psnr_db;
    ssim_sum += m.ssim;
  }
  const double n = static_cast<double>(refs.size());
  csv += "mean," + format_psnr(psnr_sum / n) + "," + format_real(ssim_sum / n) + "\n";
  const fs::path dst = fs::path(g.out) / "eval.csv";
  write_file_bytes(dst, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  out << "images: " << refs.size() << "  mean psnr: " << format_psnr(psnr_sum / n)
      << "  mean ssim: " << format_real(ssim_sum / n) << "\n";
  out << "report: " << dst.string() << "\n";
  return kExitOk;
}

int run_analyze(const Global& g, const AnalyzeOpts& o, std::ostream& out) {
  if (o.surface.empty() && o.stats.empty()) throw UsageError("analyze needs --surface and/or --stats");
  if (!o.surface.empty()) {
    const auto kind = parse_surface_kind(o.surface);
    const auto rows = bias_surface(default_surface_grid(kind));
    const fs::path dst = fs::path(g.out) / ("surface_" + o.surface + ".csv");
    std::ofstream f(dst);
    if (!f) throw IoError("cannot open " + dst.string() + " for writing");
    write_surface_csv(f, rows);
    f.close();
    if (!f) throw IoError("failed writing " + dst.string());
    out << "surface: " << dst.string() << " (" << rows.size() << " rows)\n";
  }
  if (!o.stats.empty()) {
    if (o.stats.size() != 2) throw UsageError("--stats takes EST GT");
    const auto report = bias_stats(read_field(o.stats[0]), read_field(o.stats[1]));
    const json j = bias_report_json(report);
    write_json(fs::path(g.out) / "bias_report.json", j);
    out << j.dump() << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fnh: fully non-homogeneous haze synthesis, estimation and analysis"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", "fnh 0.1");

  Global g;
  Bindings gb;
  app.add_option("--config", g.config, "JSON file supplying option values; flags override it");
  gb.add(&app, "--seed", "seed", g.seed, "Random seed");
  gb.add(&app, "--out", "out", g.out, "Output directory");

  struct Sub {
    CLI::App* app;
    Bindings b;
    std::function<int(std::ostream&)> run;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  auto make = [&](const char* name, const char* desc) {
    subs.push_back(std::make_unique<Sub>());
    subs.back()->app = app.add_subcommand(name, desc);
    return subs.back().get();
  };

  CorpusOpts co;
  {
    auto* s = make("corpus", "Generate a procedural RGB-D corpus");
    s->b.add(s->app, "--count", "count", co.count, "Number of scenes");
    s->b.add(s->app, "--height", "height", co.height, "Image height");
    s->b.add(s->app, "--width", "width", co.width, "Image width");
    s->run = [&](std::ostream& o) { return run_corpus(g, co, o); };
  }
  SynthOpts so;
  {
    auto* s = make("synth", "Synthesise a hazy dataset from an RGB-D corpus");
    s->b.add(s->app, "--corpus", "corpus", so.corpus, "Directory of <stem>.png + <stem>.fmap pairs");
    s->b.add(s->app, "--base-beta", "base_beta", so.base_beta, "Scattering coefficients are drawn from [0, base)");
    s->b.add(s->app, "--alf-low", "alf_low", so.alf_low, "Lower bound of the per-image airlight base");
    s->b.add(s->app, "--alf-high", "alf_high", so.alf_high, "Upper bound of the per-image airlight base");
    s->b.add(s->app, "--alf-jitter", "alf_jitter", so.alf_jitter, "Relative per-pixel airlight jitter");
    s->b.add(s->app, "--bit-depth", "bit_depth", so.bit_depth, "Hazy PNG bit depth (8 or 16)");
    s->run = [&](std::ostream& o) {
      require(so.corpus, "--corpus");
      return run_synth(g, so, o);
    };
  }
  DehazeOpts dh;
  {
    auto* s = make("dehaze", "Recover a clean image from a hazy one");
    s->b.add(s->app, "--hazy", "hazy", dh.hazy, "Hazy PNG");
    s->b.add(s->app, "--mode", "mode", dh.mode, "fields, network or variational")
        ->check(CLI::IsMember({"", "fields", "network", "variational"}));
    s->b.add(s->app, "--beta", "beta", dh.beta, "Scattering coefficient FMAP");
    s->b.add(s->app, "--depth", "depth", dh.depth, "Depth FMAP");
    s->b.add(s->app, "--alf", "alf", dh.alf, "Atmospheric light FMAP (1 or 3 channels)");
    s->b.add(s->app, "--checkpoint", "checkpoint", dh.checkpoint, "Trained model");
    s->b.flag(s->app, "--emit-params", "emit_params", dh.emit_params, "Also write the parameter maps used");
    s->b.add(s->app, "--bit-depth", "bit_depth", dh.bit_depth, "Output PNG bit depth (8 or 16)");
    s->b.add(s->app, "--max-exposure", "max_exposure", dh.max_exposure, "Largest beta*d accepted in field mode");
    s->b.add(s->app, "--var-iterations", "var_iterations", dh.var.max_iterations, "Variational iterations");
    s->b.add(s->app, "--var-smooth-weight", "var_smooth_weight", dh.var.smooth_weight, "Variational smoothness");
    s->b.add(s->app, "--var-dark-weight", "var_dark_weight", dh.var.dark_weight, "Variational dark-channel weight");
    s->run = [&](std::ostream& o) {
      require(dh.hazy, "--hazy");
      return run_dehaze(g, dh, o);
    };
  }
  TrainOpts to;
  {
    auto* s = make("train", "Train the toy estimator on a synthesised dataset");
    auto& c = to.cfg;
    s->b.add(s->app, "--manifest", "manifest", to.manifest, "Dataset manifest.json");
    s->b.add(s->app, "--cycles", "cycles", c.max_cycles, "Maximum training cycles");
    s->b.add(s->app, "--iterations", "iterations", c.iterations_per_phase, "Iterations per phase");
    s->b.add(s->app, "--lr", "lr", c.lr, "Learning rate");
    s->b.add(s->app, "--momentum", "momentum", c.momentum, "Momentum");
    s->b.add(s->app, "--weight-decay", "weight_decay", c.weight_decay, "Weight decay");
    s->b.add(s->app, "--clip-norm", "clip_norm", c.clip_norm, "Global gradient norm cap (0 = off)");
    s->b.add(s->app, "--fwb-weight", "fwb_weight", c.fwb_weight, "Weight of the airlight colour loss");
    s->b.add(s->app, "--beta-weight", "beta_weight", c.beta_weight, "Weight of the scattering loss");
    s->b.add(s->app, "--depth-weight", "depth_weight", c.depth_weight, "Weight of the depth loss");
    s->b.add(s->app, "--levels", "levels", c.net.levels, "Encoder/decoder levels");
    s->b.add(s->app, "--base-channels", "base_channels", c.net.base_channels, "Channels at the first level");
    s->b.add(s->app, "--upsample", "upsample", to.upsample, "nearest_conv or transposed")
        ->check(CLI::IsMember({"nearest_conv", "transposed"}));
    s->run = [&](std::ostream& o) { return run_train(g, to, o); };
  }
  EvalOpts eo;
  {
    auto* s = make("eval", "PSNR / SSIM of paired images");
    s->b.add(s->app, "--ref", "ref", eo.ref, "Reference image directory");
    s->b.add(s->app, "--test", "test", eo.test, "Directory of images to score (same file names)");
    s->b.add(s->app, "--ssim-mode", "ssim_mode", eo.ssim_mode, "luminance or per_channel")
        ->check(CLI::IsMember({"luminance", "per_channel"}));
    s->run = [&](std::ostream& o) { return run_eval(g, eo, o); };
  }
  AnalyzeOpts ao;
  {
    auto* s = make("analyze", "Bias surfaces and bias statistics");
    s->b.add(s->app, "--surface", "surface", ao.surface, "alf, asc or depth")
        ->check(CLI::IsMember({"", "alf", "asc", "depth"}));
    s->b.add(s->app, "--stats", "stats", ao.stats, "EST.fmap GT.fmap")->expected(2);
    s->run = [&](std::ostream& o) { return run_analyze(g, ao, o); };
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Sub* active = nullptr;
  for (auto& s : subs) {
    if (s->app->parsed()) active = s.get();
  }
  if (active == nullptr) {
    err << "no subcommand given\n";
    return kExitUsage;
  }

  try {
    configure_threads_from_env();
    const json file = load_config_file(g.config);
    const std::string name = active->app->get_name();
    gb.resolve(file, name);
    active->b.resolve(file, name);

    json resolved{{"command", name}};
    json options = json::object();
    gb.dump(options);
    active->b.dump(options);
    resolved["options"] = options;
    fs::create_directories(g.out);
    write_json(fs::path(g.out) / kResolvedConfigName, resolved);

    return active->run(out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

namespace {
int with_command(const char* name, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> all{name};
  all.insert(all.end(), args.begin(), args.end());
  return run_cli(all, out, err);
}
}  // namespace

int cmd_corpus(const std::vector<std::string>& a, std::ostream& o, std::ostream& e) { return with_command("corpus", a, o, e); }
int cmd_synth(const std::vector<std::string>& a, std::ostream& o, std::ostream& e) { return with_command("synth", a, o, e); }
int cmd_dehaze(const std::vector<std::string>& a, std::ostream& o, std::ostream& e) { return with_command("dehaze", a, o, e); }
int cmd_train(const std::vector<std::string>& a, std::ostream& o, std::ostream& e) { return with_command("train", a, o, e); }
int cmd_eval(const std::vector<std::string>& a, std::ostream& o, std::ostream& e) { return with_command("eval", a, o, e); }
int cmd_analyze(const std::vector<std::string>& a, std::ostream& o, std::ostream& e) { return with_command("analyze", a, o, e); }

}  // namespace fnh::cli
