#include "pcle/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <optional>
#include <sstream>

#include "pcle/ablation.hpp"
#include "pcle/checkpoint.hpp"
#include "pcle/config.hpp"
#include "pcle/dataset.hpp"
#include "pcle/error.hpp"
#include "pcle/iqa.hpp"
#include "pcle/png_io.hpp"
#include "pcle/rng.hpp"
#include "pcle/simd/gemm.hpp"
#include "pcle/zssr.hpp"

namespace pcle::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct CommonOptions {
  std::string preset = "paper";
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> backend;
  std::vector<std::string> argv;  // full command line, recorded in manifests

  void attach(CLI::App* app) {
    app->add_option("--preset", preset, "parameter preset")->check(CLI::IsMember({"paper", "desk"}));
    app->add_option("--config", config_file, "flat key = value config file");
    app->add_option("--set", sets, "override one config key (key=value), repeatable");
    app->add_option("--seed", seed, "master seed");
    app->add_option("--threads", threads, "worker threads");
    app->add_option("--backend", backend, "GEMM backend: auto, scalar or avx2");
  }

  RunConfig resolve() const {
    RunConfig c = RunConfig::from_preset(preset);
    if (!config_file.empty()) {
      KeyValues kv = load_key_values(config_file);
      kv.erase("preset");
      c.apply(kv);
    }
    for (const std::string& s : sets) {
      const std::size_t eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      c.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    if (backend) c.backend = *backend;
    return c;
  }
};

void apply_backend(const RunConfig& c) {
  if (c.backend != "auto") simd::set_backend(simd::parse_backend(c.backend));
}

// Collects log lines for the console and the run directory.
class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err) {}
  void operator()(const std::string& line) {
    err_ << line << '\n';
    if (file_) *file_ << line << '\n' << std::flush;
  }
  void open(const fs::path& p) { file_.emplace(p); }

 private:
  std::ostream& err_;
  std::optional<std::ofstream> file_;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
}

void prepare_run_dir(const fs::path& dir, const RunConfig& cfg, Logger& log) {
  fs::create_directories(dir);
  write_text(dir / "config.txt", format_key_values(cfg.to_key_values()));
  log.open(dir / "log.txt");
}

void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& args,
                    const RunConfig& cfg, const json& outputs) {
  json j;
  j["command"] = command;
  j["args"] = args;
  j["seed"] = cfg.seed;
  j["preset"] = cfg.preset;
  j["backend"] = std::string(simd::backend_name(simd::active_backend()));
  j["config"] = (dir / "config.txt").string();
  j["outputs"] = outputs;
  write_text(dir / "manifest.json", j.dump(2) + "\n");
}

std::vector<fs::path> png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Frames of a directory: a video directory (lr/ plus mask) or plain PNGs with an optional mask.
struct FrameSet {
  std::vector<std::string> names;
  std::vector<CartesianImage> images;
  std::optional<FibrePattern> pattern;
};

FrameSet load_frames(const fs::path& dir, const std::string& mask_path, bool want_hr = false) {
  FrameSet s;
  if (is_video_dir(dir)) {
    SyntheticVideo v = load_video(dir);
    if (want_hr && v.hr.empty()) throw IoError("video has no hr/ frames: " + dir.string());
    s.images = want_hr ? std::move(v.hr) : std::move(v.lr);
    for (std::size_t i = 0; i < s.images.size(); ++i) s.names.push_back(frame_file_name(i));
    s.pattern = std::move(v.pattern);
  } else {
    for (const fs::path& p : png_files(dir)) {
      s.names.push_back(p.filename().string());
      s.images.push_back(read_png(p));
    }
  }
  if (!mask_path.empty())
    for (CartesianImage& img : s.images) read_mask_png(mask_path, img);
  return s;
}

std::vector<fs::path> video_dirs(const fs::path& root) {
  if (is_video_dir(root)) return {root};
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && is_video_dir(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

struct PatternCmd {
  CommonOptions common;
  int size = 512;
  std::string spacing = "auto7";
  double jitter = 0.2;
  std::string out;

  void attach(CLI::App* app) {
    common.attach(app);
    app->add_option("--size", size, "square grid side");
    app->add_option("--spacing", spacing, "lattice spacing in pixels, or autoN for N pixels per fibre");
    app->add_option("--jitter", jitter, "jitter as a fraction of the spacing");
    app->add_option("--out", out, "output pattern file (JSON)")->required();
  }

  int run(std::ostream& os, Logger&) {
    const RunConfig cfg = common.resolve();
    double s = 0.0;
    if (spacing.rfind("auto", 0) == 0) {
      const std::string n = spacing.substr(4);
      double ppf = 0.0;
      try {
        ppf = std::stod(n);
      } catch (const std::exception&) {
        throw ConfigError("bad --spacing '" + spacing + "'");
      }
      if (!(ppf > 0.0)) throw ConfigError("--spacing auto needs a positive density");
      s = hex_spacing_for_density(ppf);
    } else {
      try {
        s = std::stod(spacing);
      } catch (const std::exception&) {
        throw ConfigError("bad --spacing '" + spacing + "'");
      }
    }
    if (!(s > 0.0)) throw ConfigError("--spacing must be positive");
    const FibrePattern p = generate_quasi_hex_pattern(size, size, s, jitter, cfg.seed);
    save_pattern(out, p);
    const double area = std::numbers::pi * p.fov_radius * p.fov_radius;
    os << "fibres " << p.size() << "\n";
    os << "mean pixels per fibre " << area / static_cast<double>(p.size()) << "\n";
    return kExitOk;
  }
};

struct TexturesCmd {
  CommonOptions common;
  std::string out;
  int count = 5;
  int size = 256;

  void attach(CLI::App* app) {
    common.attach(app);
    app->add_option("--out", out, "output directory")->required();
    app->add_option("--count", count, "number of textures")->check(CLI::PositiveNumber);
    app->add_option("--size", size, "texture side")->check(CLI::PositiveNumber);
  }

  int run(std::ostream& os, Logger&) {
    const RunConfig cfg = common.resolve();
    fs::create_directories(out);
    for (int i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "texture_%03d.png", i);
      write_png(fs::path(out) / name, procedural_texture(size, size, derive_seed(cfg.seed, {0x7e47u, std::uint64_t(i)})));
    }
    os << "wrote " << count << " textures to " << out << "\n";
    return kExitOk;
  }
};

struct SimulateCmd {
  CommonOptions common;
  std::string input, out, noise = "synthetic";
  std::optional<int> frames, size;
  std::optional<double> ppf;

  void attach(CLI::App* app) {
    common.attach(app);
    app->add_option("--input", input, "directory of grayscale source images")->required();
    app->add_option("--out", out, "dataset directory")->required();
    app->add_option("--frames", frames, "frames per source (1: a still frame; more: panned video)");
    app->add_option("--size", size, "frame side");
    app->add_option("--noise", noise, "off, synthetic or original")->check(CLI::IsMember({"off", "synthetic", "original"}));
    app->add_option("--pixels-per-fibre", ppf, "fibre density");
  }

  int run(std::ostream& os, Logger& log) {
    RunConfig cfg = common.resolve();
    cfg.video.frames = frames.value_or(1);
    if (size) cfg.video.size = *size;
    if (ppf) cfg.video.pixels_per_fibre = *ppf;
    cfg.video.noise = NoiseParams::preset(noise);
    cfg.validate();
    if (!fs::is_directory(input)) throw IoError("input directory not found: " + input);
    const auto files = png_files(input);
    if (files.empty()) throw IoError("no PNG images in " + input);
    prepare_run_dir(out, cfg, log);

    json videos = json::array();
    for (std::size_t i = 0; i < files.size(); ++i) {
      const std::string stem = files[i].stem().string();
      const std::uint64_t seed = derive_seed(cfg.seed, {std::uint64_t(i)});
      try {
        const CartesianImage src = read_png(files[i]);
        const SyntheticVideo v = make_synthetic_video(src, cfg.video, seed, stem);
        save_video(fs::path(out) / stem, v);
        videos.push_back({{"name", stem}, {"source", files[i].string()}, {"seed", seed},
                          {"frames", v.lr.size()}, {"noise_seeds", v.noise_seeds}});
      } catch (const std::exception& e) {
        log("warning: skipping " + files[i].string() + ": " + e.what());
      }
    }
    json outputs;
    outputs["videos"] = videos;
    outputs["noise"] = noise;
    write_manifest(out, "simulate", common.argv, cfg, outputs);
    os << "simulated " << videos.size() << " of " << files.size() << " sources into " << out << "\n";
    return videos.empty() ? kExitUsage : kExitOk;
  }
};

struct TrainCmd {
  CommonOptions common;
  std::string mode = "zssr", data, out, frame, pattern, mask;
  bool multi_frame = false;
  std::optional<int> epochs;

  void attach(CLI::App* app) {
    common.attach(app);
    app->add_option("--mode", mode, "zssr or sisr")->check(CLI::IsMember({"zssr", "sisr"}));
    app->add_option("--data", data, "video directory (zssr) or dataset root (sisr)");
    app->add_option("--frame", frame, "single input frame (zssr, with --pattern)");
    app->add_option("--pattern", pattern, "fibre pattern of --frame");
    app->add_option("--mask", mask, "field-of-view mask of --frame");
    app->add_flag("--multi-frame", multi_frame, "train on the leading frames_fraction of the video");
    app->add_option("--epochs", epochs, "override train.epochs");
    app->add_option("--out", out, "run directory")->required();
  }

  int run(std::ostream& os, Logger& log) {
    RunConfig cfg = common.resolve();
    if (epochs) {
      cfg.train.epochs = *epochs;
      if (*epochs > 0 && *epochs % cfg.train.eval_every != 0) cfg.train.eval_every = *epochs;
      if (*epochs == 0) cfg.train.eval_every = 1;
    }
    cfg.validate();
    apply_backend(cfg);
    const TrainConfig tc = cfg.resolved_train();

    std::vector<InputFrame> frames;
    std::vector<TrainingPair> pairs;
    if (mode == "zssr") {
      if (!data.empty()) {
        const SyntheticVideo v = load_video(data);
        const std::size_t used =
            multi_frame ? static_cast<std::size_t>(training_frame_count(v.lr.size(), tc.frames_fraction)) : 1;
        for (std::size_t i = 0; i < used; ++i) frames.push_back({v.lr[i], v.pattern});
      } else if (!frame.empty() && !pattern.empty()) {
        CartesianImage img = read_png(frame);
        if (!mask.empty()) read_mask_png(mask, img);
        frames.push_back({img, fit_pattern_to_grid(load_pattern(pattern), img.width, img.height)});
      } else {
        throw ConfigError("zssr needs --data or --frame with --pattern");
      }
    } else {
      if (data.empty()) throw ConfigError("sisr needs --data");
      for (const fs::path& d : video_dirs(data)) {
        const SyntheticVideo v = load_video(d);
        for (std::size_t i = 0; i < v.hr.size(); ++i) pairs.push_back({v.lr[i], v.hr[i]});
      }
      if (pairs.empty()) throw ConfigError("no (LR, HR) pairs found under " + data);
    }

    const fs::path dir(out);
    prepare_run_dir(dir, cfg, log);
    fs::create_directories(dir / "checkpoints");
    std::ofstream loss_csv(dir / "loss.csv");
    loss_csv.precision(17);
    loss_csv << "epoch,loss,lr\n";

    TrainCallbacks cb;
    cb.log = [&](const std::string& s) { log(s); };
    cb.on_epoch = [&](const LossRow& r) { loss_csv << r.epoch << ',' << r.loss << ',' << r.lr << '\n'; };
    json checkpoints = json::array();
    cb.on_eval = [&](int round, const Checkpoint& c) {
      char name[32];
      std::snprintf(name, sizeof name, "round_%03d.ckpt", round);
      save_checkpoint(dir / "checkpoints" / name, c);
      checkpoints.push_back((dir / "checkpoints" / name).string());
      log("round " + std::to_string(round) + " checkpoint " + name);
    };

    const auto t0 = Clock::now();
    TrainResult result;
    try {
      result = mode == "zssr" ? train_zero_shot(frames, tc, cb) : train_supervised(pairs, tc, cb);
    } catch (const TrainingDiverged& e) {
      loss_csv.flush();
      save_checkpoint(dir / "checkpoints" / "last_finite.ckpt", e.last_finite());
      log(std::string("diverged: ") + e.what() + "; last finite checkpoint kept");
      write_manifest(dir, "train", common.argv, cfg,
                     json{{"loss", (dir / "loss.csv").string()},
                          {"last_finite", (dir / "checkpoints" / "last_finite.ckpt").string()}});
      throw;
    }
    loss_csv.flush();
    Checkpoint final_ck{result.params, result.optimizer,
                        {{"mode", mode}, {"epochs", std::to_string(tc.epochs)}, {"seed", std::to_string(tc.seed)}}};
    save_checkpoint(dir / "final.ckpt", final_ck);
    const double seconds = since(t0);
    log(mode + " training finished: " + std::to_string(result.trace.size()) + " epochs in " +
        std::to_string(seconds) + " s, training set " + std::to_string(result.training_set_size));
    write_manifest(dir, "train", common.argv, cfg,
                   json{{"mode", mode},
                        {"loss", (dir / "loss.csv").string()},
                        {"checkpoint", (dir / "final.ckpt").string()},
                        {"round_checkpoints", checkpoints},
                        {"training_set_size", result.training_set_size},
                        {"crop", result.geometry.crop}});
    os << "trained " << mode << " for " << result.trace.size() << " epochs; checkpoint " << (dir / "final.ckpt").string()
       << "\n";
    return kExitOk;
  }
};

struct InferCmd {
  CommonOptions common;
  std::string checkpoint, input, mask, out;

  void attach(CLI::App* app) {
    common.attach(app);
    app->add_option("--checkpoint", checkpoint, "network checkpoint")->required();
    app->add_option("--input", input, "video directory or directory of PNG frames")->required();
    app->add_option("--mask", mask, "field-of-view mask for plain PNG frames");
    app->add_option("--out", out, "output directory")->required();
  }

  int run(std::ostream& os, Logger& log) {
    const RunConfig cfg = common.resolve();
    cfg.validate();
    apply_backend(cfg);
    const Checkpoint ck = load_checkpoint(checkpoint);
    if (!(ck.params.shape == cfg.train.network)) {
      throw ConfigError("checkpoint architecture (" + std::to_string(ck.params.shape.hidden_layers) + " layers, " +
                        std::to_string(ck.params.shape.channels) + " channels) does not match the configured network");
    }
    const FrameSet frames = load_frames(input, mask);
    if (frames.images.empty()) throw IoError("no frames in " + input);
    prepare_run_dir(out, cfg, log);
    std::ofstream timing(fs::path(out) / "timing.csv");
    timing << "frame,seconds\n";
    double total = 0.0;
    for (std::size_t i = 0; i < frames.images.size(); ++i) {
      const auto t0 = Clock::now();
      const CartesianImage sr = predict_median8(ck.params, frames.images[i], cfg.threads);
      const double dt = since(t0);
      total += dt;
      write_png(fs::path(out) / frames.names[i], sr);
      timing << frames.names[i] << ',' << dt << '\n';
    }
    log("inferred " + std::to_string(frames.images.size()) + " frames, " +
        std::to_string(total / static_cast<double>(frames.images.size())) + " s per frame");
    write_manifest(out, "infer", common.argv, cfg,
                   json{{"checkpoint", checkpoint}, {"frames", frames.images.size()},
                        {"timing", (fs::path(out) / "timing.csv").string()}});
    os << "wrote " << frames.images.size() << " frames to " << out << "\n";
    return kExitOk;
  }
};

struct EvaluateCmd {
  CommonOptions common;
  std::string pred, ref, mask, out;
  bool perceptual = false;

  void attach(CLI::App* app) {
    common.attach(app);
    app->add_option("--pred", pred, "directory of predicted PNG frames")->required();
    app->add_option("--ref", ref, "reference frames: video directory (hr/) or PNG directory")->required();
    app->add_option("--mask", mask, "field-of-view mask applied to both sides");
    app->add_flag("--perceptual", perceptual, "also report the builtin-extractor perceptual distance");
    app->add_option("--out", out, "output directory")->required();
  }

  int run(std::ostream& os, Logger& log) {
    const RunConfig cfg = common.resolve();
    const FrameSet refs = load_frames(ref, mask, true);
    const auto preds = png_files(pred);
    if (preds.size() != refs.images.size()) {
      throw ConfigError("frame count mismatch: " + std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(refs.images.size()) + " references");
    }
    prepare_run_dir(out, cfg, log);
    MetricReport report;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const std::string name = preds[i].filename().string();
      try {
        CartesianImage p = read_png(preds[i]);
        if (p.width == refs.images[i].width && p.height == refs.images[i].height) p.mask = refs.images[i].mask;
        report.frames.push_back(evaluate_frame(name, refs.images[i], p, perceptual));
      } catch (const std::exception& e) {
        FrameMetrics f;
        f.name = name;
        f.valid = false;
        f.note = e.what();
        report.frames.push_back(f);
      }
      if (!report.frames.back().valid) log("warning: " + name + " excluded: " + report.frames.back().note);
    }
    write_text(fs::path(out) / "metrics.csv", report.to_csv());
    write_text(fs::path(out) / "summary.json", report.summary_json());
    write_manifest(out, "evaluate", common.argv, cfg,
                   json{{"metrics", (fs::path(out) / "metrics.csv").string()},
                        {"summary", (fs::path(out) / "summary.json").string()}});
    const MetricSummary p = report.summary(&FrameMetrics::psnr);
    os << "evaluated " << report.frames.size() << " frames (" << report.valid_count() << " valid), mean psnr "
       << p.mean << " dB\n";
    return kExitOk;
  }
};

struct AblateCmd {
  CommonOptions common;
  std::string data, sisr_data, out;
  bool save_predictions = false;

  void attach(CLI::App* app) {
    common.attach(app);
    app->add_option("--data", data, "test videos (simulate output); generated when omitted");
    app->add_option("--sisr-data", sisr_data, "SISR training videos; generated when omitted");
    app->add_flag("--save-predictions", save_predictions, "write every predicted frame");
    app->add_option("--out", out, "run directory")->required();
  }

  int run(std::ostream& os, Logger& log) {
    const RunConfig cfg = common.resolve();
    cfg.validate();
    apply_backend(cfg);
    const fs::path dir(out);
    prepare_run_dir(dir, cfg, log);

    auto gather = [&](const std::string& root, int count, std::uint64_t tag, const std::string& sub) {
      std::vector<SyntheticVideo> vids;
      if (!root.empty()) {
        for (const fs::path& d : video_dirs(root)) vids.push_back(load_video(d));
        if (vids.empty()) throw ConfigError("no videos under " + root);
        return vids;
      }
      for (int v = 0; v < count; ++v) {
        const std::string name = sub + "_" + std::to_string(v);
        vids.push_back(make_synthetic_video(cfg.video, derive_seed(cfg.seed, {tag, std::uint64_t(v)}), name));
        save_video(dir / "data" / sub / name, vids.back());
        vids.back() = load_video(dir / "data" / sub / name);
      }
      log("generated " + std::to_string(count) + " " + sub + " videos");
      return vids;
    };
    const std::vector<SyntheticVideo> test = gather(data, cfg.videos, 1, "test");
    std::vector<TrainingPair> pairs;
    for (const SyntheticVideo& v : gather(sisr_data, cfg.sisr_videos, 2, "sisr")) {
      if (v.hr.empty()) throw ConfigError("SISR video " + v.name + " has no hr/ frames");
      for (std::size_t i = 0; i < v.lr.size(); ++i) pairs.push_back({v.lr[i], v.hr[i]});
    }
    for (const SyntheticVideo& v : test)
      if (v.hr.empty()) throw ConfigError("test video " + v.name + " has no hr/ frames");

    AblationConfig ac;
    ac.train = cfg.resolved_train();
    ac.training_noise = cfg.training_noise;
    AblationCallbacks cb;
    cb.log = [&](const std::string& s) { log(s); };
    if (save_predictions) {
      cb.on_prediction = [&](const ModelRow& row, std::size_t v, std::size_t f, const CartesianImage& img) {
        const fs::path p = dir / "predictions" / row.name / test[v].name;
        fs::create_directories(p);
        write_png(p / frame_file_name(f), img);
      };
    }
    const AblationResult r = run_ablation(test, pairs, ac, cb);

    write_text(dir / "table.csv", ablation_table_csv(r));
    write_text(dir / "hypotheses.csv", hypotheses_csv(r));
    json rows = json::array();
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      const std::string name = "metrics_" + std::to_string(r.rows[i].id) + "_" + r.rows[i].name + ".csv";
      write_text(dir / name, r.reports[i].to_csv());
      rows.push_back(name);
    }
    log("ablation finished in " + std::to_string(r.seconds) + " s");
    write_manifest(dir, "ablate", common.argv, cfg,
                   json{{"table", (dir / "table.csv").string()},
                        {"hypotheses", (dir / "hypotheses.csv").string()},
                        {"per_row_metrics", rows},
                        {"test_videos", test.size()},
                        {"sisr_pairs", pairs.size()},
                        {"seconds", r.seconds},
                        {"train_seconds", r.train_seconds}});
    os << ablation_table_csv(r) << hypotheses_csv(r);
    return kExitOk;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot super-resolution for fibre-bundle endomicroscopy", "pcle"};
  app.require_subcommand(1);

  PatternCmd pattern;
  TexturesCmd textures;
  SimulateCmd simulate;
  TrainCmd train;
  InferCmd infer;
  EvaluateCmd evaluate;
  AblateCmd ablate;
  pattern.attach(app.add_subcommand("pattern", "generate a fibre pattern"));
  textures.attach(app.add_subcommand("textures", "write procedural histology-like source images"));
  simulate.attach(app.add_subcommand("simulate", "simulate pCLE frames or videos from source images"));
  train.attach(app.add_subcommand("train", "train a zero-shot or supervised model"));
  infer.attach(app.add_subcommand("infer", "super-resolve frames with a checkpoint"));
  evaluate.attach(app.add_subcommand("evaluate", "reference-based image quality metrics"));
  ablate.attach(app.add_subcommand("ablate", "run the kernel / noise / multi-frame / SISR ablation"));
  app.add_subcommand("keys", "list the config keys");

  Logger log(err);
  std::vector<std::string> args(argv, argv + argc);
  for (CommonOptions* c : {&pattern.common, &textures.common, &simulate.common, &train.common, &infer.common,
                           &evaluate.common, &ablate.common})
    c->argv = args;
  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      std::ostringstream o, e2;
      const int code = app.exit(e, o, e2);
      out << o.str();
      err << e2.str();
      return code == 0 ? kExitOk : kExitUsage;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "pattern") return pattern.run(out, log);
    if (cmd == "textures") return textures.run(out, log);
    if (cmd == "simulate") return simulate.run(out, log);
    if (cmd == "train") return train.run(out, log);
    if (cmd == "infer") return infer.run(out, log);
    if (cmd == "evaluate") return evaluate.run(out, log);
    if (cmd == "ablate") return ablate.run(out, log);
    for (const ConfigKeyDoc& k : config_key_docs()) out << k.key << " (" << k.type << "): " << k.description << "\n";
    return kExitOk;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const GeometryError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pcle::cli
