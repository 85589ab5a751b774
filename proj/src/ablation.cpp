#include "pcle/ablation.hpp"

#include <chrono>
#include <sstream>

#include "pcle/error.hpp"
#include "pcle/rng.hpp"

namespace pcle {

std::vector<ModelRow> ablation_rows() {
  using K = KernelKind;
  return {
      {1, "baseline", ModelKind::baseline, K::voronoi, false, false},
      {2, "zssr_voronoi_clean", ModelKind::zssr, K::voronoi, false, false},
      {3, "zssr_bicubic_clean", ModelKind::zssr, K::bicubic, false, false},
      {4, "zssr_voronoi_noise", ModelKind::zssr, K::voronoi, true, false},
      {5, "zssr_bicubic_noise", ModelKind::zssr, K::bicubic, true, false},
      {6, "zssr_voronoi_noise_video", ModelKind::zssr, K::voronoi, true, true},
      {7, "sisr", ModelKind::sisr, K::voronoi, true, false},
  };
}

const HypothesisTest& AblationResult::find(const std::string& hypothesis, const std::string& metric) const {
  for (const HypothesisTest& t : tests)
    if (t.hypothesis == hypothesis && t.metric == metric) return t;
  throw ConfigError("no test for " + hypothesis + "/" + metric);
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct MetricField {
  const char* name;
  double FrameMetrics::*field;
  bool higher_is_better;
};

constexpr MetricField kMetrics[] = {{"psnr", &FrameMetrics::psnr, true},
                                    {"ssim", &FrameMetrics::ssim, true},
                                    {"gmsd", &FrameMetrics::gmsd, false},
                                    {"l1", &FrameMetrics::l1, false}};

const MetricField& metric_field(const std::string& name) {
  for (const MetricField& m : kMetrics)
    if (name == m.name) return m;
  throw ConfigError("unknown metric '" + name + "'");
}

std::vector<InputFrame> input_frames(const SyntheticVideo& v, std::size_t count) {
  std::vector<InputFrame> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back({v.lr[i], v.pattern});
  return out;
}

HypothesisTest compare(const std::string& h, const std::string& metric, const MetricReport& a, int row_a,
                       const MetricReport& b, int row_b, double alpha) {
  const MetricField& m = metric_field(metric);
  std::vector<double> xa, xb;
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    if (!a.frames[i].valid || !b.frames[i].valid) continue;
    xa.push_back(a.frames[i].*m.field);
    xb.push_back(b.frames[i].*m.field);
  }
  HypothesisTest t;
  t.hypothesis = h;
  t.metric = metric;
  t.row_a = row_a;
  t.row_b = row_b;
  t.mean_a = a.summary(m.field).mean;
  t.mean_b = b.summary(m.field).mean;
  t.test = paired_t_test(xa, xb);
  t.better = m.higher_is_better ? t.test.mean_difference > 0 : t.test.mean_difference < 0;
  t.significant = t.test.p < alpha;
  return t;
}

}  // namespace

AblationResult run_ablation(const std::vector<SyntheticVideo>& videos, const std::vector<TrainingPair>& sisr_pairs,
                            const AblationConfig& cfg, const AblationCallbacks& cb) {
  cfg.train.validate();
  if (videos.empty()) throw ConfigError("ablation needs at least one test video");
  const auto t_start = Clock::now();
  auto log = [&](const std::string& s) {
    if (cb.log) cb.log(s);
  };

  AblationResult res;
  res.rows = ablation_rows();
  res.reports.resize(res.rows.size());
  res.train_seconds.assign(res.rows.size(), 0.0);

  for (std::size_t r = 0; r < res.rows.size(); ++r) {
    const ModelRow& row = res.rows[r];
    TrainConfig tc = cfg.train;
    tc.degrade.kernel = row.kernel;
    tc.degrade.noise = row.noise ? cfg.training_noise : NoiseParams::off();

    std::optional<NetworkParams<float>> sisr_model;
    if (row.kind == ModelKind::sisr) {
      // Same crop as the zero-shot rows so the compute budget matches.
      const CartesianImage ph = make_pseudo_hr(videos[0].lr[0], videos[0].pattern, tc.linear_factor).image;
      tc.crop_size = resolve_crop(ph, tc).crop;
      const auto t0 = Clock::now();
      sisr_model = train_supervised(sisr_pairs, tc).params;
      res.train_seconds[r] += since(t0);
      log(row.name + ": trained on " + std::to_string(sisr_pairs.size()) + " pairs in " +
          std::to_string(res.train_seconds[r]) + " s");
    }

    for (std::size_t v = 0; v < videos.size(); ++v) {
      const SyntheticVideo& video = videos[v];
      std::optional<NetworkParams<float>> model = sisr_model;
      if (row.kind == ModelKind::zssr) {
        tc.seed = derive_seed(cfg.train.seed, {v});  // shared across rows: paired comparisons
        const std::size_t used =
            row.multi_frame ? static_cast<std::size_t>(training_frame_count(video.lr.size(), tc.frames_fraction)) : 1;
        const auto t0 = Clock::now();
        model = train_zero_shot(input_frames(video, used), tc).params;
        const double dt = since(t0);
        res.train_seconds[r] += dt;
        log(row.name + " / " + video.name + ": " + std::to_string(used) + " frame(s), trained in " +
            std::to_string(dt) + " s");
      }
      for (std::size_t f = 0; f < video.lr.size(); ++f) {
        const CartesianImage pred = model ? predict_median8(*model, video.lr[f], tc.threads) : video.lr[f];
        if (cb.on_prediction) cb.on_prediction(row, v, f, pred);
        res.reports[r].frames.push_back(evaluate_frame(video.name + "/" + std::to_string(f), video.hr[f], pred));
      }
    }
    log(row.name + ": mean psnr " + std::to_string(res.reports[r].summary(&FrameMetrics::psnr).mean));
  }

  auto report = [&](int id) -> const MetricReport& { return res.reports[static_cast<std::size_t>(id - 1)]; };
  auto add = [&](const std::string& h, const std::string& metric, int a, int b) {
    res.tests.push_back(compare(h, metric, report(a), a, report(b), b, cfg.alpha));
  };
  for (const MetricField& m : kMetrics) add("H1", m.name, 4, 5);
  for (const MetricField& m : kMetrics) add("H2", m.name, 4, 2);
  for (const MetricField& m : kMetrics) add("H3", m.name, 6, 4);
  for (const MetricField& m : kMetrics) add("H4", m.name, 7, 4);
  res.seconds = since(t_start);
  return res;
}

std::string ablation_table_csv(const AblationResult& r) {
  std::ostringstream os;
  os.precision(10);
  os << "id,model,kind,kernel,noise,multi_frame,frames";
  for (const MetricField& m : kMetrics) os << ',' << m.name << "_mean," << m.name << "_std";
  os << '\n';
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const ModelRow& row = r.rows[i];
    const char* kind = row.kind == ModelKind::baseline ? "baseline" : row.kind == ModelKind::zssr ? "zssr" : "sisr";
    os << row.id << ',' << row.name << ',' << kind << ','
       << (row.kind == ModelKind::baseline ? "-" : std::string(kernel_name(row.kernel))) << ',' << row.noise << ','
       << row.multi_frame << ',' << r.reports[i].valid_count();
    for (const MetricField& m : kMetrics) {
      const MetricSummary s = r.reports[i].summary(m.field);
      os << ',' << s.mean << ',' << s.std;
    }
    os << '\n';
  }
  return os.str();
}

std::string hypotheses_csv(const AblationResult& r) {
  std::ostringstream os;
  os.precision(10);
  os << "hypothesis,metric,row_a,row_b,mean_a,mean_b,mean_diff,t,dof,p,a_better,significant\n";
  for (const HypothesisTest& t : r.tests) {
    os << t.hypothesis << ',' << t.metric << ',' << t.row_a << ',' << t.row_b << ',' << t.mean_a << ',' << t.mean_b
       << ',' << t.test.mean_difference << ',' << t.test.t << ',' << t.test.dof << ',' << t.test.p << ','
       << t.better << ',' << t.significant << '\n';
  }
  return os.str();
}

}  // namespace pcle
