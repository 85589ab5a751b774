#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pcle/dataset.hpp"
#include "pcle/iqa.hpp"
#include "pcle/stats.hpp"
#include "pcle/zssr.hpp"

namespace pcle {

enum class ModelKind { baseline, zssr, sisr };

struct ModelRow {
  int id = 0;
  std::string name;
  ModelKind kind = ModelKind::baseline;
  KernelKind kernel = KernelKind::voronoi;
  bool noise = false;        // noise simulated in the training degradation
  bool multi_frame = false;  // trains on the leading frames_fraction of each video
};

/// 1 baseline, 2-5 {voronoi, bicubic} x {noise-free, noisy} single-frame ZSSR,
/// 6 noisy Voronoi multi-frame ZSSR, 7 supervised SISR.
std::vector<ModelRow> ablation_rows();

struct AblationConfig {
  TrainConfig train;                               // shared by every trained row
  NoiseParams training_noise = NoiseParams::synthetic();  // for rows with noise on
  double alpha = 0.05;
};

struct HypothesisTest {
  std::string hypothesis;  // H1..H4
  std::string metric;      // psnr | ssim | gmsd | l1
  int row_a = 0;           // expected better
  int row_b = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  TTestResult test;        // paired over frames, a - b
  bool better = false;     // a beats b in the metric's direction
  bool significant = false;
};

struct AblationResult {
  std::vector<ModelRow> rows;
  std::vector<MetricReport> reports;  // per row, frames of every video in order
  std::vector<HypothesisTest> tests;
  std::vector<double> train_seconds;  // per row, summed over videos
  double seconds = 0.0;

  const HypothesisTest& find(const std::string& hypothesis, const std::string& metric) const;
};

struct AblationCallbacks {
  std::function<void(const std::string&)> log;
  std::function<void(const ModelRow&, std::size_t video, std::size_t frame, const CartesianImage&)> on_prediction;
};

/// Trains and evaluates every row on the test videos. SISR is trained once on
/// `sisr_pairs` (synthetic pairs disjoint from the test videos).
AblationResult run_ablation(const std::vector<SyntheticVideo>& videos, const std::vector<TrainingPair>& sisr_pairs,
                            const AblationConfig& cfg, const AblationCallbacks& callbacks = {});

/// One row per model: id,name,psnr_mean,psnr_std,ssim_mean,... over valid frames.
std::string ablation_table_csv(const AblationResult& r);
/// One row per hypothesis and metric with the paired t-test.
std::string hypotheses_csv(const AblationResult& r);

}  // namespace pcle
