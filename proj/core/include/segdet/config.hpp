#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace segdet {

struct SegFeatConfig {
  int grid = 2;                            // K, cells per side
  double lambda = -0.7;                    // overlap bias, subtracted from IoU
  std::int64_t min_segment_pixels = 1500;  // ingest filter
  bool operator==(const SegFeatConfig&) const = default;
};

struct DetectConfig {
  double nms_iou = 0.3;
  int top_k = 100;
  bool operator==(const DetectConfig&) const = default;
};

struct TrainConfig {
  double c_reg = 1e-2;
  int outer_iters = 3;
  double learning_rate = 1e-3;  // eta_0
  double decay = 1e-4;          // eta_t = eta_0 / (1 + decay * t)
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 1;
  std::int64_t neg_cache_cap = 10000;
  double pos_iou = 0.5;
  double neg_iou = 0.3;
  bool use_segmentation = true;
  bool operator==(const TrainConfig&) const = default;
};

struct RegressConfig {
  double ridge = 1.0;     // lambda in sum(residual^2) + lambda * |w|^2
  double min_iou = 0.6;   // training pairs need this overlap with a same-class GT
  int max_iters = 2;
  double change_thresh = 0.2;
  bool operator==(const RegressConfig&) const = default;
};

struct EvalConfig {
  double iou_thresh = 0.5;
  bool eleven_point = false;
  bool operator==(const EvalConfig&) const = default;
};

/// Parameters of the seeded synthetic world generator.
struct SynthConfig {
  std::uint64_t seed = 7;
  int n_images = 200;
  int classes = 3;
  int width = 96;
  int height = 96;
  int objects_min = 1;
  int objects_max = 2;
  int jitter_boxes = 4;       // candidates per object, jittered around it
  int background_boxes = 12;  // random candidates per image
  int distractor_segments = 4;
  double box_jitter = 0.15;      // max side shift as a fraction of object size
  double segment_noise = 0.05;   // max side shift of the object's segment
  double feature_noise = 0.3;    // appearance noise std-dev
  double context_noise = 0.3;
  double score_noise = 0.5;      // segment ranker score noise std-dev
  double reg_noise = 0.0;        // regression feature noise std-dev
  double reg_gain = 1.0;         // fraction of the true offset encoded in regression features
  int app_dim = 16;
  int ctx_dim = 8;
  int reg_dim = 8;
  double context_rho = 0.5;
  double train_fraction = 0.7;
  bool operator==(const SynthConfig&) const = default;
};

struct Config {
  SegFeatConfig segfeat;
  DetectConfig detect;
  TrainConfig train;
  RegressConfig regress;
  EvalConfig eval;
  int threads = 0;  // 0: hardware concurrency
  bool operator==(const Config&) const = default;
};

/// Overlays the keys present in a JSON config file onto the defaults. Unknown keys are errors.
Config load_config(const std::filesystem::path& path);
Config parse_config(const std::string& text, const std::string& name = "<config>");
std::string dump_config(const Config& config);

SynthConfig parse_synth_config(const std::string& json_text);
std::string dump_synth_config(const SynthConfig& config);

/// Throws Error(BadConfig) on out-of-range values.
void validate(const Config& config);
void validate(const SynthConfig& config);

}  // namespace segdet
