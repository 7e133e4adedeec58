#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "segdet/config.hpp"
#include "segdet/dataset.hpp"
#include "segdet/model.hpp"

namespace segdet {

/// Center/size offsets from a proposal P to a target G (widths use the +1 convention).
struct RegTargets {
  double tx = 0;  // (Gx - Px) / Pw
  double ty = 0;  // (Gy - Py) / Ph
  double tw = 0;  // log(Gw / Pw)
  double th = 0;  // log(Gh / Ph)
};

RegTargets compute_targets(const Box& proposal, const Box& target);
/// Inverse of compute_targets (no clipping).
Box apply_targets(const Box& proposal, const RegTargets& t);

/// Linear map from a regression feature row to the four targets.
struct ClassRegressor {
  std::array<std::vector<double>, 4> weights;
  std::array<double, 4> intercepts{};
  bool operator==(const ClassRegressor&) const = default;
};

struct BoxRegressor {
  int feature_dim = 0;
  double ridge = 0;
  std::vector<ClassRegressor> classes;  // classes[c - 1]
  bool operator==(const BoxRegressor&) const = default;

  static BoxRegressor identity(int classes, int feature_dim);
};

struct RegPair {
  std::vector<double> features;
  Box proposal;
  Box target;
};

/**
 * Ridge least squares per target: minimizes sum(residual^2) + ridge * |w|^2
 * with an unpenalized intercept. Needs at least feature_dim + 1 pairs,
 * otherwise throws Error(InsufficientPairs).
 */
ClassRegressor fit_regressor(std::span<const RegPair> pairs, double ridge, int feature_dim);

/// Training pairs: proposals whose best same-class GT IoU reaches min_iou, grouped by class.
std::vector<std::vector<RegPair>> collect_pairs(const Dataset& dataset, std::span<const std::size_t> image_indices,
                                                double min_iou);

/// Fits every class; classes lacking pairs keep the identity map and get a warning.
BoxRegressor fit_regressors(const Dataset& dataset, std::span<const std::size_t> image_indices,
                            const RegressConfig& config, std::vector<std::string>* warnings = nullptr);

RegTargets predict_targets(const ClassRegressor& reg, std::span<const float> features);
/// Regressed box, clipped to the image.
Box apply_regressor(const ClassRegressor& reg, std::span<const float> features, const Box& p, ImageSize image);

/// 1 - IoU on the pixel grid; the re-extraction trigger compares this with a threshold.
double box_change(const Box& before, const Box& after);

void write_regressor(std::ostream& out, const BoxRegressor& reg);
BoxRegressor read_regressor(std::istream& in, const std::string& name);
void save_regressor(const std::filesystem::path& path, const BoxRegressor& reg);
BoxRegressor load_regressor(const std::filesystem::path& path);

/// Features extracted for an arbitrary box.
struct FeatureRows {
  std::vector<float> appearance;
  std::vector<float> context;
  std::vector<float> regression;
};

/// Must be safe to call concurrently. Throws Error(ProviderError) when it cannot serve a box.
using FeatureProvider = std::function<FeatureRows(const ImageData& image, const Box& box)>;

/// Serves the stored features of the candidate box with the highest IoU.
FeatureProvider lookup_provider();

struct IterationStats {
  int iteration = 0;
  std::size_t boxes = 0;
  std::size_t changed = 0;         // boxes whose features were re-extracted
  std::size_t provider_calls = 0;
  double changed_fraction() const { return boxes == 0 ? 0.0 : static_cast<double>(changed) / boxes; }
};

/// Trajectory of every candidate box of one image under one class's regressor.
struct RefinedImage {
  std::vector<std::vector<Box>> boxes;  // boxes[0] is the input, boxes[t] after iteration t
  std::vector<BoxScore> scores;         // final scores
  std::vector<IterationStats> stats;
};

/**
 * Regress every box; re-extract features (through the provider) only where
 * box_change from the box the current features came from exceeds
 * change_thresh; rescore. Boxes below the threshold keep their features and
 * therefore regress to the same place again. Stops early once an iteration
 * changes no box.
 */
RefinedImage iterate_image(const ImageData& image, const ClassRegressor& reg, const ModelWeights& model,
                           int class_id, int max_iters, double change_thresh, const FeatureProvider& provider);

struct IterateResult {
  std::vector<Detection> detections;
  std::vector<IterationStats> stats;  // summed over images and classes, one entry per iteration
};

IterateResult iterate_boxes(const Dataset& dataset, std::span<const std::size_t> image_indices,
                            const BoxRegressor& reg, const ModelWeights& model, const RegressConfig& regress,
                            const DetectConfig& detect, const FeatureProvider& provider, int threads);

/// Applies the detection's class regressor once to each detection's box using lookup features.
std::vector<Detection> apply_to_detections(const Dataset& dataset, std::span<const Detection> detections,
                                           const BoxRegressor& reg);

}  // namespace segdet
