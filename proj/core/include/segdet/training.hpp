#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "segdet/config.hpp"
#include "segdet/dataset.hpp"
#include "segdet/model.hpp"

namespace segdet {

enum class Label : std::int8_t { Negative = -1, Excluded = 0, Positive = 1 };

/**
 * Positive when the best IoU with a GT of `class_id` reaches pos_iou, negative
 * when it stays below neg_iou, excluded in between.
 */
std::vector<Label> assign_labels(std::span<const Box> boxes, std::span<const GroundTruthObject> ground_truth,
                                 int class_id, double pos_iou, double neg_iou);

/// Every class gets the segment whose overlap feature with p is largest (lowest id on ties).
Latent init_latent(const Box& p, const ImageData& image, int classes, double lambda);

struct InstanceRef {
  std::size_t image = 0;
  std::size_t box = 0;
  auto operator<=>(const InstanceRef&) const = default;
};

/// A cached training example: features are [appearance | context | segmentation(h)].
struct TrainInstance {
  InstanceRef ref;
  int label = 0;  // +1 / -1
  Latent latent;
  std::vector<double> features;
};

/// Flat view of one detector's weights matching TrainInstance::features.
struct LinearModel {
  std::vector<double> w;
  double bias = 0;
};

LinearModel flatten(const ClassWeights& weights);
ClassWeights unflatten(const LinearModel& linear, std::size_t app_dim, std::size_t ctx_dim);

std::vector<double> instance_features(const ImageData& image, std::size_t box, const Latent& h,
                                      const ModelWeights& layout);

/// Re-chooses h* for each positive under the current weights; returns how many changed.
std::size_t relabel_positives(const Dataset& dataset, const ModelWeights& model, int detector_class,
                              std::span<TrainInstance> positives, int threads);

/**
 * Indices of the hard negatives to keep: score > -1, highest first (ties by
 * position), at most `cap`. Each position appears once.
 */
std::vector<std::size_t> select_hard_negatives(std::span<const double> scores, std::int64_t cap);

/// Scores the pool with h maximized and caches the selected negatives' features.
std::vector<TrainInstance> mine_hard_negatives(const Dataset& dataset, const ModelWeights& model, int detector_class,
                                               std::span<const InstanceRef> pool, std::int64_t cap,
                                               bool use_segmentation, int threads);

/// |w|^2 + C * sum(max(0, 1 - y f)); the bias is not regularized.
double svm_objective(const LinearModel& model, std::span<const TrainInstance> instances, double c_reg);

struct SgdResult {
  LinearModel model;
  double initial_objective = 0;
  double final_objective = 0;
  std::vector<double> trace;  // objective after each epoch
};

/**
 * Mini-batch stochastic subgradient descent on the fixed cache with
 * eta_t = eta_0 / (1 + decay * t). Returns the best epoch iterate (never worse
 * than `init`). Throws Error(Diverged) when an epoch ends above 10x the
 * initial objective.
 */
SgdResult sgd_fit(std::span<const TrainInstance> instances, const LinearModel& init, const TrainConfig& config);

struct TrainLogRow {
  int round = 0;
  int class_id = 0;
  double objective = 0;         // on the round's frozen cache, after fitting
  double objective_before = 0;  // same cache, before fitting
  std::size_t num_hard_negs = 0;
  std::size_t num_latent_changed = 0;
};

struct TrainResult {
  ModelWeights model;
  std::vector<TrainLogRow> log;
  std::vector<std::string> warnings;
};

/// Trains one independent detector per class on the given images.
TrainResult train(const Dataset& dataset, std::span<const std::size_t> image_indices, const Config& config,
                  int threads);

/// CSV: round,class_id,objective,num_hard_negs,num_latent_changed
void write_train_log(std::ostream& out, std::span<const TrainLogRow> rows);

}  // namespace segdet
