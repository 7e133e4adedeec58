#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segdet/config.hpp"
#include "segdet/dataset.hpp"
#include "segdet/records.hpp"

namespace segdet {

/// Weights of one detector class.
struct ClassWeights {
  std::vector<double> appearance;
  std::vector<double> context;
  std::vector<double> segmentation;  // C blocks of block_length(K), class 1 first
  double bias = 0;
  bool operator==(const ClassWeights&) const = default;
};

struct ModelWeights {
  int grid = 1;
  double lambda = -0.7;
  int app_dim = 0;
  int ctx_dim = 0;
  std::vector<std::string> class_names;
  std::vector<ClassWeights> detectors;  // detectors[d - 1] scores class d

  int classes() const { return static_cast<int>(class_names.size()); }
  std::size_t block_len() const { return block_length(grid); }
  std::size_t seg_dim() const { return block_len() * static_cast<std::size_t>(classes()); }
  const ClassWeights& detector(int class_id) const { return detectors.at(static_cast<std::size_t>(class_id - 1)); }
  ClassWeights& detector(int class_id) { return detectors.at(static_cast<std::size_t>(class_id - 1)); }

  static ModelWeights zeros(std::vector<std::string> class_names, int grid, double lambda, int app_dim,
                            int ctx_dim);
  /// Throws Error(BadFormat) when any block has the wrong length or a non-finite entry.
  void check() const;

  bool operator==(const ModelWeights&) const = default;
};

void write_model(std::ostream& out, const ModelWeights& model);
ModelWeights read_model(std::istream& in, const std::string& name);
void save_model(const std::filesystem::path& path, const ModelWeights& model);
ModelWeights load_model(const std::filesystem::path& path);

/// Per-class segment choice; entries index ImageData::segments, nullopt means none.
using Latent = std::vector<std::optional<std::size_t>>;

struct SegmentSelection {
  std::optional<std::size_t> segment;  // index into the image's segments
  double contribution = 0;
};

/**
 * Class-independent block prefixes for every segment of `image` against box p,
 * laid out segment-major (segments x geometry_length(K)).
 */
std::vector<double> segment_geometry_table(const Box& p, const ImageData& image, GridSpec grid,
                                           double lambda);

/**
 * Best segment for class `class_id` given that class's weight block. No segment
 * scores exactly 0; a segment must be strictly better to win, and among equal
 * segments the lowest id (first in the sorted list) wins.
 */
SegmentSelection select_segment(std::span<const double> geometry_table, const ImageData& image,
                                int class_id, std::span<const double> class_block, GridSpec grid);

/// Concatenated segmentation features for an explicit assignment h (C blocks).
std::vector<double> segmentation_features(const Box& p, const ImageData& image, const Latent& h,
                                          GridSpec grid, double lambda);

/// Energy for a fixed assignment h, without maximization.
double energy(const Box& p, std::span<const float> appearance, std::span<const float> context,
              const ImageData& image, const ModelWeights& model, int detector_class, const Latent& h);

struct BoxScore {
  double score = 0;
  Latent chosen;
};

/// Max over h of the energy, one independent argmax per class, plus the bias.
BoxScore score_box(const Box& p, std::span<const float> appearance, std::span<const float> context,
                   const ImageData& image, const ModelWeights& model, int detector_class);
/// Scores candidate box `box_index` with its stored features; throws Error(MissingFeatures).
BoxScore score_box(std::size_t box_index, const ImageData& image, const ModelWeights& model,
                   int detector_class);

/**
 * Greedy non-maximum suppression. Order is score descending, then id ascending;
 * a box is dropped when its IoU with any kept box exceeds `iou_thresh`.
 * Returns indices of kept boxes, at most top_k.
 */
std::vector<std::size_t> nms(std::span<const Box> boxes, std::span<const double> scores,
                             std::span<const std::int64_t> ids, double iou_thresh, int top_k);

Detection make_detection(const ImageData& image, std::size_t box_index, const Box& box, int class_id,
                         const BoxScore& scored);

/// All classes for one image, class-major, each class in NMS order.
std::vector<Detection> detect_image(const ImageData& image, const ModelWeights& model,
                                    const DetectConfig& config);

/// Runs detect_image over the selected images; output order follows `image_indices`.
std::vector<Detection> detect(const Dataset& dataset, std::span<const std::size_t> image_indices,
                              const ModelWeights& model, const DetectConfig& config, int threads);

/// Checks that the model's feature dimensions agree with the dataset.
void check_compatible(const ModelWeights& model, const Dataset& dataset);

}  // namespace segdet
