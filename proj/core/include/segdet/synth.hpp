#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "segdet/bboxreg.hpp"
#include "segdet/config.hpp"
#include "segdet/dataset.hpp"
#include "segdet/mask.hpp"
#include "segdet/records.hpp"

namespace segdet {

struct SyntheticImage {
  ManifestImage info;
  std::vector<GroundTruthObject> ground_truth;
  std::vector<BoxRecord> boxes;
  std::vector<SegmentMask> masks;
  std::vector<SegmentScore> scores;
  FeatureMatrix appearance;
  FeatureMatrix context;
  FeatureMatrix regression;
};

struct SyntheticWorld {
  SynthConfig config;
  std::vector<std::string> class_names;
  std::vector<SyntheticImage> images;
};

/**
 * Builds a world of rectangular objects. Per image, drawn from a stream keyed by
 * (seed, image index):
 *   - objects with a uniform class and size in [side/5, side/2]
 *   - candidates: `jitter_boxes` per object with every side shifted by up to
 *     box_jitter * size, plus `background_boxes` random rectangles
 *   - segments: the full image, each object's rectangle with sides shifted by up to
 *     segment_noise * size, plus random distractor rectangles
 *   - ranker scores: logit of the segment's best IoU with a GT of the class
 *     (clamped to [0.02, 0.98]) plus Gaussian score noise
 * Features come from synthetic_features().
 */
SyntheticWorld make_world(const SynthConfig& config);

/// Writes every file plus `manifest` into `dir` and returns the manifest.
DatasetManifest write_world(const SyntheticWorld& world, const std::filesystem::path& dir);

/**
 * The world's feature function for any box, deterministic in (seed, image id,
 * rounded box):
 *   appearance[c-1] = best IoU with a class-c object, other dims 0, plus noise
 *   context[c-1]    = best fraction of a class-c object covered by the box
 *                     expanded by context_rho, plus noise
 *   regression[0:4] = reg_gain * targets towards the best-IoU object (0 if none),
 *                     other dims 0, plus noise
 */
FeatureRows synthetic_features(const SynthConfig& config, const std::string& image_id, ImageSize size,
                               std::span<const GroundTruthObject> ground_truth, const Box& box);

/// Provider backed by synthetic_features and the image's ground truth.
FeatureProvider synthetic_provider(const SynthConfig& config);

}  // namespace segdet
