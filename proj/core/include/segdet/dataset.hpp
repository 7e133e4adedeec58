#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segdet/config.hpp"
#include "segdet/records.hpp"
#include "segdet/segfeat.hpp"

namespace segdet {

struct ManifestImage {
  std::string id;
  ImageSize size;
  std::string split = "train";  // "train" or "test"
  std::string appearance;       // feature file paths, relative to the manifest
  std::string context;
  std::string regression;       // optional
  bool operator==(const ManifestImage&) const = default;
};

/**
 * Index of a dataset on disk. Paths are stored as written and resolved
 * against `base_dir` (the manifest's directory) when loading.
 */
struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ManifestImage> images;
  std::string boxes = "boxes.csv";
  std::string masks = "masks.txt";
  std::string segment_scores = "segment_scores.csv";
  std::string ground_truth = "ground_truth.csv";
  /// Dataset-level override of the ingest pixel filter (the config default applies otherwise).
  std::optional<std::int64_t> min_segment_pixels;
  /// Present for generated worlds; lets tools rebuild the world's feature function.
  std::optional<SynthConfig> synthetic;
  std::filesystem::path base_dir;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
std::string manifest_to_text(const DatasetManifest& manifest);
DatasetManifest manifest_from_text(const std::string& text, const std::string& name);

/**
 * Everything known about one image: candidate boxes (row i of every feature
 * matrix belongs to box i), its segments sorted by id, M and ground truth.
 */
struct ImageData {
  std::string id;
  ImageSize size;
  std::string split;
  std::vector<std::int64_t> box_ids;
  std::vector<Box> boxes;
  FeatureMatrix appearance;
  FeatureMatrix context;
  FeatureMatrix regression;  // 0 rows when the dataset has none
  std::vector<PreparedSegment> segments;
  std::int64_t largest_segment = 0;  // M; 0 when there are no segments
  std::vector<GroundTruthObject> ground_truth;

  std::size_t num_boxes() const { return boxes.size(); }
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<ImageData> images;
  std::optional<SynthConfig> synthetic;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::size_t app_dim() const;
  std::size_t ctx_dim() const;
  std::size_t reg_dim() const;
};

struct LoadOptions {
  std::int64_t min_segment_pixels = 1500;
  bool require_regression = false;
  int threads = 1;
};

/// Reads and cross-validates every file named by the manifest.
Dataset load_dataset(const DatasetManifest& manifest, const LoadOptions& options);
Dataset load_dataset(const std::filesystem::path& manifest_path, const LoadOptions& options);

/// Indices of images in `split` ("all" selects everything).
std::vector<std::size_t> images_in_split(const Dataset& dataset, const std::string& split);

}  // namespace segdet
