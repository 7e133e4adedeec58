#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segdet/geometry.hpp"

namespace segdet {

struct BoxRecord {
  std::string image_id;
  std::int64_t box_id = 0;
  Box box;
  bool operator==(const BoxRecord&) const = default;
};

struct GroundTruthObject {
  std::string image_id;
  int class_id = 1;  // 1..C
  Box box;
  bool difficult = false;
  bool operator==(const GroundTruthObject&) const = default;
};

struct SegmentScore {
  std::string image_id;
  std::int64_t segment_id = 0;
  int class_id = 1;
  double raw_score = 0;
  bool operator==(const SegmentScore&) const = default;
};

using SegmentChoice = std::optional<std::int64_t>;  // nullopt: no segment for that class

struct Detection {
  std::string image_id;
  int class_id = 1;
  std::int64_t box_id = -1;  // not part of the dump format; -1 after reading one back
  Box box;
  double score = 0;
  std::vector<SegmentChoice> chosen_segments;  // one entry per class
  bool operator==(const Detection&) const = default;
};

/// Dense row-major float matrix, the in-memory form of a feature file.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  bool operator==(const FeatureMatrix&) const = default;
};

}  // namespace segdet
