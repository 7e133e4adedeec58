#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "segdet/mask.hpp"
#include "segdet/records.hpp"

namespace segdet {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// Binary feature matrix: "SDMF", u32 version, u64 rows, u64 cols (all little-endian),
// then rows*cols little-endian IEEE-754 float32 values, row-major.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 4 + 4 + 8 + 8;

std::vector<std::uint8_t> encode_feature_matrix(const FeatureMatrix& m);
/// Rejects bad magic, unknown versions, truncated or oversized payloads and non-finite values.
FeatureMatrix decode_feature_matrix(std::span<const std::uint8_t> bytes, const std::string& name);
void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

// Masks: `image_id segment_id height width start:len[,start:len...]` per line ("-" if empty).
std::vector<SegmentMask> read_masks(std::istream& in, const std::string& name);
void write_masks(std::ostream& out, std::span<const SegmentMask> masks);

// CSV files. Readers accept an optional header line starting with "image_id".
std::vector<BoxRecord> read_boxes(std::istream& in, const std::string& name);
void write_boxes(std::ostream& out, std::span<const BoxRecord> boxes);

std::vector<GroundTruthObject> read_ground_truth(std::istream& in, const std::string& name);
void write_ground_truth(std::ostream& out, std::span<const GroundTruthObject> objects);

std::vector<SegmentScore> read_segment_scores(std::istream& in, const std::string& name);
void write_segment_scores(std::ostream& out, std::span<const SegmentScore> scores);

// `image_id,class_id,score,x1,y1,x2,y2,chosen_seg_ids` with ';'-separated ids or NONE.
std::vector<Detection> read_detections(std::istream& in, const std::string& name);
void write_detections(std::ostream& out, std::span<const Detection> detections);

/// Opens a file for reading or throws Error(MissingFile) naming it.
std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace segdet
