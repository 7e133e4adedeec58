#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "segdet/geometry.hpp"
#include "segdet/mask.hpp"

namespace segdet {

/// A segment ready for feature computation: mask, its summed-area table,
/// tight box and the per-class ranker scores s(h, c) for c = 1..C.
struct PreparedSegment {
  SegmentMask mask;
  IntegralMask integral;
  PixelBox tight;
  std::vector<double> class_scores;

  PreparedSegment() = default;
  PreparedSegment(SegmentMask m, std::vector<double> scores);

  std::int64_t id() const { return mask.segment_id(); }
  std::int64_t pixels() const { return mask.pixel_count(); }
  ImageSize image() const { return mask.size(); }
};

/// Side of the K x K grid laid over a candidate box.
struct GridSpec {
  int k = 1;
};

/// Per-class block layout: [grid_in (K*K), seg_out, back_in (K*K), back_out, overlap, seg_class].
constexpr std::size_t block_length(int k) { return 2 * static_cast<std::size_t>(k) * k + 4; }
/// Class-independent prefix of the block (everything except seg_class).
constexpr std::size_t geometry_length(int k) { return block_length(k) - 1; }

/**
 * Cells of the K x K grid over a rounded box, row-major. Column c < K-1 spans
 * floor(w/K) pixels starting at x1 + c*floor(w/K); the last column takes the
 * remainder. Rows are split the same way. Cells may be empty when w < K.
 */
std::vector<PixelBox> grid_cells(const PixelBox& box, GridSpec grid);

/// Fraction of the segment's pixels inside each grid cell of p.
std::vector<double> seggrid_in(const Box& p, const PreparedSegment& s, GridSpec grid);
/// Fraction of the segment's pixels outside p.
double seg_out(const Box& p, const PreparedSegment& s);
/**
 * Non-segment pixels of each in-image grid cell, divided by (M - |S|) where M
 * is the largest segment area in the image. M == |S| uses denominator 1;
 * M < |S| throws Error(DegenerateNormalizer).
 */
std::vector<double> backgrid_in(const Box& p, const PreparedSegment& s, GridSpec grid,
                                std::int64_t largest);
/// Non-segment image pixels outside p, over (M - |S|) as above.
double back_out(const Box& p, const PreparedSegment& s, std::int64_t largest);
/// IoU of p with the segment's tight box, minus lambda.
double overlap_feat(const Box& p, const PreparedSegment& s, double lambda);
/// Logistic of a raw ranker score.
double segclass_feat(double score);

/**
 * Writes the class-independent part of the block for (p, s) into `out`
 * (length geometry_length(k)). This is the hot path used during inference.
 */
void segment_geometry(const Box& p, const PreparedSegment& s, GridSpec grid, double lambda,
                      std::int64_t largest, std::span<double> out);

/// Full block for (p, s, class_id); a null segment yields the all-zero block.
std::vector<double> assemble_block(const Box& p, const PreparedSegment* s, int class_id,
                                   GridSpec grid, double lambda, std::int64_t largest);

/// M for an image. Throws Error(NoSegments) on an empty list.
std::int64_t largest_segment_area(std::span<const PreparedSegment> segments);

/// Per-pixel implementations over the decoded mask, used by `bench` for timing comparison.
namespace naive {
std::vector<double> seggrid_in(const Box& p, const SegmentMask& s, GridSpec grid);
std::vector<double> backgrid_in(const Box& p, const SegmentMask& s, GridSpec grid,
                                std::int64_t largest);
double seg_out(const Box& p, const SegmentMask& s);
double back_out(const Box& p, const SegmentMask& s, std::int64_t largest);
}  // namespace naive

}  // namespace segdet
