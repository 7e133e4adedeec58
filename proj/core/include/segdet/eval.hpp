#pragma once

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

enum class MatchFlag { TruePositive, FalsePositive, Ignored };

/**
 * PASCAL matching for one image and one class. `detections` must already be
 * in descending score order. Each detection takes the highest-IoU unmatched
 * non-difficult GT with IoU >= iou_thresh (TP). Otherwise it is ignored when it
 * reaches that IoU with a difficult GT and counted FP in every other case,
 * duplicates on matched GT included.
 */
std::vector<MatchFlag> match_detections(std::span<const Box> detections, std::span<const GroundTruthObject> ground_truth,
                                        double iou_thresh);

struct PRCurve {
  std::vector<double> recall;
  std::vector<double> precision;
  std::size_t n_gt = 0;
  std::size_t n_tp = 0;
  std::size_t n_fp = 0;
};

/// Cumulative curve over flags in descending score order; ignored flags are skipped.
PRCurve build_curve(std::span<const MatchFlag> flags, std::size_t n_gt);

/**
 * All-point interpolated AP (area under the monotone precision envelope), or
 * the 11-point variant. Throws Error(APUndefined) when n_gt is 0.
 */
double average_precision(const PRCurve& curve, bool eleven_point = false);

/// Unweighted mean over defined APs; nullopt when none is defined.
std::optional<double> mean_ap(std::span<const std::optional<double>> aps);

struct ClassEval {
  int class_id = 0;
  std::string name;
  std::optional<double> ap;
  std::optional<double> abo;
  PRCurve curve;
};

struct EvalReport {
  std::vector<ClassEval> classes;
  std::optional<double> map;
  std::optional<double> mabo;
};

/**
 * Average best overlap per class: for every GT of the class, the best IoU any
 * candidate box of its image reaches; averaged over GT, then over classes.
 */
std::vector<std::optional<double>> average_best_overlap(const Dataset& dataset,
                                                        std::span<const std::size_t> image_indices);

/**
 * Evaluates detections against the GT of the selected images. Sorting is by
 * score descending with ties by box_id, then input order.
 */
EvalReport evaluate(const Dataset& dataset, std::span<const std::size_t> image_indices,
                    std::span<const Detection> detections, const EvalConfig& config);

/// Table with one column per class plus mAP, values in percent.
void write_report(std::ostream& out, const EvalReport& report);
/// One `recall,precision` CSV per class named pr_<class>.csv.
void write_pr_curves(const std::filesystem::path& dir, const EvalReport& report);

}  // namespace segdet
