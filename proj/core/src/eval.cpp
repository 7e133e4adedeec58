#include "segdet/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "segdet/error.hpp"
#include "segdet/formats.hpp"

namespace segdet {

std::vector<MatchFlag> match_detections(std::span<const Box> detections, std::span<const GroundTruthObject> ground_truth,
                                        double iou_thresh) {
  std::vector<MatchFlag> flags;
  flags.reserve(detections.size());
  std::vector<bool> matched(ground_truth.size(), false);
  for (const Box& det : detections) {
    std::optional<std::size_t> best;
    double best_iou = -1;
    bool hits_matched = false;
    bool hits_difficult = false;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      const double v = iou(det, ground_truth[g].box);
      if (v < iou_thresh) continue;
      if (ground_truth[g].difficult) {
        hits_difficult = true;
      } else if (matched[g]) {
        hits_matched = true;
      } else if (v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best) {
      matched[*best] = true;
      flags.push_back(MatchFlag::TruePositive);
    } else if (hits_difficult && !hits_matched) {
      flags.push_back(MatchFlag::Ignored);
    } else {
      flags.push_back(MatchFlag::FalsePositive);
    }
  }
  return flags;
}

PRCurve build_curve(std::span<const MatchFlag> flags, std::size_t n_gt) {
  PRCurve c;
  c.n_gt = n_gt;
  for (MatchFlag f : flags) {
    if (f == MatchFlag::Ignored) continue;
    if (f == MatchFlag::TruePositive) {
      ++c.n_tp;
    } else {
      ++c.n_fp;
    }
    c.recall.push_back(n_gt == 0 ? 0.0 : static_cast<double>(c.n_tp) / static_cast<double>(n_gt));
    c.precision.push_back(static_cast<double>(c.n_tp) / static_cast<double>(c.n_tp + c.n_fp));
  }
  return c;
}

double average_precision(const PRCurve& curve, bool eleven_point) {
  if (curve.n_gt == 0) throw Error(ErrorCode::APUndefined, "class has no ground truth");
  const std::size_t n = curve.recall.size();
  if (eleven_point) {
    double ap = 0;
    for (int k = 0; k <= 10; ++k) {
      const double r = k / 10.0;
      double p = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (curve.recall[i] >= r) p = std::max(p, curve.precision[i]);
      }
      ap += p / 11.0;
    }
    return ap;
  }
  // Monotone envelope from the right, then integrate over recall steps.
  std::vector<double> env(curve.precision);
  for (std::size_t i = n; i-- > 1;) env[i - 1] = std::max(env[i - 1], env[i]);
  double ap = 0;
  double prev_recall = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (curve.recall[i] > prev_recall) {
      ap += (curve.recall[i] - prev_recall) * env[i];
      prev_recall = curve.recall[i];
    }
  }
  return ap;
}

std::optional<double> mean_ap(std::span<const std::optional<double>> aps) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& a : aps) {
    if (a) {
      sum += *a;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::vector<std::optional<double>> average_best_overlap(const Dataset& dataset,
                                                        std::span<const std::size_t> image_indices) {
  const std::size_t classes = static_cast<std::size_t>(dataset.num_classes());
  std::vector<double> sum(classes, 0.0);
  std::vector<std::size_t> count(classes, 0);
  for (std::size_t ii : image_indices) {
    const ImageData& image = dataset.images[ii];
    for (const auto& g : image.ground_truth) {
      double best = 0;
      for (const Box& b : image.boxes) best = std::max(best, iou(b, g.box));
      sum[static_cast<std::size_t>(g.class_id - 1)] += best;
      ++count[static_cast<std::size_t>(g.class_id - 1)];
    }
  }
  std::vector<std::optional<double>> out(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] > 0) out[c] = sum[c] / static_cast<double>(count[c]);
  }
  return out;
}

EvalReport evaluate(const Dataset& dataset, std::span<const std::size_t> image_indices,
                    std::span<const Detection> detections, const EvalConfig& config) {
  const int classes = dataset.num_classes();
  std::unordered_map<std::string, std::size_t> slot;  // image id -> position in image_indices
  for (std::size_t k = 0; k < image_indices.size(); ++k) slot.emplace(dataset.images[image_indices[k]].id, k);

  EvalReport report;
  const auto abo = average_best_overlap(dataset, image_indices);
  std::vector<std::optional<double>> aps;
  for (int c = 1; c <= classes; ++c) {
    ClassEval ce;
    ce.class_id = c;
    ce.name = dataset.class_names[static_cast<std::size_t>(c - 1)];
    ce.abo = abo[static_cast<std::size_t>(c - 1)];

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < detections.size(); ++i) {
      if (detections[i].class_id != c) continue;
      if (!slot.count(detections[i].image_id)) {
        throw Error(ErrorCode::BadFormat, "detection references image '" + detections[i].image_id +
                                              "' outside the evaluated set");
      }
      order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (detections[a].score != detections[b].score) return detections[a].score > detections[b].score;
      return detections[a].box_id < detections[b].box_id;
    });

    // Per-image GT of this class and matched flags, consumed in global score order.
    std::vector<std::vector<GroundTruthObject>> gts(image_indices.size());
    std::size_t n_gt = 0;
    for (std::size_t k = 0; k < image_indices.size(); ++k) {
      for (const auto& g : dataset.images[image_indices[k]].ground_truth) {
        if (g.class_id != c) continue;
        gts[k].push_back(g);
        if (!g.difficult) ++n_gt;
      }
    }
    std::vector<std::vector<Box>> per_image_boxes(image_indices.size());
    std::vector<std::vector<std::size_t>> per_image_rank(image_indices.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const std::size_t k = slot.at(detections[order[rank]].image_id);
      per_image_boxes[k].push_back(detections[order[rank]].box);
      per_image_rank[k].push_back(rank);
    }
    std::vector<MatchFlag> flags(order.size(), MatchFlag::FalsePositive);
    for (std::size_t k = 0; k < image_indices.size(); ++k) {
      const auto f = match_detections(per_image_boxes[k], gts[k], config.iou_thresh);
      for (std::size_t j = 0; j < f.size(); ++j) flags[per_image_rank[k][j]] = f[j];
    }
    ce.curve = build_curve(flags, n_gt);
    if (n_gt > 0) ce.ap = average_precision(ce.curve, config.eleven_point);
    aps.push_back(ce.ap);
    report.classes.push_back(std::move(ce));
  }
  report.map = mean_ap(aps);
  report.mabo = mean_ap(abo);
  return report;
}

namespace {
std::string percent(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * *v);
  return buf;
}
}  // namespace

void write_report(std::ostream& out, const EvalReport& report) {
  std::size_t width = 6;
  for (const auto& c : report.classes) width = std::max(width, c.name.size() + 1);
  auto cell = [&](const std::string& s) {
    out << s;
    for (std::size_t i = s.size(); i < width; ++i) out << ' ';
  };
  cell("");
  for (const auto& c : report.classes) cell(c.name);
  out << "mAP\n";
  cell("AP");
  for (const auto& c : report.classes) cell(percent(c.ap));
  out << percent(report.map) << '\n';
  cell("ABO");
  for (const auto& c : report.classes) cell(percent(c.abo));
  out << percent(report.mabo) << '\n';
  out << "\n# exact values\n";
  for (const auto& c : report.classes) {
    out << "class " << c.class_id << ' ' << c.name << " ap=" << (c.ap ? format_double(*c.ap) : "undefined")
        << " n_gt=" << c.curve.n_gt << " tp=" << c.curve.n_tp << " fp=" << c.curve.n_fp << '\n';
  }
  out << "mAP=" << (report.map ? format_double(*report.map) : "undefined") << '\n';
  out << "mABO=" << (report.mabo ? format_double(*report.mabo) : "undefined") << '\n';
}

void write_pr_curves(const std::filesystem::path& dir, const EvalReport& report) {
  for (const auto& c : report.classes) {
    auto out = open_output(dir / ("pr_" + c.name + ".csv"));
    out << "recall,precision\n";
    for (std::size_t i = 0; i < c.curve.recall.size(); ++i) {
      out << format_double(c.curve.recall[i]) << ',' << format_double(c.curve.precision[i]) << '\n';
    }
  }
}

}  // namespace segdet
