#include "segdet/bboxreg.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "segdet/error.hpp"
#include "segdet/formats.hpp"
#include "segdet/parallel.hpp"

namespace segdet {

using nlohmann::json;

RegTargets compute_targets(const Box& p, const Box& g) {
  return {(g.center_x() - p.center_x()) / p.width(), (g.center_y() - p.center_y()) / p.height(),
          std::log(g.width() / p.width()), std::log(g.height() / p.height())};
}

Box apply_targets(const Box& p, const RegTargets& t) {
  const double cx = p.center_x() + t.tx * p.width();
  const double cy = p.center_y() + t.ty * p.height();
  const double half_w = 0.5 * (p.width() * std::exp(t.tw) - 1.0);
  const double half_h = 0.5 * (p.height() * std::exp(t.th) - 1.0);
  return {cx - half_w, cy - half_h, cx + half_w, cy + half_h};
}

BoxRegressor BoxRegressor::identity(int classes, int feature_dim) {
  BoxRegressor r;
  r.feature_dim = feature_dim;
  ClassRegressor zero;
  for (auto& w : zero.weights) w.assign(static_cast<std::size_t>(feature_dim), 0.0);
  r.classes.assign(static_cast<std::size_t>(classes), zero);
  return r;
}

ClassRegressor fit_regressor(std::span<const RegPair> pairs, double ridge, int feature_dim) {
  const auto n = static_cast<Eigen::Index>(pairs.size());
  const Eigen::Index d = feature_dim;
  if (n < d + 1) {
    throw Error(ErrorCode::InsufficientPairs,
                std::to_string(n) + " pairs for " + std::to_string(d) + " features (need at least " +
                    std::to_string(d + 1) + ")");
  }
  Eigen::MatrixXd x(n, d);
  Eigen::MatrixXd y(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RegPair& p = pairs[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(p.features.size()) != d) {
      throw Error(ErrorCode::MissingFeatures, "regression pair has the wrong feature length");
    }
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = p.features[static_cast<std::size_t>(j)];
    const RegTargets t = compute_targets(p.proposal, p.target);
    y.row(i) << t.tx, t.ty, t.tw, t.th;
  }
  // The intercept is left unpenalized by centering.
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  x.rowwise() -= x_mean;
  y.rowwise() -= y_mean;

  Eigen::MatrixXd w;
  if (ridge > 0) {
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += ridge;
    w = gram.ldlt().solve(x.transpose() * y);
  } else {
    w = x.completeOrthogonalDecomposition().solve(y);
  }
  ClassRegressor out;
  for (int t = 0; t < 4; ++t) {
    out.weights[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) out.weights[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = w(j, t);
    out.intercepts[static_cast<std::size_t>(t)] = y_mean(t) - x_mean.dot(w.col(t));
  }
  return out;
}

std::vector<std::vector<RegPair>> collect_pairs(const Dataset& dataset, std::span<const std::size_t> image_indices,
                                                double min_iou) {
  std::vector<std::vector<RegPair>> pairs(static_cast<std::size_t>(dataset.num_classes()));
  for (std::size_t ii : image_indices) {
    const ImageData& image = dataset.images[ii];
    if (image.regression.rows != image.boxes.size()) {
      throw Error(ErrorCode::MissingFeatures, "image " + image.id + " has no regression features");
    }
    for (std::size_t b = 0; b < image.boxes.size(); ++b) {
      const GroundTruthObject* best = nullptr;
      double best_iou = -1;
      for (const auto& g : image.ground_truth) {
        const double v = iou(image.boxes[b], g.box);
        if (v > best_iou) {
          best_iou = v;
          best = &g;
        }
      }
      if (best == nullptr || best_iou < min_iou) continue;
      const auto row = image.regression.row(b);
      pairs[static_cast<std::size_t>(best->class_id - 1)].push_back(
          {std::vector<double>(row.begin(), row.end()), image.boxes[b], best->box});
    }
  }
  return pairs;
}

BoxRegressor fit_regressors(const Dataset& dataset, std::span<const std::size_t> image_indices,
                            const RegressConfig& config, std::vector<std::string>* warnings) {
  const int dim = static_cast<int>(dataset.reg_dim());
  BoxRegressor reg = BoxRegressor::identity(dataset.num_classes(), dim);
  reg.ridge = config.ridge;
  const auto pairs = collect_pairs(dataset, image_indices, config.min_iou);
  for (std::size_t c = 0; c < pairs.size(); ++c) {
    try {
      reg.classes[c] = fit_regressor(pairs[c], config.ridge, dim);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientPairs) throw;
      if (warnings) warnings->push_back("class " + std::to_string(c + 1) + ": " + e.what() + "; identity kept");
    }
  }
  return reg;
}

RegTargets predict_targets(const ClassRegressor& reg, std::span<const float> features) {
  std::array<double, 4> t = reg.intercepts;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& w = reg.weights[k];
    if (w.size() != features.size()) {
      throw Error(ErrorCode::MissingFeatures, "regression feature length differs from the regressor");
    }
    for (std::size_t j = 0; j < w.size(); ++j) t[k] += w[j] * static_cast<double>(features[j]);
  }
  return {t[0], t[1], t[2], t[3]};
}

Box apply_regressor(const ClassRegressor& reg, std::span<const float> features, const Box& p, ImageSize image) {
  Box out = clip_box(apply_targets(p, predict_targets(reg, features)), image);
  if (!out.valid()) out = clip_box(p, image);
  return out;
}

double box_change(const Box& before, const Box& after) { return 1.0 - iou(before, after); }

void write_regressor(std::ostream& out, const BoxRegressor& reg) {
  json j;
  j["format"] = "segdet-regressor";
  j["version"] = 1;
  j["feature_dim"] = reg.feature_dim;
  j["ridge"] = reg.ridge;
  json classes = json::array();
  for (std::size_t c = 0; c < reg.classes.size(); ++c) {
    const auto& r = reg.classes[c];
    classes.push_back({{"class_id", c + 1},
                       {"intercepts", r.intercepts},
                       {"tx", r.weights[0]},
                       {"ty", r.weights[1]},
                       {"tw", r.weights[2]},
                       {"th", r.weights[3]}});
  }
  j["classes"] = std::move(classes);
  out << j.dump(1) << '\n';
}

BoxRegressor read_regressor(std::istream& in, const std::string& name) {
  std::stringstream ss;
  ss << in.rdbuf();
  BoxRegressor reg;
  try {
    const json j = json::parse(ss.str());
    if (j.value("format", "") != "segdet-regressor" || j.value("version", 0) != 1) {
      throw FormatError(name, 0, 0, "not a regressor file");
    }
    reg.feature_dim = j.at("feature_dim").get<int>();
    reg.ridge = j.at("ridge").get<double>();
    for (const json& e : j.at("classes")) {
      ClassRegressor r;
      r.intercepts = e.at("intercepts").get<std::array<double, 4>>();
      const char* keys[4] = {"tx", "ty", "tw", "th"};
      for (std::size_t k = 0; k < 4; ++k) {
        r.weights[k] = e.at(keys[k]).get<std::vector<double>>();
        if (static_cast<int>(r.weights[k].size()) != reg.feature_dim) {
          throw FormatError(name, 0, 0, std::string("weight vector ") + keys[k] + " has the wrong length");
        }
      }
      reg.classes.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError(name, 0, 0, e.what());
  }
  return reg;
}

void save_regressor(const std::filesystem::path& path, const BoxRegressor& reg) {
  auto out = open_output(path);
  write_regressor(out, reg);
}

BoxRegressor load_regressor(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_regressor(in, path.string());
}

namespace {

std::size_t nearest_box(const ImageData& image, const Box& box) {
  if (image.boxes.empty()) {
    throw Error(ErrorCode::ProviderError, "image " + image.id + " has no candidate boxes to look up");
  }
  std::size_t best = 0;
  double best_iou = -1;
  for (std::size_t i = 0; i < image.boxes.size(); ++i) {
    const double v = iou(image.boxes[i], box);
    if (v > best_iou) {
      best_iou = v;
      best = i;
    }
  }
  return best;
}

std::vector<float> to_vec(std::span<const float> s) { return {s.begin(), s.end()}; }

}  // namespace

FeatureProvider lookup_provider() {
  return [](const ImageData& image, const Box& box) {
    if (image.regression.rows != image.boxes.size()) {
      throw Error(ErrorCode::ProviderError, "image " + image.id + " has no regression features");
    }
    const std::size_t i = nearest_box(image, box);
    return FeatureRows{to_vec(image.appearance.row(i)), to_vec(image.context.row(i)), to_vec(image.regression.row(i))};
  };
}

RefinedImage iterate_image(const ImageData& image, const ClassRegressor& reg, const ModelWeights& model, int class_id,
                           int max_iters, double change_thresh, const FeatureProvider& provider) {
  const std::size_t n = image.num_boxes();
  if (image.regression.rows != n) {
    throw Error(ErrorCode::MissingFeatures, "image " + image.id + " has no regression features");
  }
  RefinedImage out;
  std::vector<FeatureRows> features(n);
  std::vector<Box> feature_box = image.boxes;
  std::vector<Box> current = image.boxes;
  for (std::size_t i = 0; i < n; ++i) {
    features[i] = {to_vec(image.appearance.row(i)), to_vec(image.context.row(i)), to_vec(image.regression.row(i))};
  }
  out.boxes.push_back(current);
  for (int it = 1; it <= max_iters; ++it) {
    IterationStats st;
    st.iteration = it;
    st.boxes = n;
    for (std::size_t i = 0; i < n; ++i) {
      const Box moved = apply_regressor(reg, features[i].regression, feature_box[i], image.size);
      if (box_change(feature_box[i], moved) > change_thresh) {
        FeatureRows fresh = provider(image, moved);
        ++st.provider_calls;
        if (fresh.regression.size() != features[i].regression.size() ||
            fresh.appearance.size() != features[i].appearance.size() ||
            fresh.context.size() != features[i].context.size()) {
          throw Error(ErrorCode::ProviderError, "provider returned rows of the wrong size for image " + image.id);
        }
        features[i] = std::move(fresh);
        feature_box[i] = moved;
        ++st.changed;
      }
      current[i] = moved;
    }
    out.boxes.push_back(current);
    out.stats.push_back(st);
    if (st.changed == 0) break;
  }
  out.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.scores[i] = score_box(current[i], features[i].appearance, features[i].context, image, model, class_id);
  }
  return out;
}

IterateResult iterate_boxes(const Dataset& dataset, std::span<const std::size_t> image_indices,
                            const BoxRegressor& reg, const ModelWeights& model, const RegressConfig& regress,
                            const DetectConfig& detect, const FeatureProvider& provider, int threads) {
  check_compatible(model, dataset);
  const int classes = model.classes();
  const std::size_t jobs = image_indices.size() * static_cast<std::size_t>(classes);
  std::vector<RefinedImage> refined(jobs);
  parallel_for(jobs, threads, [&](std::size_t j) {
    const ImageData& image = dataset.images[image_indices[j / static_cast<std::size_t>(classes)]];
    const int c = static_cast<int>(j % static_cast<std::size_t>(classes)) + 1;
    refined[j] = iterate_image(image, reg.classes.at(static_cast<std::size_t>(c - 1)), model, c, regress.max_iters,
                               regress.change_thresh, provider);
  });

  IterateResult result;
  int iterations_run = 0;
  for (const auto& r : refined) iterations_run = std::max(iterations_run, static_cast<int>(r.stats.size()));
  result.stats.resize(static_cast<std::size_t>(iterations_run));
  for (int t = 0; t < iterations_run; ++t) result.stats[static_cast<std::size_t>(t)].iteration = t + 1;
  for (std::size_t j = 0; j < jobs; ++j) {
    const RefinedImage& r = refined[j];
    const ImageData& image = dataset.images[image_indices[j / static_cast<std::size_t>(classes)]];
    const int c = static_cast<int>(j % static_cast<std::size_t>(classes)) + 1;
    for (int t = 0; t < iterations_run; ++t) {
      IterationStats& agg = result.stats[static_cast<std::size_t>(t)];
      agg.boxes += image.num_boxes();
      if (t < static_cast<int>(r.stats.size())) {
        agg.changed += r.stats[static_cast<std::size_t>(t)].changed;
        agg.provider_calls += r.stats[static_cast<std::size_t>(t)].provider_calls;
      }
    }
    const auto& final_boxes = r.boxes.back();
    std::vector<double> scores(r.scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = r.scores[i].score;
    for (std::size_t i : nms(final_boxes, scores, image.box_ids, detect.nms_iou, detect.top_k)) {
      result.detections.push_back(make_detection(image, i, final_boxes[i], c, r.scores[i]));
    }
  }
  return result;
}

std::vector<Detection> apply_to_detections(const Dataset& dataset, std::span<const Detection> detections,
                                           const BoxRegressor& reg) {
  std::unordered_map<std::string, const ImageData*> by_id;
  for (const auto& im : dataset.images) by_id.emplace(im.id, &im);
  std::vector<Detection> out(detections.begin(), detections.end());
  for (auto& d : out) {
    auto it = by_id.find(d.image_id);
    if (it == by_id.end()) throw Error(ErrorCode::ProviderError, "detection references unknown image " + d.image_id);
    const ImageData& image = *it->second;
    if (image.regression.rows != image.boxes.size()) {
      throw Error(ErrorCode::MissingFeatures, "image " + image.id + " has no regression features");
    }
    const std::size_t i = nearest_box(image, d.box);
    d.box = apply_regressor(reg.classes.at(static_cast<std::size_t>(d.class_id - 1)), image.regression.row(i), d.box,
                            image.size);
  }
  return out;
}

}  // namespace segdet
