#include "segdet/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "segdet/error.hpp"
#include "segdet/formats.hpp"
#include "segdet/parallel.hpp"

namespace segdet {

using nlohmann::json;

namespace {

constexpr const char* kModelFormat = "segdet-model";

template <typename A, typename B>
double dot(std::span<const A> a, std::span<const B> b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

}  // namespace

ModelWeights ModelWeights::zeros(std::vector<std::string> class_names, int grid, double lambda, int app_dim,
                                 int ctx_dim) {
  ModelWeights m;
  m.grid = grid;
  m.lambda = lambda;
  m.app_dim = app_dim;
  m.ctx_dim = ctx_dim;
  m.class_names = std::move(class_names);
  for (int d = 0; d < m.classes(); ++d) {
    ClassWeights w;
    w.appearance.assign(static_cast<std::size_t>(app_dim), 0.0);
    w.context.assign(static_cast<std::size_t>(ctx_dim), 0.0);
    w.segmentation.assign(m.seg_dim(), 0.0);
    m.detectors.push_back(std::move(w));
  }
  return m;
}

void ModelWeights::check() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::BadFormat, "model: " + msg); };
  if (grid < 1) fail("grid must be >= 1");
  if (!std::isfinite(lambda)) fail("lambda must be finite");
  if (class_names.empty()) fail("no classes");
  if (detectors.size() != class_names.size()) fail("detector count differs from class count");
  for (std::size_t d = 0; d < detectors.size(); ++d) {
    const auto& w = detectors[d];
    if (w.appearance.size() != static_cast<std::size_t>(app_dim) ||
        w.context.size() != static_cast<std::size_t>(ctx_dim) || w.segmentation.size() != seg_dim()) {
      fail("detector " + std::to_string(d + 1) + " has blocks of the wrong length");
    }
    auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(w.appearance) || !finite(w.context) || !finite(w.segmentation) || !std::isfinite(w.bias)) {
      fail("detector " + std::to_string(d + 1) + " has non-finite weights");
    }
  }
}

void write_model(std::ostream& out, const ModelWeights& m) {
  json j;
  j["format"] = kModelFormat;
  j["version"] = 1;
  j["grid"] = m.grid;
  j["lambda"] = m.lambda;
  j["app_dim"] = m.app_dim;
  j["ctx_dim"] = m.ctx_dim;
  j["class_names"] = m.class_names;
  json dets = json::array();
  for (std::size_t d = 0; d < m.detectors.size(); ++d) {
    const auto& w = m.detectors[d];
    dets.push_back({{"class_id", d + 1},
                    {"bias", w.bias},
                    {"appearance", w.appearance},
                    {"context", w.context},
                    {"segmentation", w.segmentation}});
  }
  j["detectors"] = std::move(dets);
  out << j.dump(1) << '\n';
}

ModelWeights read_model(std::istream& in, const std::string& name) {
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw FormatError(name, 0, e.byte, e.what());
  }
  ModelWeights m;
  try {
    if (!j.is_object() || j.value("format", "") != kModelFormat) throw FormatError(name, 0, 0, "not a model file");
    if (j.value("version", 0) != 1) throw FormatError(name, 0, 0, "unsupported model version");
    m.grid = j.at("grid").get<int>();
    m.lambda = j.at("lambda").get<double>();
    m.app_dim = j.at("app_dim").get<int>();
    m.ctx_dim = j.at("ctx_dim").get<int>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const json& e : j.at("detectors")) {
      ClassWeights w;
      w.bias = e.at("bias").get<double>();
      w.appearance = e.at("appearance").get<std::vector<double>>();
      w.context = e.at("context").get<std::vector<double>>();
      w.segmentation = e.at("segmentation").get<std::vector<double>>();
      if (e.at("class_id").get<std::size_t>() != m.detectors.size() + 1) {
        throw FormatError(name, 0, 0, "detectors must be listed in class order");
      }
      m.detectors.push_back(std::move(w));
    }
  } catch (const json::exception& e) {
    throw FormatError(name, 0, 0, e.what());
  }
  try {
    m.check();
  } catch (const Error& e) {
    throw FormatError(name, 0, 0, e.what());
  }
  return m;
}

void save_model(const std::filesystem::path& path, const ModelWeights& model) {
  auto out = open_output(path);
  write_model(out, model);
}

ModelWeights load_model(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_model(in, path.string());
}

std::vector<double> segment_geometry_table(const Box& p, const ImageData& image, GridSpec grid, double lambda) {
  const std::size_t g = geometry_length(grid.k);
  std::vector<double> table(image.segments.size() * g);
  for (std::size_t s = 0; s < image.segments.size(); ++s) {
    segment_geometry(p, image.segments[s], grid, lambda, image.largest_segment,
                     std::span<double>(table.data() + s * g, g));
  }
  return table;
}

SegmentSelection select_segment(std::span<const double> geometry_table, const ImageData& image, int class_id,
                                std::span<const double> class_block, GridSpec grid) {
  const std::size_t g = geometry_length(grid.k);
  const std::span<const double> geo_w = class_block.first(g);
  const double class_w = class_block[g];
  SegmentSelection best;  // none, contribution 0
  for (std::size_t s = 0; s < image.segments.size(); ++s) {
    const double c = dot(geometry_table.subspan(s * g, g), geo_w) +
                     class_w * segclass_feat(image.segments[s].class_scores[static_cast<std::size_t>(class_id - 1)]);
    if (c > best.contribution) {
      best.segment = s;
      best.contribution = c;
    }
  }
  return best;
}

std::vector<double> segmentation_features(const Box& p, const ImageData& image, const Latent& h, GridSpec grid,
                                          double lambda) {
  const std::size_t len = block_length(grid.k);
  std::vector<double> out;
  out.reserve(h.size() * len);
  for (std::size_t c = 0; c < h.size(); ++c) {
    const PreparedSegment* s = h[c] ? &image.segments.at(*h[c]) : nullptr;
    const auto block = assemble_block(p, s, static_cast<int>(c + 1), grid, lambda, image.largest_segment);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

double energy(const Box& p, std::span<const float> appearance, std::span<const float> context,
              const ImageData& image, const ModelWeights& model, int detector_class, const Latent& h) {
  const ClassWeights& w = model.detector(detector_class);
  // Same summation order as score_box so equal assignments give bit-identical energies.
  double e = dot(appearance, std::span<const double>(w.appearance)) +
             dot(context, std::span<const double>(w.context)) + w.bias;
  const GridSpec grid{model.grid};
  const std::size_t len = model.block_len();
  const std::size_t g = geometry_length(grid.k);
  for (std::size_t c = 0; c < h.size(); ++c) {
    if (!h[c]) continue;
    const auto block = assemble_block(p, &image.segments.at(*h[c]), static_cast<int>(c + 1), grid, model.lambda,
                                      image.largest_segment);
    const auto wc = std::span<const double>(w.segmentation).subspan(c * len, len);
    e += dot(std::span<const double>(block).first(g), wc.first(g)) + wc[g] * block[g];
  }
  return e;
}

BoxScore score_box(const Box& p, std::span<const float> appearance, std::span<const float> context,
                   const ImageData& image, const ModelWeights& model, int detector_class) {
  const ClassWeights& w = model.detector(detector_class);
  if (appearance.size() != w.appearance.size() || context.size() != w.context.size()) {
    throw Error(ErrorCode::MissingFeatures, "feature dimensions do not match the model");
  }
  BoxScore out;
  out.score = dot(appearance, std::span<const double>(w.appearance)) +
              dot(context, std::span<const double>(w.context)) + w.bias;
  out.chosen.assign(static_cast<std::size_t>(model.classes()), std::nullopt);
  const bool any_seg_weight =
      std::any_of(w.segmentation.begin(), w.segmentation.end(), [](double x) { return x != 0.0; });
  if (image.segments.empty() || !any_seg_weight) return out;

  const GridSpec grid{model.grid};
  const auto table = segment_geometry_table(p, image, grid, model.lambda);
  const std::size_t len = model.block_len();
  for (int c = 1; c <= model.classes(); ++c) {
    const auto block = std::span<const double>(w.segmentation).subspan(static_cast<std::size_t>(c - 1) * len, len);
    const SegmentSelection sel = select_segment(table, image, c, block, grid);
    out.chosen[static_cast<std::size_t>(c - 1)] = sel.segment;
    out.score += sel.contribution;
  }
  return out;
}

BoxScore score_box(std::size_t box_index, const ImageData& image, const ModelWeights& model, int detector_class) {
  if (box_index >= image.boxes.size() || box_index >= image.appearance.rows || box_index >= image.context.rows) {
    throw Error(ErrorCode::MissingFeatures,
                "no feature row for box index " + std::to_string(box_index) + " in image " + image.id);
  }
  return score_box(image.boxes[box_index], image.appearance.row(box_index), image.context.row(box_index), image,
                   model, detector_class);
}

std::vector<std::size_t> nms(std::span<const Box> boxes, std::span<const double> scores,
                             std::span<const std::int64_t> ids, double iou_thresh, int top_k) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  std::vector<PixelBox> rounded(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) rounded[i] = boxes[i].rounded();
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    if (static_cast<int>(kept.size()) >= top_k) break;
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (iou(rounded[i], rounded[k]) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

Detection make_detection(const ImageData& image, std::size_t box_index, const Box& box, int class_id,
                         const BoxScore& scored) {
  Detection d;
  d.image_id = image.id;
  d.class_id = class_id;
  d.box_id = image.box_ids.at(box_index);
  d.box = box;
  d.score = scored.score;
  for (const auto& h : scored.chosen) {
    d.chosen_segments.push_back(h ? std::optional<std::int64_t>(image.segments[*h].id()) : std::nullopt);
  }
  return d;
}

std::vector<Detection> detect_image(const ImageData& image, const ModelWeights& model, const DetectConfig& config) {
  std::vector<Detection> out;
  const std::size_t n = image.num_boxes();
  for (int c = 1; c <= model.classes(); ++c) {
    std::vector<BoxScore> scored(n);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      scored[i] = score_box(i, image, model, c);
      scores[i] = scored[i].score;
    }
    for (std::size_t i : nms(image.boxes, scores, image.box_ids, config.nms_iou, config.top_k)) {
      out.push_back(make_detection(image, i, image.boxes[i], c, scored[i]));
    }
  }
  return out;
}

std::vector<Detection> detect(const Dataset& dataset, std::span<const std::size_t> image_indices,
                              const ModelWeights& model, const DetectConfig& config, int threads) {
  check_compatible(model, dataset);
  std::vector<std::vector<Detection>> per_image(image_indices.size());
  parallel_for(image_indices.size(), threads, [&](std::size_t i) {
    per_image[i] = detect_image(dataset.images[image_indices[i]], model, config);
  });
  std::vector<Detection> out;
  for (auto& v : per_image) std::move(v.begin(), v.end(), std::back_inserter(out));
  return out;
}

void check_compatible(const ModelWeights& model, const Dataset& dataset) {
  if (model.classes() != dataset.num_classes()) {
    throw Error(ErrorCode::MissingFeatures, "model has " + std::to_string(model.classes()) +
                                                " classes, dataset has " + std::to_string(dataset.num_classes()));
  }
  if (static_cast<std::size_t>(model.app_dim) != dataset.app_dim() ||
      static_cast<std::size_t>(model.ctx_dim) != dataset.ctx_dim()) {
    throw Error(ErrorCode::MissingFeatures, "model feature dimensions differ from the dataset's");
  }
}

}  // namespace segdet
