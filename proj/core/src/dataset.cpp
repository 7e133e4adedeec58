#include "segdet/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "json_fields.hpp"
#include "segdet/error.hpp"
#include "segdet/formats.hpp"
#include "segdet/parallel.hpp"

namespace segdet {

using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "segdet-manifest";

[[noreturn]] void invalid(const std::string& where, const std::string& what) {
  throw FormatError(where, 0, 0, what);
}

}  // namespace

std::string manifest_to_text(const DatasetManifest& m) {
  json j;
  j["format"] = kManifestFormat;
  j["version"] = 1;
  j["class_names"] = m.class_names;
  j["files"] = {{"boxes", m.boxes},
                {"masks", m.masks},
                {"segment_scores", m.segment_scores},
                {"ground_truth", m.ground_truth}};
  json images = json::array();
  for (const auto& im : m.images) {
    json e = {{"id", im.id},
              {"width", im.size.width},
              {"height", im.size.height},
              {"split", im.split},
              {"appearance", im.appearance},
              {"context", im.context}};
    if (!im.regression.empty()) e["regression"] = im.regression;
    images.push_back(std::move(e));
  }
  j["images"] = std::move(images);
  if (m.min_segment_pixels) j["min_segment_pixels"] = *m.min_segment_pixels;
  if (m.synthetic) j["synthetic"] = json::parse(dump_synth_config(*m.synthetic));
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_text(const std::string& text, const std::string& name) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(name, 0, e.byte, e.what());
  }
  DatasetManifest m;
  try {
    if (!j.is_object() || j.value("format", "") != kManifestFormat) {
      invalid(name, "not a manifest (missing \"format\": \"" + std::string(kManifestFormat) + "\")");
    }
    if (j.value("version", 0) != 1) invalid(name, "unsupported manifest version");
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (m.class_names.empty()) invalid(name, "class_names is empty");
    const json& files = j.at("files");
    m.boxes = files.at("boxes").get<std::string>();
    m.masks = files.at("masks").get<std::string>();
    m.segment_scores = files.at("segment_scores").get<std::string>();
    m.ground_truth = files.at("ground_truth").get<std::string>();
    std::set<std::string> seen;
    for (const json& e : j.at("images")) {
      ManifestImage im;
      im.id = e.at("id").get<std::string>();
      im.size = {e.at("width").get<int>(), e.at("height").get<int>()};
      im.split = e.value("split", "train");
      im.appearance = e.at("appearance").get<std::string>();
      im.context = e.at("context").get<std::string>();
      im.regression = e.value("regression", "");
      if (im.size.width <= 0 || im.size.height <= 0) invalid(name, "image " + im.id + " has bad size");
      if (!seen.insert(im.id).second) invalid(name, "duplicate image id " + im.id);
      m.images.push_back(std::move(im));
    }
    if (j.contains("min_segment_pixels")) m.min_segment_pixels = j["min_segment_pixels"].get<std::int64_t>();
    if (j.contains("synthetic")) m.synthetic = parse_synth_config(j["synthetic"].dump());
  } catch (const json::exception& e) {
    invalid(name, e.what());
  }
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::stringstream ss;
  ss << in.rdbuf();
  DatasetManifest m = manifest_from_text(ss.str(), path.string());
  m.base_dir = path.parent_path();
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  auto out = open_output(path);
  out << manifest_to_text(manifest);
}

std::size_t Dataset::app_dim() const { return images.empty() ? 0 : images.front().appearance.cols; }
std::size_t Dataset::ctx_dim() const { return images.empty() ? 0 : images.front().context.cols; }
std::size_t Dataset::reg_dim() const { return images.empty() ? 0 : images.front().regression.cols; }

Dataset load_dataset(const std::filesystem::path& manifest_path, const LoadOptions& options) {
  return load_dataset(read_manifest(manifest_path), options);
}

Dataset load_dataset(const DatasetManifest& manifest, const LoadOptions& options) {
  Dataset ds;
  ds.class_names = manifest.class_names;
  ds.synthetic = manifest.synthetic;
  const int classes = manifest.num_classes();
  const std::int64_t min_pixels = manifest.min_segment_pixels.value_or(options.min_segment_pixels);

  std::unordered_map<std::string, std::size_t> index;
  ds.images.resize(manifest.images.size());
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    const auto& mi = manifest.images[i];
    ds.images[i].id = mi.id;
    ds.images[i].size = mi.size;
    ds.images[i].split = mi.split;
    index.emplace(mi.id, i);
  }
  auto lookup = [&](const std::string& id, const std::string& file) -> ImageData& {
    auto it = index.find(id);
    if (it == index.end()) throw FormatError(file, 0, 0, "unknown image_id '" + id + "'");
    return ds.images[it->second];
  };

  {
    const auto path = manifest.resolve(manifest.boxes);
    auto in = open_input(path);
    std::vector<std::set<std::int64_t>> ids(ds.images.size());
    for (auto& b : read_boxes(in, path.string())) {
      ImageData& im = lookup(b.image_id, path.string());
      if (!ids[&im - ds.images.data()].insert(b.box_id).second) {
        throw FormatError(path.string(), 0, 0, "duplicate box " + std::to_string(b.box_id) + " in " + im.id);
      }
      im.box_ids.push_back(b.box_id);
      im.boxes.push_back(b.box);
    }
  }

  {
    const auto path = manifest.resolve(manifest.ground_truth);
    auto in = open_input(path);
    for (auto& g : read_ground_truth(in, path.string())) {
      ImageData& im = lookup(g.image_id, path.string());
      if (g.class_id > classes) {
        throw FormatError(path.string(), 0, 0, "class_id " + std::to_string(g.class_id) + " exceeds class count");
      }
      const PixelBox r = g.box.rounded();
      if (r.x1 < 0 || r.y1 < 0 || r.x2 >= im.size.width || r.y2 >= im.size.height) {
        throw FormatError(path.string(), 0, 0, "ground truth box outside image " + im.id);
      }
      im.ground_truth.push_back(std::move(g));
    }
  }

  // (image index, segment id) -> scores; kept segments must have all C.
  std::map<std::pair<std::size_t, std::int64_t>, SegmentMask> kept;
  std::set<std::pair<std::size_t, std::int64_t>> all_segments;
  {
    const auto path = manifest.resolve(manifest.masks);
    auto in = open_input(path);
    for (auto& m : read_masks(in, path.string())) {
      ImageData& im = lookup(m.image_id(), path.string());
      const std::size_t ii = static_cast<std::size_t>(&im - ds.images.data());
      if (m.height() != im.size.height || m.width() != im.size.width) {
        throw FormatError(path.string(), 0, 0,
                          "segment " + std::to_string(m.segment_id()) + " dims differ from image " + im.id);
      }
      if (!all_segments.insert({ii, m.segment_id()}).second) {
        throw FormatError(path.string(), 0, 0, "duplicate segment " + std::to_string(m.segment_id()));
      }
      if (m.pixel_count() == 0 || m.pixel_count() < min_pixels) continue;
      kept.emplace(std::make_pair(ii, m.segment_id()), std::move(m));
    }
  }

  std::map<std::pair<std::size_t, std::int64_t>, std::vector<std::optional<double>>> scores;
  {
    const auto path = manifest.resolve(manifest.segment_scores);
    auto in = open_input(path);
    for (const auto& s : read_segment_scores(in, path.string())) {
      ImageData& im = lookup(s.image_id, path.string());
      const auto key = std::make_pair(static_cast<std::size_t>(&im - ds.images.data()), s.segment_id);
      if (!all_segments.count(key)) {
        throw FormatError(path.string(), 0, 0, "score for unknown segment " + std::to_string(s.segment_id));
      }
      if (s.class_id > classes) throw FormatError(path.string(), 0, 0, "class_id exceeds class count");
      auto& row = scores[key];
      row.resize(static_cast<std::size_t>(classes));
      row[static_cast<std::size_t>(s.class_id - 1)] = s.raw_score;
    }
  }

  std::vector<std::vector<std::pair<SegmentMask, std::vector<double>>>> pending(ds.images.size());
  for (auto& [key, mask] : kept) {
    auto it = scores.find(key);
    std::vector<double> row;
    for (int c = 0; c < classes; ++c) {
      if (it == scores.end() || !it->second[static_cast<std::size_t>(c)]) {
        throw FormatError(manifest.resolve(manifest.segment_scores).string(), 0, 0,
                          "segment " + std::to_string(key.second) + " of image " + ds.images[key.first].id +
                              " lacks a score for class " + std::to_string(c + 1));
      }
      row.push_back(*it->second[static_cast<std::size_t>(c)]);
    }
    pending[key.first].emplace_back(std::move(mask), std::move(row));
  }

  parallel_for(ds.images.size(), options.threads, [&](std::size_t i) {
    ImageData& im = ds.images[i];
    const ManifestImage& mi = manifest.images[i];
    for (auto& [mask, row] : pending[i]) im.segments.emplace_back(std::move(mask), std::move(row));
    if (!im.segments.empty()) im.largest_segment = largest_segment_area(im.segments);

    auto load_matrix = [&](const std::string& rel, const char* what) {
      const auto path = manifest.resolve(rel);
      FeatureMatrix fm = read_feature_matrix(path);
      if (fm.rows != im.boxes.size()) {
        throw FormatError(path.string(), 0, 8,
                          std::string(what) + " rows (" + std::to_string(fm.rows) + ") differ from box count (" +
                              std::to_string(im.boxes.size()) + ") of image " + im.id);
      }
      return fm;
    };
    im.appearance = load_matrix(mi.appearance, "appearance");
    im.context = load_matrix(mi.context, "context");
    if (!mi.regression.empty()) {
      im.regression = load_matrix(mi.regression, "regression");
    } else if (options.require_regression) {
      throw Error(ErrorCode::MissingFeatures, "image " + im.id + " has no regression features");
    }
  });

  for (const auto& im : ds.images) {
    const auto& first = ds.images.front();
    if (im.appearance.cols != first.appearance.cols || im.context.cols != first.context.cols ||
        (im.regression.rows > 0 && first.regression.rows > 0 && im.regression.cols != first.regression.cols)) {
      throw Error(ErrorCode::BadFormat, "feature dimensions differ between images " + first.id + " and " + im.id);
    }
  }
  return ds;
}

std::vector<std::size_t> images_in_split(const Dataset& dataset, const std::string& split) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    if (split == "all" || dataset.images[i].split == split) out.push_back(i);
  }
  return out;
}

}  // namespace segdet
