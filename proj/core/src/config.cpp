#include "segdet/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "segdet/error.hpp"
#include "json_fields.hpp"

namespace segdet {

using nlohmann::json;

namespace {

void read_section(const json& j, SegFeatConfig& c) {
  FieldReader r(j, "segfeat");
  r.get("grid", c.grid);
  r.get("lambda", c.lambda);
  r.get("min_segment_pixels", c.min_segment_pixels);
  r.finish();
}

void read_section(const json& j, DetectConfig& c) {
  FieldReader r(j, "detect");
  r.get("nms_iou", c.nms_iou);
  r.get("top_k", c.top_k);
  r.finish();
}

void read_section(const json& j, TrainConfig& c) {
  FieldReader r(j, "train");
  r.get("c_reg", c.c_reg);
  r.get("outer_iters", c.outer_iters);
  r.get("learning_rate", c.learning_rate);
  r.get("decay", c.decay);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("seed", c.seed);
  r.get("neg_cache_cap", c.neg_cache_cap);
  r.get("pos_iou", c.pos_iou);
  r.get("neg_iou", c.neg_iou);
  r.get("use_segmentation", c.use_segmentation);
  r.finish();
}

void read_section(const json& j, RegressConfig& c) {
  FieldReader r(j, "regress");
  r.get("ridge", c.ridge);
  r.get("min_iou", c.min_iou);
  r.get("max_iters", c.max_iters);
  r.get("change_thresh", c.change_thresh);
  r.finish();
}

void read_section(const json& j, EvalConfig& c) {
  FieldReader r(j, "eval");
  r.get("iou_thresh", c.iou_thresh);
  r.get("eleven_point", c.eleven_point);
  r.finish();
}

void read_section(const json& j, SynthConfig& c) {
  FieldReader r(j, "synth");
  r.get("seed", c.seed);
  r.get("n_images", c.n_images);
  r.get("classes", c.classes);
  r.get("width", c.width);
  r.get("height", c.height);
  r.get("objects_min", c.objects_min);
  r.get("objects_max", c.objects_max);
  r.get("jitter_boxes", c.jitter_boxes);
  r.get("background_boxes", c.background_boxes);
  r.get("distractor_segments", c.distractor_segments);
  r.get("box_jitter", c.box_jitter);
  r.get("segment_noise", c.segment_noise);
  r.get("feature_noise", c.feature_noise);
  r.get("context_noise", c.context_noise);
  r.get("score_noise", c.score_noise);
  r.get("reg_noise", c.reg_noise);
  r.get("reg_gain", c.reg_gain);
  r.get("app_dim", c.app_dim);
  r.get("ctx_dim", c.ctx_dim);
  r.get("reg_dim", c.reg_dim);
  r.get("context_rho", c.context_rho);
  r.get("train_fraction", c.train_fraction);
  r.finish();
}

json to_json(const SynthConfig& c) {
  return json{{"seed", c.seed},
              {"n_images", c.n_images},
              {"classes", c.classes},
              {"width", c.width},
              {"height", c.height},
              {"objects_min", c.objects_min},
              {"objects_max", c.objects_max},
              {"jitter_boxes", c.jitter_boxes},
              {"background_boxes", c.background_boxes},
              {"distractor_segments", c.distractor_segments},
              {"box_jitter", c.box_jitter},
              {"segment_noise", c.segment_noise},
              {"feature_noise", c.feature_noise},
              {"context_noise", c.context_noise},
              {"score_noise", c.score_noise},
              {"reg_noise", c.reg_noise},
              {"reg_gain", c.reg_gain},
              {"app_dim", c.app_dim},
              {"ctx_dim", c.ctx_dim},
              {"reg_dim", c.reg_dim},
              {"context_rho", c.context_rho},
              {"train_fraction", c.train_fraction}};
}

json parse_json(const std::string& text, const std::string& name) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(name, 0, e.byte, e.what());
  }
}

void bad(const std::string& what) { throw Error(ErrorCode::BadConfig, what); }

}  // namespace

Config parse_config(const std::string& text, const std::string& name) {
  const json j = parse_json(text, name);
  Config c;
  FieldReader r(j, "config");
  if (const json* s = r.section("segfeat")) read_section(*s, c.segfeat);
  if (const json* s = r.section("detect")) read_section(*s, c.detect);
  if (const json* s = r.section("train")) read_section(*s, c.train);
  if (const json* s = r.section("regress")) read_section(*s, c.regress);
  if (const json* s = r.section("eval")) read_section(*s, c.eval);
  r.get("threads", c.threads);
  r.finish();
  validate(c);
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string dump_config(const Config& c) {
  json j;
  j["segfeat"] = {{"grid", c.segfeat.grid},
                  {"lambda", c.segfeat.lambda},
                  {"min_segment_pixels", c.segfeat.min_segment_pixels}};
  j["detect"] = {{"nms_iou", c.detect.nms_iou}, {"top_k", c.detect.top_k}};
  j["train"] = {{"c_reg", c.train.c_reg},
                {"outer_iters", c.train.outer_iters},
                {"learning_rate", c.train.learning_rate},
                {"decay", c.train.decay},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"seed", c.train.seed},
                {"neg_cache_cap", c.train.neg_cache_cap},
                {"pos_iou", c.train.pos_iou},
                {"neg_iou", c.train.neg_iou},
                {"use_segmentation", c.train.use_segmentation}};
  j["regress"] = {{"ridge", c.regress.ridge},
                  {"min_iou", c.regress.min_iou},
                  {"max_iters", c.regress.max_iters},
                  {"change_thresh", c.regress.change_thresh}};
  j["eval"] = {{"iou_thresh", c.eval.iou_thresh}, {"eleven_point", c.eval.eleven_point}};
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

SynthConfig parse_synth_config(const std::string& json_text) {
  SynthConfig c;
  read_section(parse_json(json_text, "<synth>"), c);
  validate(c);
  return c;
}

std::string dump_synth_config(const SynthConfig& config) { return to_json(config).dump(2) + "\n"; }

void validate(const Config& c) {
  if (c.segfeat.grid < 1) bad("segfeat.grid must be >= 1");
  if (c.segfeat.min_segment_pixels < 0) bad("segfeat.min_segment_pixels must be >= 0");
  if (c.detect.nms_iou < 0 || c.detect.nms_iou > 1) bad("detect.nms_iou must lie in [0,1]");
  if (c.detect.top_k < 1) bad("detect.top_k must be >= 1");
  const TrainConfig& t = c.train;
  if (!(t.c_reg > 0)) bad("train.c_reg must be > 0");
  if (t.outer_iters < 1) bad("train.outer_iters must be >= 1");
  if (!(t.learning_rate > 0)) bad("train.learning_rate must be > 0");
  if (t.decay < 0) bad("train.decay must be >= 0");
  if (t.epochs < 1) bad("train.epochs must be >= 1");
  if (t.batch_size < 1) bad("train.batch_size must be >= 1");
  if (t.neg_cache_cap < 0) bad("train.neg_cache_cap must be >= 0");
  if (!(0 < t.neg_iou && t.neg_iou <= t.pos_iou && t.pos_iou <= 1)) {
    bad("train thresholds must satisfy 0 < neg_iou <= pos_iou <= 1");
  }
  if (c.regress.ridge < 0) bad("regress.ridge must be >= 0");
  if (c.regress.max_iters < 1) bad("regress.max_iters must be >= 1");
  if (c.regress.change_thresh < 0 || c.regress.change_thresh > 1) {
    bad("regress.change_thresh must lie in [0,1]");
  }
  if (c.eval.iou_thresh <= 0 || c.eval.iou_thresh > 1) bad("eval.iou_thresh must lie in (0,1]");
  if (c.threads < 0) bad("threads must be >= 0");
}

void validate(const SynthConfig& c) {
  if (c.n_images < 1 || c.classes < 1 || c.width < 8 || c.height < 8) {
    bad("synth: n_images, classes must be >= 1 and image sides >= 8");
  }
  if (c.objects_min < 1 || c.objects_max < c.objects_min) bad("synth: bad object count range");
  if (c.jitter_boxes < 1 || c.background_boxes < 0 || c.distractor_segments < 0) {
    bad("synth: box and segment counts out of range");
  }
  if (c.box_jitter < 0 || c.segment_noise < 0 || c.feature_noise < 0 || c.context_noise < 0 ||
      c.score_noise < 0 || c.reg_noise < 0) {
    bad("synth: noise levels must be >= 0");
  }
  if (c.app_dim < c.classes + 1 || c.ctx_dim < c.classes || c.reg_dim < 4) {
    bad("synth: app_dim >= classes+1, ctx_dim >= classes and reg_dim >= 4 required");
  }
  if (c.train_fraction <= 0 || c.train_fraction > 1) bad("synth: train_fraction must lie in (0,1]");
}

}  // namespace segdet
