#include "segdet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "segdet/error.hpp"
#include "segdet/formats.hpp"
#include "segdet/parallel.hpp"
#include "segdet/rng.hpp"

namespace segdet {

std::vector<Label> assign_labels(std::span<const Box> boxes, std::span<const GroundTruthObject> ground_truth,
                                 int class_id, double pos_iou, double neg_iou) {
  std::vector<Label> labels(boxes.size(), Label::Negative);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    double best = 0;
    for (const auto& g : ground_truth) {
      if (g.class_id == class_id) best = std::max(best, iou(boxes[i], g.box));
    }
    if (best >= pos_iou) {
      labels[i] = Label::Positive;
    } else if (best >= neg_iou) {
      labels[i] = Label::Excluded;
    }
  }
  return labels;
}

Latent init_latent(const Box& p, const ImageData& image, int classes, double lambda) {
  Latent h(static_cast<std::size_t>(classes), std::nullopt);
  if (image.segments.empty()) return h;
  std::size_t best = 0;
  double best_value = overlap_feat(p, image.segments[0], lambda);
  for (std::size_t s = 1; s < image.segments.size(); ++s) {
    const double v = overlap_feat(p, image.segments[s], lambda);
    if (v > best_value) {
      best = s;
      best_value = v;
    }
  }
  std::fill(h.begin(), h.end(), best);
  return h;
}

LinearModel flatten(const ClassWeights& weights) {
  LinearModel m;
  m.w.reserve(weights.appearance.size() + weights.context.size() + weights.segmentation.size());
  m.w.insert(m.w.end(), weights.appearance.begin(), weights.appearance.end());
  m.w.insert(m.w.end(), weights.context.begin(), weights.context.end());
  m.w.insert(m.w.end(), weights.segmentation.begin(), weights.segmentation.end());
  m.bias = weights.bias;
  return m;
}

ClassWeights unflatten(const LinearModel& linear, std::size_t app_dim, std::size_t ctx_dim) {
  ClassWeights w;
  const auto a = linear.w.begin();
  w.appearance.assign(a, a + static_cast<std::ptrdiff_t>(app_dim));
  w.context.assign(a + static_cast<std::ptrdiff_t>(app_dim), a + static_cast<std::ptrdiff_t>(app_dim + ctx_dim));
  w.segmentation.assign(a + static_cast<std::ptrdiff_t>(app_dim + ctx_dim), linear.w.end());
  w.bias = linear.bias;
  return w;
}

std::vector<double> instance_features(const ImageData& image, std::size_t box, const Latent& h,
                                      const ModelWeights& layout) {
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(layout.app_dim + layout.ctx_dim) + layout.seg_dim());
  for (float v : image.appearance.row(box)) x.push_back(v);
  for (float v : image.context.row(box)) x.push_back(v);
  const auto seg = segmentation_features(image.boxes[box], image, h, GridSpec{layout.grid}, layout.lambda);
  x.insert(x.end(), seg.begin(), seg.end());
  return x;
}

std::size_t relabel_positives(const Dataset& dataset, const ModelWeights& model, int detector_class,
                              std::span<TrainInstance> positives, int threads) {
  std::vector<std::uint8_t> changed(positives.size(), 0);
  parallel_for(positives.size(), threads, [&](std::size_t i) {
    TrainInstance& inst = positives[i];
    const ImageData& image = dataset.images[inst.ref.image];
    Latent h = score_box(inst.ref.box, image, model, detector_class).chosen;
    if (h != inst.latent) {
      changed[i] = 1;
      inst.latent = std::move(h);
      inst.features = instance_features(image, inst.ref.box, inst.latent, model);
    }
  });
  return static_cast<std::size_t>(std::count(changed.begin(), changed.end(), 1));
}

std::vector<std::size_t> select_hard_negatives(std::span<const double> scores, std::int64_t cap) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > -1.0) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (static_cast<std::int64_t>(idx.size()) > cap) idx.resize(static_cast<std::size_t>(cap));
  return idx;
}

std::vector<TrainInstance> mine_hard_negatives(const Dataset& dataset, const ModelWeights& model, int detector_class,
                                               std::span<const InstanceRef> pool, std::int64_t cap,
                                               bool use_segmentation, int threads) {
  const std::size_t classes = static_cast<std::size_t>(model.classes());
  std::vector<double> scores(pool.size());
  std::vector<Latent> latents(pool.size());
  parallel_for(pool.size(), threads, [&](std::size_t i) {
    const ImageData& image = dataset.images[pool[i].image];
    BoxScore s = score_box(pool[i].box, image, model, detector_class);
    scores[i] = s.score;
    latents[i] = use_segmentation ? std::move(s.chosen) : Latent(classes, std::nullopt);
  });
  const auto keep = select_hard_negatives(scores, cap);
  std::vector<TrainInstance> out(keep.size());
  parallel_for(keep.size(), threads, [&](std::size_t k) {
    const std::size_t i = keep[k];
    TrainInstance& inst = out[k];
    inst.ref = pool[i];
    inst.label = -1;
    inst.latent = latents[i];
    inst.features = instance_features(dataset.images[pool[i].image], pool[i].box, inst.latent, model);
  });
  return out;
}

namespace {

double decision(const LinearModel& m, std::span<const double> x) {
  double f = m.bias;
  for (std::size_t j = 0; j < x.size(); ++j) f += m.w[j] * x[j];
  return f;
}

}  // namespace

double svm_objective(const LinearModel& model, std::span<const TrainInstance> instances, double c_reg) {
  double reg = 0;
  for (double v : model.w) reg += v * v;
  double hinge = 0;
  for (const auto& inst : instances) {
    hinge += std::max(0.0, 1.0 - inst.label * decision(model, inst.features));
  }
  return reg + c_reg * hinge;
}

SgdResult sgd_fit(std::span<const TrainInstance> instances, const LinearModel& init, const TrainConfig& config) {
  SgdResult result;
  result.model = init;
  result.initial_objective = svm_objective(init, instances, config.c_reg);
  result.final_objective = result.initial_objective;
  if (instances.empty()) return result;

  const std::size_t n = instances.size();
  const std::size_t dim = init.w.size();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  LinearModel current = init;
  std::vector<double> grad(dim);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      // Hinge part scaled so the batch estimates the full sum over the cache.
      const double scale = config.c_reg * static_cast<double>(n) / static_cast<double>(end - start);
      for (std::size_t j = 0; j < dim; ++j) grad[j] = 2.0 * current.w[j];
      double grad_bias = 0;
      for (std::size_t k = start; k < end; ++k) {
        const TrainInstance& inst = instances[order[k]];
        if (inst.label * decision(current, inst.features) < 1.0) {
          const double y = inst.label;
          for (std::size_t j = 0; j < dim; ++j) grad[j] -= scale * y * inst.features[j];
          grad_bias -= scale * y;
        }
      }
      const double eta = config.learning_rate / (1.0 + config.decay * static_cast<double>(step));
      for (std::size_t j = 0; j < dim; ++j) current.w[j] -= eta * grad[j];
      current.bias -= eta * grad_bias;
      ++step;
    }
    const double obj = svm_objective(current, instances, config.c_reg);
    result.trace.push_back(obj);
    if (!std::isfinite(obj) || obj > 10.0 * result.initial_objective) {
      throw Error(ErrorCode::Diverged, "objective rose from " + format_double(result.initial_objective) + " to " +
                                           format_double(obj) + " in epoch " + std::to_string(epoch + 1) +
                                           "; try a smaller learning_rate");
    }
    if (obj < result.final_objective) {
      result.final_objective = obj;
      result.model = current;
    }
  }
  return result;
}

TrainResult train(const Dataset& dataset, std::span<const std::size_t> image_indices, const Config& config,
                  int threads) {
  validate(config);
  const TrainConfig& tc = config.train;
  TrainResult result;
  result.model = ModelWeights::zeros(dataset.class_names, config.segfeat.grid, config.segfeat.lambda,
                                     static_cast<int>(dataset.app_dim()), static_cast<int>(dataset.ctx_dim()));
  const ModelWeights& layout = result.model;
  const int classes = dataset.num_classes();
  const Latent no_segments(static_cast<std::size_t>(classes), std::nullopt);

  for (int d = 1; d <= classes; ++d) {
    std::vector<TrainInstance> positives;
    std::vector<InstanceRef> negative_pool;
    for (std::size_t ii : image_indices) {
      const ImageData& image = dataset.images[ii];
      const auto labels = assign_labels(image.boxes, image.ground_truth, d, tc.pos_iou, tc.neg_iou);
      for (std::size_t b = 0; b < labels.size(); ++b) {
        if (labels[b] == Label::Positive) {
          TrainInstance inst;
          inst.ref = {ii, b};
          inst.label = 1;
          positives.push_back(std::move(inst));
        } else if (labels[b] == Label::Negative) {
          negative_pool.push_back({ii, b});
        }
      }
    }
    if (positives.empty()) {
      result.warnings.push_back("class " + std::to_string(d) + " (" + dataset.class_names[static_cast<std::size_t>(d - 1)] +
                                ") has no positives; detector left at zero");
      continue;
    }
    parallel_for(positives.size(), threads, [&](std::size_t i) {
      TrainInstance& inst = positives[i];
      const ImageData& image = dataset.images[inst.ref.image];
      inst.latent = tc.use_segmentation
                        ? init_latent(image.boxes[inst.ref.box], image, classes, config.segfeat.lambda)
                        : no_segments;
      inst.features = instance_features(image, inst.ref.box, inst.latent, layout);
    });

    LinearModel linear = flatten(result.model.detector(d));
    for (int round = 1; round <= tc.outer_iters; ++round) {
      TrainLogRow row;
      row.round = round;
      row.class_id = d;
      // Round 1 keeps the overlap-based initialization; relabeling with zero weights would erase it.
      if (round > 1 && tc.use_segmentation) {
        row.num_latent_changed = relabel_positives(dataset, result.model, d, positives, threads);
      }
      auto negatives = mine_hard_negatives(dataset, result.model, d, negative_pool, tc.neg_cache_cap,
                                           tc.use_segmentation, threads);
      row.num_hard_negs = negatives.size();

      std::vector<TrainInstance> cache;
      cache.reserve(positives.size() + negatives.size());
      cache.insert(cache.end(), positives.begin(), positives.end());
      std::move(negatives.begin(), negatives.end(), std::back_inserter(cache));

      TrainConfig round_config = tc;
      round_config.seed = derive_seed(tc.seed, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(round));
      const SgdResult fit = sgd_fit(cache, linear, round_config);
      linear = fit.model;
      result.model.detector(d) = unflatten(linear, static_cast<std::size_t>(layout.app_dim),
                                           static_cast<std::size_t>(layout.ctx_dim));
      row.objective_before = fit.initial_objective;
      row.objective = fit.final_objective;
      result.log.push_back(row);
    }
  }
  return result;
}

void write_train_log(std::ostream& out, std::span<const TrainLogRow> rows) {
  out << "round,class_id,objective,num_hard_negs,num_latent_changed\n";
  for (const auto& r : rows) {
    out << r.round << ',' << r.class_id << ',' << format_double(r.objective) << ',' << r.num_hard_negs << ','
        << r.num_latent_changed << '\n';
  }
}

}  // namespace segdet
