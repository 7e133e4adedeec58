#include <benchmark/benchmark.h>

#include <filesystem>

#include "segdet/dataset.hpp"
#include "segdet/model.hpp"
#include "segdet/rng.hpp"
#include "segdet/synth.hpp"

namespace {

using namespace segdet;

struct Fixture {
  Dataset dataset;
  ModelWeights model;

  Fixture() {
    SynthConfig sc;
    sc.n_images = 4;
    sc.width = sc.height = 256;
    sc.background_boxes = 200;
    sc.distractor_segments = 40;
    const auto dir = std::filesystem::temp_directory_path() / "segdet_bench_world";
    write_world(make_world(sc), dir);
    LoadOptions opts;
    opts.min_segment_pixels = 0;
    dataset = load_dataset(dir / "manifest", opts);
    model = ModelWeights::zeros(dataset.class_names, 2, -0.7, sc.app_dim, sc.ctx_dim);
    Rng rng(5);
    for (auto& d : model.detectors) {
      for (auto& v : d.appearance) v = rng.normal();
      for (auto& v : d.context) v = rng.normal();
      for (auto& v : d.segmentation) v = rng.normal();
    }
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_ScoreAllBoxes(benchmark::State& state) {
  const Fixture& f = fixture();
  const ImageData& image = f.dataset.images[0];
  for (auto _ : state) {
    double sum = 0;
    for (std::size_t b = 0; b < image.num_boxes(); ++b) sum += score_box(b, image, f.model, 1).score;
    benchmark::DoNotOptimize(sum);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * image.num_boxes()));
}
BENCHMARK(BM_ScoreAllBoxes);

void BM_DetectImage(benchmark::State& state) {
  const Fixture& f = fixture();
  const ImageData& image = f.dataset.images[0];
  const DetectConfig cfg;
  for (auto _ : state) {
    auto dets = detect_image(image, f.model, cfg);
    benchmark::DoNotOptimize(dets.data());
  }
}
BENCHMARK(BM_DetectImage);

}  // namespace
