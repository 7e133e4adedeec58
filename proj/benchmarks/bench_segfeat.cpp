#include <benchmark/benchmark.h>

#include <vector>

#include "segdet/rng.hpp"
#include "segdet/segfeat.hpp"

namespace {

using namespace segdet;

SegmentMask blob_mask(int side, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(side) * side, 0);
  for (int r = 0; r < 4; ++r) {
    const int x1 = rng.range(0, side - 1), x2 = rng.range(x1, side - 1);
    const int y1 = rng.range(0, side - 1), y2 = rng.range(y1, side - 1);
    for (int y = y1; y <= y2; ++y)
      for (int x = x1; x <= x2; ++x) bits[static_cast<std::size_t>(y) * side + x] = 1;
  }
  bits[0] = 1;
  return SegmentMask::from_bits("b", 0, side, side, bits);
}

Box half_box(int side) { return {side / 8.0, side / 8.0, side * 7.0 / 8.0, side * 7.0 / 8.0}; }

void BM_NaiveGeometry(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const GridSpec grid{static_cast<int>(state.range(1))};
  const SegmentMask mask = blob_mask(side, 3);
  const Box p = half_box(side);
  const std::int64_t largest = mask.pixel_count();
  for (auto _ : state) {
    auto a = naive::seggrid_in(p, mask, grid);
    auto b = naive::backgrid_in(p, mask, grid, largest);
    benchmark::DoNotOptimize(a);
    benchmark::DoNotOptimize(b);
    benchmark::DoNotOptimize(naive::seg_out(p, mask) + naive::back_out(p, mask, largest));
  }
}
BENCHMARK(BM_NaiveGeometry)->ArgsProduct({{32, 128, 512}, {1, 2, 3}});

void BM_IntegralGeometry(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const GridSpec grid{static_cast<int>(state.range(1))};
  const PreparedSegment s(blob_mask(side, 3), {0.0});
  const Box p = half_box(side);
  std::vector<double> out(geometry_length(grid.k));
  for (auto _ : state) {
    segment_geometry(p, s, grid, -0.7, s.pixels(), out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_IntegralGeometry)->ArgsProduct({{32, 128, 512}, {1, 2, 3}});

void BM_IntegralBuild(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const SegmentMask mask = blob_mask(side, 3);
  for (auto _ : state) {
    IntegralMask im(mask);
    benchmark::DoNotOptimize(im.total());
  }
}
BENCHMARK(BM_IntegralBuild)->Arg(32)->Arg(128)->Arg(512);

}  // namespace
