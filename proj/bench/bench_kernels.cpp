// Serial reference loops against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>

#include "e2f/eval.hpp"
#include "e2f/guidance.hpp"
#include "e2f/pipeline.hpp"

using namespace e2f;

namespace {

ToySceneOptions scene(std::int64_t side) {
  ToySceneOptions o;
  o.height = o.width = static_cast<std::size_t>(side);
  return o;
}

Tensor4 noise(Shape4 s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor4 t(s);
  for (double& v : t.values()) v = u(rng);
  return t;
}

template <bool Serial>
void BM_Simulate(benchmark::State& state) {
  const FrameSequence seq = make_toy_sequence(1, scene(state.range(0)));
  const SimConfig sim;
  for (auto _ : state) {
    benchmark::DoNotOptimize(Serial ? simulate_events_serial(seq, sim) : simulate_events(seq, sim));
  }
}

template <bool Serial>
void BM_Stack(benchmark::State& state) {
  const FrameSequence seq = make_toy_sequence(1, scene(state.range(0)));
  const EventStream s = simulate_events(seq, SimConfig{});
  const auto groups = group_events(s, seq.timeline);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Serial ? stack_events_serial(groups, s.width, s.height)
                                    : stack_events(groups, s.width, s.height));
  }
}

template <bool Serial>
void BM_DecoderApply(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Decoder d = make_mixing_decoder(FrameShape{1, side, side}, 2);
  const Tensor4 u = noise(Shape4{12, 1, side, side}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Serial ? d.apply_serial(u) : d.apply(u));
}

template <bool Serial>
void BM_ResidualGrad(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Decoder d = make_mixing_decoder(FrameShape{1, side, side}, 2);
  const Tensor4 u = noise(Shape4{12, 1, side, side}, 3);
  const ResidualField r{noise(Shape4{11, 1, side, side}, 4)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(Serial ? residual_grad_serial(u, r, d) : residual_grad(u, r, d));
  }
}

template <bool Serial>
void BM_Mse(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Tensor4 a = noise(Shape4{12, 3, side, side}, 5), b = noise(Shape4{12, 3, side, side}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(Serial ? mse_serial(a, b) : mse(a, b));
}

template <bool Serial>
void BM_Ssim(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Tensor4 a = noise(Shape4{12, 1, side, side}, 5), b = noise(Shape4{12, 1, side, side}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(Serial ? ssim_serial(a, b) : ssim(a, b));
}

}  // namespace

BENCHMARK(BM_Simulate<true>)->Name("simulate/serial")->Arg(32)->Arg(128);
BENCHMARK(BM_Simulate<false>)->Name("simulate/parallel")->Arg(32)->Arg(128);
BENCHMARK(BM_Stack<true>)->Name("stack/serial")->Arg(32)->Arg(128);
BENCHMARK(BM_Stack<false>)->Name("stack/parallel")->Arg(32)->Arg(128);
BENCHMARK(BM_DecoderApply<true>)->Name("decoder_apply/serial")->Arg(16)->Arg(32);
BENCHMARK(BM_DecoderApply<false>)->Name("decoder_apply/parallel")->Arg(16)->Arg(32);
BENCHMARK(BM_ResidualGrad<true>)->Name("residual_grad/serial")->Arg(16)->Arg(32);
BENCHMARK(BM_ResidualGrad<false>)->Name("residual_grad/parallel")->Arg(16)->Arg(32);
BENCHMARK(BM_Mse<true>)->Name("mse/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Mse<false>)->Name("mse/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_Ssim<true>)->Name("ssim/serial")->Arg(64)->Arg(128);
BENCHMARK(BM_Ssim<false>)->Name("ssim/parallel")->Arg(64)->Arg(128);

BENCHMARK_MAIN();
