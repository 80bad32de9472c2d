#include <doctest.h>

#include <cmath>
#include <limits>

#include "e2f/bounds.hpp"
#include "e2f/error.hpp"
#include "e2f/guidance.hpp"
#include "e2f/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace e2f;

namespace {

Tensor4 pixel_pair(double a, double b) { return Tensor4(Shape4{2, 1, 1, 1}, {a, b}); }
ResidualField one_residual(double r) { return ResidualField{Tensor4(Shape4{1, 1, 1, 1}, {r})}; }

Eigen::MatrixXd dense(const Decoder& d) {
  return d.kind() == Decoder::Kind::identity ? Eigen::MatrixXd() : d.matrix();
}

}  // namespace

TEST_SUITE("guidance") {

TEST_CASE("single pixel pair: loss, subgradient and one step") {
  const Tensor4 u = pixel_pair(0.0, 1.0);
  const auto r = one_residual(0.5);
  const Decoder id = Decoder::identity();
  CHECK(residual_loss(u, r, id) == doctest::Approx(0.5).epsilon(1e-15));
  const Tensor4 g = residual_grad(u, r, id);
  CHECK(g[0] == -1.0);
  CHECK(g[1] == 1.0);
  const Tensor4 next = guide(u, r, 0.1, id);
  CHECK(std::abs(next[0] - 0.1) < 1e-15);
  CHECK(std::abs(next[1] - 0.9) < 1e-15);
  CHECK(std::abs(residual_loss(next, r, id) - 0.3) < 1e-12);
}

TEST_CASE("zero loss gives a zero subgradient") {
  const Tensor4 u = pixel_pair(0.25, 0.75);
  const auto r = one_residual(0.5);
  const Tensor4 g = residual_grad(u, r, Decoder::identity());
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(guide(u, r, 0.3, Decoder::identity()) == u);
}

TEST_CASE("doubling the decoder doubles the loss of a doubled target") {
  const Tensor4 u = testing::random_tensor(Shape4{5, 1, 3, 3}, 11, -1, 1);
  ResidualField r{testing::random_tensor(Shape4{4, 1, 3, 3}, 12, -0.2, 0.2)};
  const FrameShape fs{1, 3, 3};
  const Decoder one = Decoder::linear(Eigen::MatrixXd::Identity(9, 9), fs, fs);
  const Decoder two = Decoder::linear(2.0 * Eigen::MatrixXd::Identity(9, 9), fs, fs);
  ResidualField r2{2.0 * r.data};
  CHECK(residual_loss(u, r2, two) == doctest::Approx(2.0 * residual_loss(u, r, one)).epsilon(1e-13));
  ResidualField zero{Tensor4(r.data.shape())};
  CHECK(residual_loss(u, zero, two) == doctest::Approx(2.0 * residual_loss(u, zero, one)).epsilon(1e-13));
}

TEST_CASE("loss matches the naive oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const BoundInstance inst = make_random_instance(seed);
    const double got = residual_loss(inst.latents, inst.residual, inst.decoder);
    CHECK(got == doctest::Approx(oracle::residual_loss(dense(inst.decoder), inst.latents, inst.residual.data)).epsilon(1e-12));
  }
}

TEST_CASE("subgradient matches central differences away from kinks") {
  RandomInstanceOptions opts;
  opts.max_side = 4;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const BoundInstance inst = make_random_instance(seed, opts);
    const Tensor4 g = residual_grad(inst.latents, inst.residual, inst.decoder);
    const auto fd = oracle::fd_check(dense(inst.decoder), inst.latents, inst.residual.data, g, 20, seed);
    CHECK(fd.checked == 20);
    CHECK(fd.worst_rel_error < 1e-5);
  }
}

TEST_CASE("parallel and serial gradients agree") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const BoundInstance inst = make_random_instance(seed);
    const Tensor4 a = residual_grad(inst.latents, inst.residual, inst.decoder);
    const Tensor4 b = residual_grad_serial(inst.latents, inst.residual, inst.decoder);
    CHECK(max_abs_diff(a, b) < 1e-12);
  }
  const Tensor4 u = testing::random_tensor(Shape4{6, 3, 4, 5}, 3, -1, 1);
  ResidualField r{testing::random_tensor(Shape4{5, 3, 4, 5}, 4, -0.1, 0.1)};
  CHECK(residual_grad(u, r, Decoder::identity()) == residual_grad_serial(u, r, Decoder::identity()));
}

TEST_CASE("tiny guided steps do not increase the loss") {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const BoundInstance inst = make_random_instance(1000 + seed);
    const double before = residual_loss(inst.latents, inst.residual, inst.decoder);
    const double after = residual_loss(guide(inst.latents, inst.residual, 1e-6, inst.decoder), inst.residual, inst.decoder);
    ok += after <= before;
  }
  CHECK(ok >= 99);
}

TEST_CASE("steps inside the descent range decrease the loss linearly") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const BoundInstance inst = make_random_instance(2000 + seed);
    const Tensor4 g = residual_grad(inst.latents, inst.residual, inst.decoder);
    const double smax = max_descent_step(inst.latents, inst.residual, inst.decoder);
    REQUIRE(smax > 0.0);
    const double s = std::isfinite(smax) ? 0.5 * smax : 1.0;
    double gsq = 0.0;
    for (double v : g.values()) gsq += v * v;
    const double before = residual_loss(inst.latents, inst.residual, inst.decoder);
    const double after = residual_loss(guide(inst.latents, inst.residual, s, inst.decoder), inst.residual, inst.decoder);
    CHECK(after == doctest::Approx(before - s * gsq).epsilon(1e-9).scale(before));
  }
}

TEST_CASE("ground-truth latents have at most C loss per residual entry") {
  SimConfig sim;
  sim.contrast_threshold = 0.05;
  ToySceneOptions scene;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto sample = make_toy_sample(seed, scene, sim);
    const auto r = ResidualPredictor::oracle(0.05).predict(sample.volume);
    const double entries = static_cast<double>(r.data.size());
    const Decoder id = Decoder::identity();
    CHECK(residual_loss(sample.frames.data, r, id) <= 0.05 * entries + 1e-9);
    const Decoder mix = make_mixing_decoder(FrameShape{1, scene.height, scene.width}, seed);
    const Tensor4 exact = mix.encode(sample.frames.data);
    CHECK(residual_loss(exact, r, mix) <= 0.05 * entries + 1e-9);
  }
}

TEST_CASE("strength schedules") {
  GuidanceSchedule s{GuidanceMode::linear, 0.1, 10};
  CHECK(schedule_strength(s, 0) == doctest::Approx(0.1));
  CHECK(schedule_strength(s, 9) == 0.0);
  CHECK(schedule_strength(s, 3) == doctest::Approx(0.1 * (1.0 - 3.0 / 9.0)));
  s.mode = GuidanceMode::constant;
  for (std::size_t k = 0; k < 10; ++k) CHECK(schedule_strength(s, k) == 0.1);
  s.mode = GuidanceMode::increasing;
  CHECK(schedule_strength(s, 0) == 0.0);
  CHECK(schedule_strength(s, 9) == doctest::Approx(0.1));
  s.mode = GuidanceMode::exponential;
  CHECK(schedule_strength(s, 0) == doctest::Approx(0.1));
  CHECK(schedule_strength(s, 9) == doctest::Approx(0.1 * std::exp(-5.0)));
  for (std::size_t k = 1; k < 10; ++k) CHECK(schedule_strength(s, k) < schedule_strength(s, k - 1));
  s.mode = GuidanceMode::off;
  CHECK(schedule_strength(s, 4) == 0.0);
  const GuidanceSchedule one{GuidanceMode::linear, 0.1, 1};
  CHECK(schedule_strength(one, 0) == 0.1);
  CHECK_THROWS_AS(schedule_strength(s, 10), Error);
  CHECK(parse_guidance_mode("exponential") == GuidanceMode::exponential);
  CHECK(to_string(GuidanceMode::increasing) == "increasing");
  CHECK_THROWS(parse_guidance_mode("cubic"));
}

TEST_CASE("negative strength and shape mismatch throw") {
  const Tensor4 u = pixel_pair(0.0, 1.0);
  CHECK_THROWS(guide(u, one_residual(0.5), -0.1, Decoder::identity()));
  ResidualField bad{Tensor4(Shape4{2, 1, 1, 1})};
  CHECK_THROWS(residual_loss(u, bad, Decoder::identity()));
}

TEST_CASE("max descent step reaches the first kink") {
  const Tensor4 u = pixel_pair(0.0, 1.0);
  const auto r = one_residual(0.5);
  // d = 1 - 0.5 = 0.5, grad (-1, 1), d shrinks by 2s -> kink at s = 0.25.
  CHECK(max_descent_step(u, r, Decoder::identity()) == doctest::Approx(0.25));
  CHECK(max_descent_step(pixel_pair(0.25, 0.75), r, Decoder::identity()) == std::numeric_limits<double>::infinity());
}

TEST_CASE("learned predictor recovers the event-to-residual map") {
  SimConfig sim;
  sim.contrast_threshold = 0.05;
  ToySceneOptions scene;
  std::vector<Tensor4> frames;
  std::vector<EventVolume> volumes;
  for (std::uint64_t s = 0; s < 6; ++s) {
    auto sample = make_toy_sample(s, scene, sim);
    frames.push_back(sample.frames.data);
    volumes.push_back(sample.volume);
  }
  const auto p = ResidualPredictor::fit(frames, volumes);
  REQUIRE(p.coefficients().size() == 1);
  const auto sample = make_toy_sample(99, scene, sim);
  const ResidualField r = p.predict(sample.volume);
  const ResidualField truth = frame_differences(sample.frames.data);
  CHECK(max_abs_diff(r.data, truth.data) <= 1.1 * 0.05);

  const auto back = ResidualPredictor::from_arrays(p.to_arrays());
  CHECK(back.predict(sample.volume).data == r.data);
  const auto o = ResidualPredictor::oracle(0.05);
  CHECK(ResidualPredictor::from_arrays(o.to_arrays()).predict(sample.volume).data == o.predict(sample.volume).data);
}

TEST_CASE("guidance hook rejects a mismatched window") {
  GuidanceHook hook({GuidanceMode::linear, 0.1, 3}, one_residual(0.5), Decoder::identity());
  Tensor4 u = pixel_pair(0.0, 1.0);
  StepInfo info;
  info.steps = 5;
  info.window = 4;
  CHECK_THROWS(hook.apply(u, info));
  info.window = 3;
  info.window_index = 0;
  hook.apply(u, info);
  CHECK(std::abs(u[0] - 0.1) < 1e-15);
}

}
