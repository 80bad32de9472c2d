#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "e2f/diffusion.hpp"
#include "e2f/error.hpp"
#include "e2f/pipeline.hpp"
#include "support.hpp"

using namespace e2f;

TEST_SUITE("diffusion") {

TEST_CASE("schedule endpoints and monotonicity") {
  const auto one = make_schedule(0.002, 80.0, 1, 7.0);
  REQUIRE(one.sigmas.size() == 2);
  CHECK(one.sigmas[0] == 80.0);
  CHECK(one.sigmas[1] == 0.0);

  const auto two = make_schedule(0.5, 3.0, 2, 1.0);
  CHECK(two.sigmas == std::vector<double>{3.0, 0.5, 0.0});

  const auto s = make_schedule(ScheduleParams{});
  REQUIRE(s.steps() == 30);
  CHECK(s.sigmas.front() == 80.0);
  CHECK(s.sigmas[29] == 0.002);
  CHECK(s.sigmas.back() == 0.0);
  for (std::size_t i = 1; i < s.sigmas.size(); ++i) CHECK(s.sigmas[i] < s.sigmas[i - 1]);

  // interior points follow the rho-warped interpolation
  const double a = std::pow(80.0, 1 / 7.0), b = std::pow(0.002, 1 / 7.0);
  CHECK(s.sigmas[10] == doctest::Approx(std::pow(a + (10.0 / 29.0) * (b - a), 7.0)).epsilon(1e-13));

  CHECK_THROWS_AS(make_schedule(1.0, 0.5, 10, 7.0), Error);
  CHECK_THROWS_AS(make_schedule(0.0, 0.5, 10, 7.0), Error);
  CHECK_THROWS_AS(make_schedule(0.1, 0.5, 0, 7.0), Error);
  CHECK_THROWS_AS(make_schedule(0.1, 0.5, 3, 0.0), Error);
}

TEST_CASE("lambda weight") {
  CHECK(lambda_weight(0.5, 0.5) == 0.5);
  CHECK(lambda_weight(0.0, 0.5) == 1.0);
  CHECK(lambda_weight(3.0, 1.0) == 0.625);
  for (double s = 0.0; s < 50.0; s += 0.37) {
    const double l = lambda_weight(s, 0.5);
    CHECK(l > 0.0);
    CHECK(l <= 1.0);
  }
}

TEST_CASE("alpha weight") {
  CHECK(alpha_weight(0.0) == 0.0);
  CHECK(std::abs(alpha_weight(std::log(2.0)) - 0.5) <= 1e-15);
  CHECK(std::abs(alpha_weight(80.0) - 1.0) <= 1e-15);
  double prev = -1.0;
  for (double s = 0.0; s < 10.0; s += 0.25) {
    const double a = alpha_weight(s);
    CHECK(a > prev);
    CHECK(a < 1.0 + 1e-300);
    prev = a;
  }
}

TEST_CASE("forward noise") {
  const Latent x0{testing::random_tensor(Shape4{10, 1, 100, 100}, 1), 0};
  CHECK(forward_noise(x0, 0.0, 3).data == x0.data);
  const Latent a = forward_noise(x0, 0.7, 3);
  const Latent b = forward_noise(x0, 0.7, 3);
  CHECK(a.data == b.data);
  double s2 = 0.0;
  for (std::size_t i = 0; i < x0.data.size(); ++i) s2 += (a.data[i] - x0.data[i]) * (a.data[i] - x0.data[i]);
  const double sd = std::sqrt(s2 / static_cast<double>(x0.data.size()));
  CHECK(std::abs(sd - 0.7) < 0.01 * 0.7);
}

TEST_CASE("gaussian posterior mean") {
  CHECK(posterior_mean_gaussian(1.3, 0.0, 0.7, 0.2) == 1.3);
  CHECK(posterior_mean_gaussian(1.3, std::numeric_limits<double>::infinity(), 0.7, 0.2) == 0.7);
  CHECK(posterior_mean_gaussian(1.3, 1e8, 0.7, 0.2) == doctest::Approx(0.7));
  CHECK(posterior_mean_gaussian(2.0, 1.0, 0.0, 1.0) == 1.0);
  // near-deterministic data: the posterior mean recovers x0
  const double x0 = 0.42;
  CHECK(posterior_mean_gaussian(x0 + 0.3, 0.3, x0, 1e-9) == doctest::Approx(x0).epsilon(1e-12));
}

TEST_CASE("toy denoiser gradients match finite differences") {
  for (ToyArchitecture arch : {ToyArchitecture::affine, ToyArchitecture::mlp}) {
    for (bool pre : {true, false}) {
      ToyDenoiserSpec spec;
      spec.architecture = arch;
      spec.frames = 4;
      spec.hidden = 6;
      spec.preconditioned = pre;
      spec.event_scale = 0.1;
      ToyDenoiser model(spec, 5);
      std::vector<TrainingPair> batch;
      for (std::uint64_t i = 0; i < 3; ++i) {
        ToySceneOptions o;
        o.frames = 4;
        o.height = 3;
        o.width = 3;
        const auto s = make_toy_sample(i, o, SimConfig{});
        batch.push_back({s.frames.data, s.volume});
      }
      const double err = gradient_check(model, batch, {0.05, 0.9, 12.0}, 1, 10, 2);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("denoiser preserves shape and rejects mismatches") {
  ToyDenoiserSpec spec;
  spec.frames = 3;
  spec.hidden = 4;
  ToyDenoiser model(spec, 1);
  const Tensor4 x = testing::random_tensor(Shape4{3, 1, 2, 5}, 2);
  const EventVolume e{Tensor4(Shape4{3, 3, 2, 5})};
  CHECK(model.denoise(x, e, 0.3).shape() == x.shape());
  CHECK(model.denoise(x, e, 0.3) == model.denoise(x, e, 0.3));
  CHECK_THROWS_AS(model.denoise(testing::random_tensor(Shape4{4, 1, 2, 5}, 2), e, 0.3), Error);
  CHECK_THROWS_AS(model.denoise(x, EventVolume{Tensor4(Shape4{3, 3, 2, 4})}, 0.3), Error);
}

namespace {

// Clean latents are an exact affine function of the event channels.
std::vector<TrainingPair> linear_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(-3, 3);
  std::vector<TrainingPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor4 e(Shape4{3, 3, 4, 4});
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t p = 0; p < 16; ++p) {
        const int pos = std::abs(count(rng)), neg = -std::abs(count(rng));
        e[(f * 3 + 1) * 16 + p] = pos;
        e[(f * 3 + 2) * 16 + p] = neg;
        e[(f * 3 + 0) * 16 + p] = pos + neg;
      }
    Tensor4 x(Shape4{3, 1, 4, 4});
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t p = 0; p < 16; ++p) x[f * 16 + p] = 0.3 + 0.1 * e[(f * 3) * 16 + p] - 0.05 * e[(f * 3 + 1) * 16 + p];
    out.push_back({x, EventVolume{e}});
  }
  return out;
}

}  // namespace

TEST_CASE("affine model solves a linear dataset") {
  ToyDenoiserSpec spec;
  spec.architecture = ToyArchitecture::affine;
  spec.frames = 3;
  spec.preconditioned = false;
  ToyDenoiser model(spec, 3);
  const auto data = linear_dataset(16, 1);
  TrainConfig tc;
  tc.iterations = 3000;
  tc.learning_rate = 0.01;
  tc.final_lr_ratio = 0.001;
  tc.seed = 4;
  tc.log_every = 100;
  const TrainReport r = train_denoiser(model, data, tc, data);
  CHECK(r.gradient_check_max_rel_error < 1e-4);
  CHECK(r.final_eval_loss < 1e-4 * r.initial_eval_loss);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  ToyDenoiserSpec spec;
  spec.frames = 3;
  spec.hidden = 5;
  ToyDenoiser model(spec, 3);
  const std::vector<double> before(model.parameters().begin(), model.parameters().end());
  TrainConfig tc;
  tc.iterations = 20;
  tc.learning_rate = 0.0;
  train_denoiser(model, linear_dataset(4, 2), tc);
  CHECK(std::equal(before.begin(), before.end(), model.parameters().begin()));
}

TEST_CASE("training is deterministic and its loss trends down") {
  ToyDenoiserSpec spec;
  spec.frames = 3;
  spec.hidden = 8;
  const auto data = linear_dataset(8, 5);
  TrainConfig tc;
  tc.iterations = 800;
  tc.learning_rate = 0.005;
  tc.log_every = 50;
  tc.seed = 9;
  ToyDenoiser a(spec, 1), b(spec, 1);
  const TrainReport ra = train_denoiser(a, data, tc);
  train_denoiser(b, data, tc);
  CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  // moving average over 4 logging intervals is non-increasing
  const auto& h = ra.loss_history;
  REQUIRE(h.size() == 16);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 4 <= h.size(); i += 4) {
    const double m = std::accumulate(h.begin() + i, h.begin() + i + 4, 0.0) / 4.0;
    CHECK(m <= prev);
    prev = m;
  }
}

TEST_CASE("events lower the held-out loss") {
  ToySceneOptions o;
  o.height = 6;
  o.width = 6;
  std::vector<TrainingPair> train, held;
  for (std::uint64_t i = 0; i < 24; ++i) {
    const auto s = make_toy_sample(100 + i, o, SimConfig{});
    (i < 16 ? train : held).push_back({s.frames.data, s.volume});
  }
  ToyDenoiserSpec spec;
  spec.hidden = 16;
  spec.event_scale = 0.05;
  TrainConfig tc;
  tc.iterations = 600;
  tc.learning_rate = 0.003;
  tc.seed = 2;
  tc.eval_draws = 16;
  ToyDenoiser with(spec, 7), without(spec, 7);
  const TrainReport rw = train_denoiser(with, train, tc, held);
  tc.zero_events = true;
  const TrainReport ro = train_denoiser(without, train, tc, held);
  CHECK(rw.final_eval_loss < ro.final_eval_loss);
}

TEST_CASE("non-finite data aborts training") {
  ToyDenoiserSpec spec;
  spec.frames = 3;
  spec.hidden = 4;
  ToyDenoiser model(spec, 1);
  auto data = linear_dataset(2, 1);
  data[0].clean[0] = std::numeric_limits<double>::quiet_NaN();
  data[1].clean[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.iterations = 5;
  tc.check_gradient = false;
  CHECK_THROWS_AS(train_denoiser(model, data, tc), NonFiniteError);
}

TEST_CASE("model container round trip") {
  testing::TempDir dir("model");
  ToyDenoiserSpec spec;
  spec.frames = 5;
  spec.hidden = 7;
  spec.event_scale = 0.25;
  const ToyDenoiser model(spec, 11);
  write_model_container(dir / "m.e2fm", model.to_arrays());
  const ToyDenoiser back = ToyDenoiser::from_arrays(read_model_container(dir / "m.e2fm"));
  CHECK(back.spec().hidden == 7);
  CHECK(back.spec().event_scale == 0.25);
  CHECK(std::equal(model.parameters().begin(), model.parameters().end(), back.parameters().begin()));

  {
    std::ofstream bad(dir / "bad.e2fm", std::ios::binary);
    bad << "NOPE";
  }
  CHECK_THROWS_AS(read_model_container(dir / "bad.e2fm"), Error);
}

}  // TEST_SUITE
