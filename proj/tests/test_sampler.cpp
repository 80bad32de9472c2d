#include <doctest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>

#include "e2f/error.hpp"
#include "e2f/sampler.hpp"
#include "support.hpp"

using namespace e2f;

namespace {

class ZeroDenoiser final : public Denoiser {
 public:
  Tensor4 denoise(const Tensor4& noisy, const EventVolume&, double) const override { return Tensor4(noisy.shape()); }
};

class NanDenoiser final : public Denoiser {
 public:
  explicit NanDenoiser(std::size_t bad_step_sigma_index) : bad_(bad_step_sigma_index) {}
  Tensor4 denoise(const Tensor4& noisy, const EventVolume&, double) const override {
    Tensor4 out(noisy.shape());
    if (calls_++ == bad_) out[0] = std::numeric_limits<double>::quiet_NaN();
    return out;
  }

 private:
  std::size_t bad_;
  mutable std::size_t calls_ = 0;
};

struct Recorder final : public EstimateHook {
  HookStage which;
  std::string tag;
  std::vector<std::string>* log;
  std::vector<StepInfo>* infos;
  HookStage stage() const override { return which; }
  void apply(Tensor4&, const StepInfo& info) const override {
    log->push_back(tag + std::to_string(info.step));
    if (infos) infos->push_back(info);
  }
};

EventVolume empty_condition(std::size_t frames = 1) { return EventVolume{Tensor4(Shape4{frames, 3, 1, 1})}; }

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("reverse step arithmetic") {
  const Tensor4 x(Shape4{1, 1, 1, 1}, 2.0), u(Shape4{1, 1, 1, 1}, 1.0);
  CHECK(reverse_step(x, u, 1.0, 0.5)[0] == 1.5);
  CHECK(reverse_step(x, u, 1.0, 1.0) == x);
  const Tensor4 r = testing::random_tensor(Shape4{2, 1, 3, 3}, 1, -5, 5);
  const Tensor4 e = testing::random_tensor(Shape4{2, 1, 3, 3}, 2, -5, 5);
  CHECK(reverse_step(r, e, 3.7, 0.0) == e);
  CHECK_THROWS_AS(reverse_step(x, u, 1.0, 1.5), Error);
  CHECK_THROWS_AS(reverse_step(x, u, 0.0, 0.0), Error);
}

TEST_CASE("steps contract toward the estimate and telescope to it") {
  const auto sched = make_schedule(ScheduleParams{});
  Tensor4 x = testing::random_tensor(Shape4{1, 1, 4, 4}, 3, -80, 80);
  const Tensor4 u = testing::random_tensor(Shape4{1, 1, 4, 4}, 4);
  for (std::size_t k = 0; k < sched.steps(); ++k) {
    const Tensor4 next = reverse_step(x, u, sched.sigmas[k], sched.sigmas[k + 1]);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(std::abs(next[i] - u[i]) <= std::abs(x[i] - u[i]) * (1.0 + 1e-12));
    }
    x = next;
  }
  CHECK(x == u);
}

TEST_CASE("zero estimate gives exactly zero for any seed") {
  ZeroDenoiser d;
  for (std::uint64_t seed : {0ULL, 1ULL, 12345ULL}) {
    SamplerConfig cfg;
    cfg.schedule = make_schedule(ScheduleParams{});
    cfg.latent_shape = Shape4{2, 1, 3, 3};
    cfg.seed = seed;
    const Latent out = sample(d, empty_condition(), cfg);
    for (double v : out.data.values()) CHECK(v == 0.0);
    CHECK(out.sigma_index == 30);
  }
}

TEST_CASE("sampling is bit-reproducible and seed-dependent") {
  GaussianPosteriorDenoiser d(0.7, 0.2);
  SamplerConfig cfg;
  cfg.schedule = make_schedule(ScheduleParams{});
  cfg.latent_shape = Shape4{3, 1, 5, 5};
  cfg.seed = 42;
  const Latent a = sample(d, empty_condition(), cfg);
  const Latent b = sample(d, empty_condition(), cfg);
  CHECK(a.data == b.data);
  cfg.seed = 43;
  CHECK_FALSE(sample(d, empty_condition(), cfg).data == a.data);
}

TEST_CASE("gaussian data moments") {
  GaussianPosteriorDenoiser d(0.7, 0.2);
  SamplerConfig cfg;
  cfg.schedule = make_schedule(ScheduleParams{});
  cfg.latent_shape = Shape4{1, 1, 50, 50};
  cfg.seed = 1;
  const Latent out = sample(d, empty_condition(), cfg);
  double s1 = 0, s2 = 0;
  for (double v : out.data.values()) {
    s1 += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(out.data.size());
  const double mean = s1 / n, sd = std::sqrt(s2 / n - mean * mean);
  CHECK(std::abs(mean - 0.7) < 0.02);
  CHECK(std::abs(sd - 0.2) < 0.03);
}

TEST_CASE("hooks: window, ordering and disabled paths") {
  ZeroDenoiser d;
  std::vector<std::string> log;
  std::vector<StepInfo> infos;
  auto mod = std::make_shared<Recorder>();
  mod->which = HookStage::modulation;
  mod->tag = "m";
  mod->log = &log;
  mod->infos = nullptr;
  auto guide = std::make_shared<Recorder>();
  guide->which = HookStage::guidance;
  guide->tag = "g";
  guide->log = &log;
  guide->infos = &infos;

  SamplerConfig cfg;
  cfg.schedule = make_schedule(0.01, 10.0, 6, 7.0);
  cfg.latent_shape = Shape4{1, 1, 1, 1};

  SUBCASE("window of 0 never calls guidance hooks") {
    cfg.hooks = {guide};
    sample(d, empty_condition(), cfg);
    CHECK(log.empty());
  }
  SUBCASE("guidance runs in the last tau steps, after modulation") {
    cfg.guidance_window = 2;
    cfg.hooks = {guide, mod};  // registration order does not matter
    sample(d, empty_condition(), cfg);
    CHECK(log == std::vector<std::string>{"m0", "m1", "m2", "m3", "m4", "g4", "m5", "g5"});
    REQUIRE(infos.size() == 2);
    CHECK(infos[0].window_index == 0);
    CHECK(infos[1].window_index == 1);
    CHECK(infos[1].sigma_next == 0.0);
    CHECK(infos[0].window == 2);
  }
  SUBCASE("window larger than the schedule is rejected") {
    cfg.guidance_window = 7;
    CHECK_THROWS_AS(sample(d, empty_condition(), cfg), Error);
  }
}

TEST_CASE("dumps every k steps") {
  ZeroDenoiser d;
  SamplerConfig cfg;
  cfg.schedule = make_schedule(0.01, 10.0, 6, 7.0);
  cfg.latent_shape = Shape4{1, 1, 2, 2};
  cfg.dump_every = 2;
  std::vector<std::size_t> steps;
  cfg.on_dump = [&](std::size_t k, const Tensor4& x) {
    steps.push_back(k);
    CHECK(x.shape() == cfg.latent_shape);
  };
  sample(d, empty_condition(), cfg);
  CHECK(steps == std::vector<std::size_t>{1, 3, 5});
}

TEST_CASE("non-finite latents abort with the step index") {
  NanDenoiser d(4);
  SamplerConfig cfg;
  cfg.schedule = make_schedule(ScheduleParams{});
  cfg.latent_shape = Shape4{1, 1, 2, 2};
  try {
    sample(d, empty_condition(), cfg);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(e.step() == 4);
  }
}

TEST_CASE("decode") {
  const Tensor4 u = testing::random_tensor(Shape4{3, 2, 2, 3}, 5, -1, 1);
  const Latent lat{u, 30};
  CHECK(decode(lat, Decoder::identity()).data == u);

  const FrameShape fs{2, 2, 3};
  const Decoder twice = Decoder::linear(2.0 * Eigen::MatrixXd::Identity(12, 12), fs, fs);
  const auto d2 = decode(lat, twice);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(d2.data[i] == 2.0 * u[i]);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  Eigen::MatrixXd a(20, 12);
  for (Eigen::Index i = 0; i < 20; ++i)
    for (Eigen::Index j = 0; j < 12; ++j) a(i, j) = n(rng);
  const FrameShape out_shape{1, 4, 5};
  const Decoder lin = Decoder::linear(a, fs, out_shape);
  const auto got = decode(lat, lin).data;
  CHECK(got.shape() == Shape4{3, 1, 4, 5});
  double worst = 0.0;
  for (std::size_t f = 0; f < 3; ++f)
    for (int i = 0; i < 20; ++i) {
      double acc = 0.0;
      for (int j = 0; j < 12; ++j) acc += a(i, j) * u.frame(f)[static_cast<std::size_t>(j)];
      worst = std::max(worst, std::abs(acc - got.frame(f)[static_cast<std::size_t>(i)]));
    }
  CHECK(worst <= 1e-12);
  CHECK(lin.apply(u) == lin.apply_serial(u));

  // encoder inverts the decoder on its range, adjoint matches the transpose
  const Tensor4 back = lin.encode(lin.apply(u));
  CHECK(max_abs_diff(back, u) < 1e-10);
  const Tensor4 y = testing::random_tensor(Shape4{3, 1, 4, 5}, 9);
  double lhs = 0, rhs = 0;
  const Tensor4 au = lin.apply(u), aty = lin.adjoint(y);
  for (std::size_t i = 0; i < au.size(); ++i) lhs += au[i] * y[i];
  for (std::size_t i = 0; i < u.size(); ++i) rhs += u[i] * aty[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  CHECK_THROWS_AS(lin.apply(testing::random_tensor(Shape4{3, 1, 4, 5}, 1)), Error);
  CHECK_THROWS_AS(Decoder::linear(Eigen::MatrixXd::Zero(12, 12), fs, fs), Error);
  CHECK_THROWS_AS(Decoder::linear(Eigen::MatrixXd::Ones(4, 12), fs, FrameShape{1, 2, 2}), Error);
  CHECK_THROWS_AS(decode(lat, Decoder::identity(), FrameTimeline::uniform(2, 1.0)), Error);
}

}  // TEST_SUITE
