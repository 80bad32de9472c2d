#include "e2f/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "binary.hpp"
#include "e2f/error.hpp"

namespace e2f {

void NoiseSchedule::validate() const {
  if (sigmas.size() < 2) throw Error("noise schedule needs at least one step");
  if (sigmas.back() != 0.0) throw Error("noise schedule must end in exactly 0");
  for (std::size_t i = 1; i < sigmas.size(); ++i) {
    if (!(sigmas[i] < sigmas[i - 1])) throw Error("noise schedule must be strictly decreasing");
  }
  if (!(sigma_data > 0.0)) throw Error("sigma_data must be > 0");
}

NoiseSchedule make_schedule(double sigma_min, double sigma_max, std::size_t steps, double rho,
                            double sigma_data) {
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min)) {
    throw Error("schedule needs 0 < sigma_min < sigma_max");
  }
  if (steps == 0) throw Error("schedule needs steps >= 1");
  if (!(rho > 0.0)) throw Error("schedule needs rho > 0");

  NoiseSchedule s;
  s.sigma_data = sigma_data;
  s.sigmas.resize(steps + 1);
  const double hi = std::pow(sigma_max, 1.0 / rho);
  const double lo = std::pow(sigma_min, 1.0 / rho);
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    s.sigmas[i] = std::pow(hi + frac * (lo - hi), rho);
  }
  s.sigmas.front() = sigma_max;
  if (steps > 1) s.sigmas[steps - 1] = sigma_min;
  s.sigmas.back() = 0.0;
  s.validate();
  return s;
}

NoiseSchedule make_schedule(const ScheduleParams& p) {
  return make_schedule(p.sigma_min, p.sigma_max, p.steps, p.rho, p.sigma_data);
}

double lambda_weight(double sigma, double sigma_data) {
  const double num = sigma * sigma + sigma_data * sigma_data;
  const double den = (sigma + sigma_data) * (sigma + sigma_data);
  return num / den;
}

double alpha_weight(double sigma) { return -std::expm1(-sigma); }

Latent forward_noise(const Latent& x0, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw Error("forward_noise needs sigma >= 0");
  Latent out = x0;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out.data.values()) v += sigma * normal(rng);
  return out;
}

double posterior_mean_gaussian(double x, double sigma, double mu, double s0) {
  if (!(s0 > 0.0)) throw Error("posterior mean needs s0 > 0");
  if (std::isinf(sigma)) return mu;
  const double a = s0 * s0;
  const double b = sigma * sigma;
  return (a * x + b * mu) / (a + b);
}

GaussianPosteriorDenoiser::GaussianPosteriorDenoiser(double mu, double s0) : mu_(mu), s0_(s0) {
  if (!(s0 > 0.0)) throw Error("Gaussian denoiser needs s0 > 0");
}

Tensor4 GaussianPosteriorDenoiser::denoise(const Tensor4& noisy, const EventVolume&, double sigma) const {
  Tensor4 out = noisy;
  for (double& v : out.values()) v = posterior_mean_gaussian(v, sigma, mu_, s0_);
  return out;
}

// ---------------------------------------------------------------------------------------------
// Toy denoiser

std::size_t ToyDenoiserSpec::parameter_count() const {
  if (architecture == ToyArchitecture::affine) return outputs() * inputs() + outputs();
  return hidden * inputs() + hidden + outputs() * hidden + outputs();
}

namespace {

struct Precond {
  double skip, out, in, noise;
};

Precond preconditioning(const ToyDenoiserSpec& spec, double sigma) {
  const double sd = spec.sigma_data;
  const double r = std::sqrt(sigma * sigma + sd * sd);
  Precond p;
  p.in = 1.0 / r;
  p.noise = std::log(std::max(sigma, 1e-12)) / 4.0;
  if (spec.preconditioned) {
    p.skip = sd * sd / (r * r);
    p.out = sigma * sd / r;
  } else {
    p.skip = 0.0;
    p.out = 1.0;
  }
  return p;
}

// Workspace for one pixel's forward/backward pass.
struct PixelPass {
  std::vector<double> z, pre, h, o;

  explicit PixelPass(const ToyDenoiserSpec& s)
      : z(s.inputs()), pre(s.hidden), h(s.hidden), o(s.outputs()) {}
};

void gather_inputs(const ToyDenoiserSpec& s, const Tensor4& noisy, const EventVolume& cond,
                   std::size_t pixel, const Precond& pc, std::vector<double>& z) {
  const std::size_t plane = noisy.shape().plane_size();
  const std::size_t fc = s.frames * s.channels;
  for (std::size_t j = 0; j < fc; ++j) z[j] = pc.in * noisy[j * plane + pixel];
  for (std::size_t j = 0; j < 3 * s.frames; ++j) z[fc + j] = s.event_scale * cond.data[j * plane + pixel];
  z[fc + 3 * s.frames] = pc.noise;
}

void forward(const ToyDenoiserSpec& s, std::span<const double> p, PixelPass& w) {
  const std::size_t ni = s.inputs(), no = s.outputs();
  if (s.architecture == ToyArchitecture::affine) {
    const double* W = p.data();
    const double* b = W + no * ni;
    for (std::size_t j = 0; j < no; ++j) {
      double acc = b[j];
      const double* row = W + j * ni;
      for (std::size_t i = 0; i < ni; ++i) acc += row[i] * w.z[i];
      w.o[j] = acc;
    }
    return;
  }
  const std::size_t nh = s.hidden;
  const double* W1 = p.data();
  const double* b1 = W1 + nh * ni;
  const double* W2 = b1 + nh;
  const double* b2 = W2 + no * nh;
  for (std::size_t m = 0; m < nh; ++m) {
    double acc = b1[m];
    const double* row = W1 + m * ni;
    for (std::size_t i = 0; i < ni; ++i) acc += row[i] * w.z[i];
    w.pre[m] = acc;
    w.h[m] = std::tanh(acc);
  }
  for (std::size_t j = 0; j < no; ++j) {
    double acc = b2[j];
    const double* row = W2 + j * nh;
    for (std::size_t m = 0; m < nh; ++m) acc += row[m] * w.h[m];
    w.o[j] = acc;
  }
}

// go: dL/do for each output; accumulates parameter gradients into g.
void backward(const ToyDenoiserSpec& s, std::span<const double> p, const PixelPass& w,
              std::span<const double> go, std::span<double> g, std::vector<double>& gh) {
  const std::size_t ni = s.inputs(), no = s.outputs();
  if (s.architecture == ToyArchitecture::affine) {
    double* gW = g.data();
    double* gb = gW + no * ni;
    for (std::size_t j = 0; j < no; ++j) {
      if (go[j] == 0.0) continue;
      double* row = gW + j * ni;
      for (std::size_t i = 0; i < ni; ++i) row[i] += go[j] * w.z[i];
      gb[j] += go[j];
    }
    return;
  }
  const std::size_t nh = s.hidden;
  const double* W2 = p.data() + nh * ni + nh;
  double* gW1 = g.data();
  double* gb1 = gW1 + nh * ni;
  double* gW2 = gb1 + nh;
  double* gb2 = gW2 + no * nh;
  std::fill(gh.begin(), gh.end(), 0.0);
  for (std::size_t j = 0; j < no; ++j) {
    const double gj = go[j];
    double* grow = gW2 + j * nh;
    const double* row = W2 + j * nh;
    for (std::size_t m = 0; m < nh; ++m) {
      grow[m] += gj * w.h[m];
      gh[m] += row[m] * gj;
    }
    gb2[j] += gj;
  }
  for (std::size_t m = 0; m < nh; ++m) {
    const double ga = gh[m] * (1.0 - w.h[m] * w.h[m]);
    double* grow = gW1 + m * ni;
    for (std::size_t i = 0; i < ni; ++i) grow[i] += ga * w.z[i];
    gb1[m] += ga;
  }
}

}  // namespace

ToyDenoiser::ToyDenoiser(ToyDenoiserSpec spec, std::uint64_t init_seed)
    : spec_(spec), params_(spec.parameter_count(), 0.0) {
  if (spec_.frames == 0 || spec_.channels == 0) throw Error("toy denoiser needs frames, channels >= 1");
  if (spec_.architecture == ToyArchitecture::mlp && spec_.hidden == 0) throw Error("mlp needs hidden >= 1");
  if (!(spec_.sigma_data > 0.0)) throw Error("sigma_data must be > 0");
  std::mt19937_64 rng(init_seed);
  const std::size_t ni = spec_.inputs(), no = spec_.outputs();
  if (spec_.architecture == ToyArchitecture::affine) {
    std::normal_distribution<double> n(0.0, 0.01 / std::sqrt(static_cast<double>(ni)));
    for (std::size_t i = 0; i < no * ni; ++i) params_[i] = n(rng);
  } else {
    const std::size_t nh = spec_.hidden;
    std::normal_distribution<double> n1(0.0, 1.0 / std::sqrt(static_cast<double>(ni)));
    std::normal_distribution<double> n2(0.0, 0.1 / std::sqrt(static_cast<double>(nh)));
    for (std::size_t i = 0; i < nh * ni; ++i) params_[i] = n1(rng);
    double* W2 = params_.data() + nh * ni + nh;
    for (std::size_t i = 0; i < no * nh; ++i) W2[i] = n2(rng);
  }
}

ToyDenoiser::ToyDenoiser(ToyDenoiserSpec spec, std::vector<double> parameters)
    : spec_(spec), params_(std::move(parameters)) {
  if (params_.size() != spec_.parameter_count()) {
    throw Error("toy denoiser expects " + std::to_string(spec_.parameter_count()) + " parameters, got " +
                std::to_string(params_.size()));
  }
}

void ToyDenoiser::check_shapes(const Tensor4& noisy, const EventVolume& cond) const {
  const Shape4& s = noisy.shape();
  if (s.frames != spec_.frames || s.channels != spec_.channels) {
    throw Error("toy denoiser built for " + std::to_string(spec_.frames) + " frames x " +
                std::to_string(spec_.channels) + " channels, got latent " + s.str());
  }
  const Shape4& c = cond.data.shape();
  if (c.frames != s.frames || c.channels != 3 || c.height != s.height || c.width != s.width) {
    throw Error("condition shape " + c.str() + " does not match latent " + s.str());
  }
}

Tensor4 ToyDenoiser::denoise(const Tensor4& noisy, const EventVolume& condition, double sigma) const {
  check_shapes(noisy, condition);
  const Precond pc = preconditioning(spec_, sigma);
  const std::size_t plane = noisy.shape().plane_size();
  const std::size_t fc = spec_.outputs();
  Tensor4 out(noisy.shape());
  const auto pixels = static_cast<std::ptrdiff_t>(plane);
#pragma omp parallel
  {
    PixelPass w(spec_);
#pragma omp for schedule(static)
    for (std::ptrdiff_t px = 0; px < pixels; ++px) {
      const auto pixel = static_cast<std::size_t>(px);
      gather_inputs(spec_, noisy, condition, pixel, pc, w.z);
      forward(spec_, params_, w);
      for (std::size_t j = 0; j < fc; ++j) {
        const std::size_t idx = j * plane + pixel;
        out[idx] = pc.skip * noisy[idx] + pc.out * w.o[j];
      }
    }
  }
  return out;
}

double ToyDenoiser::sample_loss(const Tensor4& clean, const Tensor4& noisy, const EventVolume& condition,
                                double sigma, std::span<double> grad) const {
  check_shapes(noisy, condition);
  if (clean.shape() != noisy.shape()) throw Error("clean/noisy shape mismatch");
  const Precond pc = preconditioning(spec_, sigma);
  const double lambda = lambda_weight(sigma, spec_.sigma_data);
  const double scale = lambda / static_cast<double>(clean.size());
  const std::size_t plane = noisy.shape().plane_size();
  const std::size_t fc = spec_.outputs();

  PixelPass w(spec_);
  std::vector<double> go(fc), gh(spec_.hidden);
  double loss = 0.0;
  for (std::size_t pixel = 0; pixel < plane; ++pixel) {
    gather_inputs(spec_, noisy, condition, pixel, pc, w.z);
    forward(spec_, params_, w);
    for (std::size_t j = 0; j < fc; ++j) {
      const std::size_t idx = j * plane + pixel;
      const double r = pc.skip * noisy[idx] + pc.out * w.o[j] - clean[idx];
      loss += scale * r * r;
      go[j] = 2.0 * scale * r * pc.out;
    }
    if (!grad.empty()) backward(spec_, params_, w, go, grad, gh);
  }
  return loss;
}

std::vector<NamedArray> ToyDenoiser::to_arrays() const {
  std::vector<NamedArray> arrays;
  arrays.push_back({"denoiser.spec",
                    {7},
                    {spec_.architecture == ToyArchitecture::affine ? 0.0 : 1.0,
                     static_cast<double>(spec_.frames), static_cast<double>(spec_.channels),
                     static_cast<double>(spec_.hidden), spec_.sigma_data,
                     spec_.preconditioned ? 1.0 : 0.0, spec_.event_scale}});
  const std::size_t ni = spec_.inputs(), no = spec_.outputs(), nh = spec_.hidden;
  auto slice = [&](std::size_t off, std::size_t n) {
    return std::vector<double>(params_.begin() + static_cast<std::ptrdiff_t>(off),
                               params_.begin() + static_cast<std::ptrdiff_t>(off + n));
  };
  if (spec_.architecture == ToyArchitecture::affine) {
    arrays.push_back({"denoiser.W", {no, ni}, slice(0, no * ni)});
    arrays.push_back({"denoiser.b", {no}, slice(no * ni, no)});
  } else {
    std::size_t off = 0;
    arrays.push_back({"denoiser.W1", {nh, ni}, slice(off, nh * ni)});
    off += nh * ni;
    arrays.push_back({"denoiser.b1", {nh}, slice(off, nh)});
    off += nh;
    arrays.push_back({"denoiser.W2", {no, nh}, slice(off, no * nh)});
    off += no * nh;
    arrays.push_back({"denoiser.b2", {no}, slice(off, no)});
  }
  return arrays;
}

ToyDenoiser ToyDenoiser::from_arrays(const std::vector<NamedArray>& arrays) {
  const NamedArray* spec_arr = find_array(arrays, "denoiser.spec");
  if (!spec_arr || spec_arr->data.size() != 7) throw Error("model has no valid denoiser.spec array");
  const auto& d = spec_arr->data;
  ToyDenoiserSpec spec;
  spec.architecture = d[0] == 0.0 ? ToyArchitecture::affine : ToyArchitecture::mlp;
  spec.frames = static_cast<std::size_t>(d[1]);
  spec.channels = static_cast<std::size_t>(d[2]);
  spec.hidden = static_cast<std::size_t>(d[3]);
  spec.sigma_data = d[4];
  spec.preconditioned = d[5] != 0.0;
  spec.event_scale = d[6];
  const std::vector<std::string> names = spec.architecture == ToyArchitecture::affine
                                             ? std::vector<std::string>{"denoiser.W", "denoiser.b"}
                                             : std::vector<std::string>{"denoiser.W1", "denoiser.b1",
                                                                        "denoiser.W2", "denoiser.b2"};
  std::vector<double> params;
  for (const auto& n : names) {
    const NamedArray* a = find_array(arrays, n);
    if (!a) throw Error("model is missing array " + n);
    params.insert(params.end(), a->data.begin(), a->data.end());
  }
  return ToyDenoiser(spec, std::move(params));
}

// ---------------------------------------------------------------------------------------------
// Training

namespace {

struct Draw {
  std::size_t pair;
  double sigma;
  std::uint64_t noise_seed;
};

Tensor4 noisy_from(const Tensor4& clean, double sigma, std::uint64_t seed) {
  Tensor4 x = clean;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : x.values()) v += sigma * normal(rng);
  return x;
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

double train_sigma(std::mt19937_64& rng, const TrainConfig& c) {
  if (c.log_uniform) return log_uniform(rng, c.sigma_min, c.sigma_max);
  std::normal_distribution<double> n(c.p_mean, c.p_std);
  return std::clamp(std::exp(n(rng)), c.sigma_min, c.sigma_max);
}

const EventVolume& condition_for(const TrainingPair& pair, bool zero_events, const EventVolume& zeros) {
  return zero_events ? zeros : pair.condition;
}

// Mean loss over draws; gradient (mean) written to grad when non-empty. Items run in parallel
// into private buffers that are summed in draw order, so results do not depend on thread count.
double batch_loss(const ToyDenoiser& model, const std::vector<TrainingPair>& data,
                  const std::vector<Draw>& draws, bool zero_events, std::span<double> grad) {
  const std::size_t P = model.spec().parameter_count();
  const auto n = static_cast<std::ptrdiff_t>(draws.size());
  std::vector<double> losses(draws.size(), 0.0);
  std::vector<std::vector<double>> grads(grad.empty() ? 0 : draws.size());
  std::vector<std::string> errors(draws.size());

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t b = 0; b < n; ++b) {
    const Draw& d = draws[static_cast<std::size_t>(b)];
    const TrainingPair& pair = data[d.pair];
    try {
      EventVolume zeros{Tensor4(pair.condition.data.shape())};
      const Tensor4 noisy = noisy_from(pair.clean, d.sigma, d.noise_seed);
      std::span<double> g;
      if (!grad.empty()) {
        grads[static_cast<std::size_t>(b)].assign(P, 0.0);
        g = grads[static_cast<std::size_t>(b)];
      }
      losses[static_cast<std::size_t>(b)] =
          model.sample_loss(pair.clean, noisy, condition_for(pair, zero_events, zeros), d.sigma, g);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(b)] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(e);
  }

  const double inv = 1.0 / static_cast<double>(draws.size());
  double loss = 0.0;
  for (double l : losses) loss += l;
  if (!grad.empty()) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& g : grads) {
      for (std::size_t i = 0; i < P; ++i) grad[i] += g[i];
    }
    for (double& g : grad) g *= inv;
  }
  return loss * inv;
}

std::vector<Draw> eval_draws(const std::vector<TrainingPair>& data, const TrainConfig& config,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Draw> draws;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < config.eval_draws; ++k) {
      const double sigma = log_uniform(rng, config.sigma_min, config.sigma_max);
      draws.push_back({i, sigma, rng()});
    }
  }
  return draws;
}

void validate_config(const TrainConfig& c) {
  if (c.learning_rate < 0.0 || c.final_lr_ratio < 0.0) throw Error("learning rate must be >= 0");
  if (!(c.sigma_min > 0.0) || !(c.sigma_max > c.sigma_min)) throw Error("need 0 < sigma_min < sigma_max");
  if (c.batch_size == 0) throw Error("batch size must be >= 1");
  if (!c.log_uniform && !(c.p_std > 0.0)) throw Error("log-normal sigma sampling needs p_std > 0");
}

}  // namespace

double evaluate_loss(const ToyDenoiser& model, const std::vector<TrainingPair>& data,
                     const TrainConfig& config, std::uint64_t eval_seed) {
  if (data.empty()) return 0.0;
  return batch_loss(model, data, eval_draws(data, config, eval_seed), config.zero_events, {});
}

double gradient_check(const ToyDenoiser& model, const std::vector<TrainingPair>& batch,
                      const std::vector<double>& sigmas, std::uint64_t noise_seed,
                      std::size_t coordinates, std::uint64_t pick_seed) {
  if (batch.size() != sigmas.size()) throw Error("gradient check needs one sigma per batch item");
  std::vector<Draw> draws;
  std::mt19937_64 seeds(noise_seed);
  for (std::size_t i = 0; i < batch.size(); ++i) draws.push_back({i, sigmas[i], seeds()});

  ToyDenoiser probe = model;
  std::vector<double> grad(model.spec().parameter_count());
  batch_loss(probe, batch, draws, false, grad);

  std::mt19937_64 pick(pick_seed);
  std::uniform_int_distribution<std::size_t> coord(0, grad.size() - 1);
  double worst = 0.0;
  for (std::size_t k = 0; k < coordinates; ++k) {
    const std::size_t i = coord(pick);
    const double theta = probe.parameters()[i];
    const double h = 1e-6 * std::max(1.0, std::abs(theta));
    probe.parameters()[i] = theta + h;
    const double up = batch_loss(probe, batch, draws, false, {});
    probe.parameters()[i] = theta - h;
    const double down = batch_loss(probe, batch, draws, false, {});
    probe.parameters()[i] = theta;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(grad[i]), std::abs(fd), 1e-6});
    worst = std::max(worst, std::abs(grad[i] - fd) / denom);
  }
  return worst;
}

TrainReport train_denoiser(ToyDenoiser& model, const std::vector<TrainingPair>& dataset,
                           const TrainConfig& config, const std::vector<TrainingPair>& eval) {
  if (dataset.empty()) throw Error("training needs a non-empty dataset");
  validate_config(config);
  TrainReport report;
  const std::uint64_t eval_seed = config.seed ^ 0x9e3779b97f4a7c15ULL;
  report.initial_eval_loss = evaluate_loss(model, eval, config, eval_seed);

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  auto draw_batch = [&] {
    std::vector<Draw> draws(config.batch_size);
    for (Draw& d : draws) {
      d.pair = pick(rng);
      d.sigma = train_sigma(rng, config);
      d.noise_seed = rng();
    }
    return draws;
  };

  if (config.check_gradient && !config.zero_events) {
    const auto draws = draw_batch();
    std::vector<TrainingPair> batch;
    std::vector<double> sigmas;
    for (const Draw& d : draws) {
      batch.push_back(dataset[d.pair]);
      sigmas.push_back(d.sigma);
    }
    report.gradient_check_max_rel_error = gradient_check(model, batch, sigmas, rng(), 10, rng());
    if (!(report.gradient_check_max_rel_error < 1e-4)) {
      throw Error("analytic gradient disagrees with finite differences (max rel error " +
                  std::to_string(report.gradient_check_max_rel_error) + ")");
    }
  }

  const std::size_t P = model.spec().parameter_count();
  std::vector<double> grad(P), m(P, 0.0), v(P, 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double interval_sum = 0.0;
  std::size_t interval_count = 0;
  const std::size_t log_every = std::max<std::size_t>(config.log_every, 1);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto draws = draw_batch();
    const double loss = batch_loss(model, dataset, draws, config.zero_events, grad);
    if (!std::isfinite(loss)) throw NonFiniteError(it, "training loss became non-finite");

    const double progress = static_cast<double>(it) / static_cast<double>(config.iterations);
    const double lr_end = config.learning_rate * config.final_lr_ratio;
    const double lr =
        lr_end + 0.5 * (config.learning_rate - lr_end) * (1.0 + std::cos(std::numbers::pi * progress));
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(it + 1));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(it + 1));
    auto params = model.parameters();
    for (std::size_t i = 0; i < P; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }

    interval_sum += loss;
    ++interval_count;
    if (interval_count == log_every || it + 1 == config.iterations) {
      report.loss_history.push_back(interval_sum / static_cast<double>(interval_count));
      interval_sum = 0.0;
      interval_count = 0;
    }
  }
  report.final_eval_loss = evaluate_loss(model, eval, config, eval_seed);
  return report;
}

// ---------------------------------------------------------------------------------------------
// Model container

namespace {
constexpr char kModelMagic[4] = {'E', '2', 'F', 'M'};
}

void write_model_container(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kModelMagic, 4);
  for (const NamedArray& a : arrays) {
    std::uint64_t count = 1;
    for (auto d : a.dims) count *= d;
    if (count != a.data.size()) throw Error("array " + a.name + " dims do not match its data");
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.dims.size()));
    for (auto d : a.dims) detail::put_le<std::uint64_t>(out, d);
    for (double v : a.data) detail::put_le<double>(out, v);
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<NamedArray> read_model_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kModelMagic)) {
    throw Error(path.string() + ": not an E2FM model file");
  }
  std::vector<NamedArray> arrays;
  std::uint32_t name_len = 0;
  while (detail::try_get_le(in, name_len)) {
    if (name_len > 4096) throw Error(path.string() + ": implausible array name length");
    NamedArray a;
    a.name.resize(name_len);
    if (!in.read(a.name.data(), name_len)) throw Error(path.string() + ": truncated array name");
    const auto rank = detail::get_le<std::uint32_t>(in, "array rank");
    if (rank > 8) throw Error(path.string() + ": implausible array rank");
    std::uint64_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      a.dims.push_back(detail::get_le<std::uint64_t>(in, "array dims"));
      count *= a.dims.back();
    }
    if (count > (std::uint64_t{1} << 32)) throw Error(path.string() + ": implausible array size");
    a.data.resize(count);
    for (double& v : a.data) v = detail::get_le<double>(in, "array data");
    arrays.push_back(std::move(a));
  }
  return arrays;
}

const NamedArray* find_array(const std::vector<NamedArray>& arrays, const std::string& name) {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

}  // namespace e2f
