#include "e2f/sampler.hpp"

#include <algorithm>
#include <random>

#include "e2f/error.hpp"

namespace e2f {

Tensor4 reverse_step(const Tensor4& x, const Tensor4& u, double sigma, double sigma_prev) {
  if (!(sigma > 0.0)) throw Error("reverse step needs sigma_t > 0");
  if (sigma_prev < 0.0) throw Error("reverse step needs sigma_prev >= 0");
  if (sigma_prev > sigma) throw Error("reverse step needs sigma_prev <= sigma_t");
  if (x.shape() != u.shape()) throw Error("reverse step shape mismatch");
  if (sigma_prev == 0.0) return u;
  const double ds = sigma - sigma_prev;
  Tensor4 out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - (x[i] - u[i]) / sigma * ds;
  return out;
}

Latent sample(const Denoiser& denoiser, const EventVolume& condition, const SamplerConfig& config) {
  config.schedule.validate();
  const std::size_t steps = config.schedule.steps();
  if (config.guidance_window > steps) throw Error("guidance window exceeds the number of steps");
  if (config.latent_shape.size() == 0) throw Error("sampler needs a non-empty latent shape");

  std::vector<const EstimateHook*> modulation, guidance;
  for (const auto& h : config.hooks) {
    if (!h) continue;
    (h->stage() == HookStage::modulation ? modulation : guidance).push_back(h.get());
  }

  Tensor4 x(config.latent_shape);
  {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = config.schedule.sigma_max();
    for (double& v : x.values()) v = s * normal(rng);
  }

  const std::size_t window_start = steps - config.guidance_window;
  for (std::size_t k = 0; k < steps; ++k) {
    StepInfo info;
    info.step = k;
    info.steps = steps;
    info.sigma = config.schedule.sigmas[k];
    info.sigma_next = config.schedule.sigmas[k + 1];
    info.window = config.guidance_window;

    Tensor4 u = denoiser.denoise(x, condition, info.sigma);
    if (u.shape() != x.shape()) throw Error("denoiser changed the latent shape");
    for (const EstimateHook* h : modulation) h->apply(u, info);
    if (k >= window_start) {
      info.window_index = k - window_start;
      for (const EstimateHook* h : guidance) h->apply(u, info);
    }
    x = reverse_step(x, u, info.sigma, info.sigma_next);
    if (!all_finite(x)) throw NonFiniteError(k, "latent became non-finite during sampling");
    if (config.on_dump && config.dump_every > 0 && (k + 1) % config.dump_every == 0) config.on_dump(k, x);
  }
  return Latent{std::move(x), steps};
}

FrameSequence decode(const Latent& latent, const Decoder& decoder, const FrameTimeline& timeline) {
  FrameSequence seq{decoder.apply(latent.data), timeline};
  if (timeline.frames() != seq.data.shape().frames) throw Error("timeline length does not match latent frames");
  return seq;
}

FrameSequence decode(const Latent& latent, const Decoder& decoder) {
  return decode(latent, decoder, FrameTimeline::uniform(std::max<std::size_t>(latent.data.shape().frames, 1), 1.0));
}

}  // namespace e2f
