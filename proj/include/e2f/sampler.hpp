#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "e2f/decoder.hpp"
#include "e2f/diffusion.hpp"
#include "e2f/events.hpp"
#include "e2f/simulator.hpp"

namespace e2f {

// x_{t-1} = x_t - (x_t - u_t) / sigma_t * (sigma_t - sigma_prev); returns u_t exactly at sigma_prev = 0.
Tensor4 reverse_step(const Tensor4& x, const Tensor4& u, double sigma, double sigma_prev);

struct StepInfo {
  std::size_t step = 0;   // 0 .. steps-1, step 0 runs at sigma_max
  std::size_t steps = 0;
  double sigma = 0.0;
  double sigma_next = 0.0;
  std::size_t window_index = 0;  // position inside the guidance window (guidance hooks only)
  std::size_t window = 0;
};

enum class HookStage { modulation, guidance };

// Rewrites the clean-latent estimate U^t before the reverse step. Modulation hooks run every
// step and before guidance hooks; guidance hooks run only in the last `guidance_window` steps.
class EstimateHook {
 public:
  virtual ~EstimateHook() = default;
  virtual HookStage stage() const = 0;
  virtual void apply(Tensor4& estimate, const StepInfo& info) const = 0;
};

struct SamplerConfig {
  NoiseSchedule schedule;
  Shape4 latent_shape{};
  std::size_t guidance_window = 0;
  std::vector<std::shared_ptr<const EstimateHook>> hooks;
  std::uint64_t seed = 0;
  // Called with (step, x after the step) every dump_every steps when set.
  std::size_t dump_every = 0;
  std::function<void(std::size_t, const Tensor4&)> on_dump;
};

// Deterministic reverse sampling from X^T ~ N(0, sigma_T^2 I). Throws NonFiniteError on blow-up.
Latent sample(const Denoiser& denoiser, const EventVolume& condition, const SamplerConfig& config);

FrameSequence decode(const Latent& latent, const Decoder& decoder, const FrameTimeline& timeline);
FrameSequence decode(const Latent& latent, const Decoder& decoder);

}  // namespace e2f
