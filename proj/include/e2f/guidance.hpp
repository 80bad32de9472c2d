#pragma once

#include <array>
#include <string>
#include <vector>

#include "e2f/decoder.hpp"
#include "e2f/diffusion.hpp"
#include "e2f/sampler.hpp"
#include "e2f/simulator.hpp"

namespace e2f {

// Maps an event volume to inter-frame residual targets R ((F-1) x C x H x W).
class ResidualPredictor {
 public:
  enum class Kind { oracle, learned };

  // R_k = threshold * (signed event sum of interval k).
  static ResidualPredictor oracle(double threshold, std::size_t channels = 1);
  // Per-channel affine map (ch0, ch1, ch2, 1) -> dV, fitted by least squares on ground truth.
  static ResidualPredictor fit(const std::vector<Tensor4>& frames, const std::vector<EventVolume>& volumes);

  Kind kind() const { return kind_; }
  std::size_t channels() const { return channels_; }
  const std::vector<std::array<double, 4>>& coefficients() const { return coef_; }

  ResidualField predict(const EventVolume& volume) const;

  std::vector<NamedArray> to_arrays() const;
  static ResidualPredictor from_arrays(const std::vector<NamedArray>& arrays);

 private:
  Kind kind_ = Kind::oracle;
  double threshold_ = 0.0;
  std::size_t channels_ = 1;
  std::vector<std::array<double, 4>> coef_;
};

enum class GuidanceMode { off, constant, linear, increasing, exponential };

GuidanceMode parse_guidance_mode(const std::string& name);
std::string to_string(GuidanceMode mode);

struct GuidanceSchedule {
  GuidanceMode mode = GuidanceMode::linear;
  double s_max = 0.1;
  std::size_t window = 10;
};

// Strength at position k of the window: constant s_max; linear s_max (1 - k/(tau-1));
// increasing s_max k/(tau-1); exponential s_max exp(-5 k/(tau-1)); off 0.
double schedule_strength(const GuidanceSchedule& schedule, std::size_t k);

// sum |D(U_{k+1}) - D(U_k) - R_k| over all elements.
double residual_loss(const Tensor4& latent, const ResidualField& residual, const Decoder& decoder);

// Subgradient of residual_loss with sign(0) = 0: the sign field S_k of each difference is pushed
// back through the difference operator (frame f gets S_{f-1} - S_f) and then through A^T.
Tensor4 residual_grad(const Tensor4& latent, const ResidualField& residual, const Decoder& decoder);
Tensor4 residual_grad_serial(const Tensor4& latent, const ResidualField& residual, const Decoder& decoder);

// U - s * grad.
Tensor4 guide(const Tensor4& latent, const ResidualField& residual, double strength, const Decoder& decoder);

// Largest step along -grad for which no residual entry changes sign, i.e. the loss stays on its
// current linear piece and decreases linearly. 0 if some entry sits on a kink it would leave;
// +inf if no entry ever reaches a kink.
double max_descent_step(const Tensor4& latent, const ResidualField& residual, const Decoder& decoder);

// Guidance as a sampler hook; active only inside the sampler's guidance window.
class GuidanceHook final : public EstimateHook {
 public:
  GuidanceHook(GuidanceSchedule schedule, ResidualField residual, Decoder decoder);

  HookStage stage() const override { return HookStage::guidance; }
  void apply(Tensor4& estimate, const StepInfo& info) const override;

 private:
  GuidanceSchedule schedule_;
  ResidualField residual_;
  Decoder decoder_;
};

}  // namespace e2f
