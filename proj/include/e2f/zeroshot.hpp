#pragma once

#include <optional>
#include <string>
#include <vector>

#include "e2f/sampler.hpp"

namespace e2f {

enum class ReferenceMode { interpolation, prediction };

struct ReferenceFrame {
  std::size_t index = 0;
  Tensor4 latent;  // 1 x C x H x W clean latent of frame `index`
};

// Clean reference latents, sorted by frame index.
//
// prediction: exactly one reference. interpolation: two or more; each consecutive pair bounds a
// segment that is modulated with that pair's deviations.
struct ReferenceSet {
  ReferenceMode mode = ReferenceMode::prediction;
  std::vector<ReferenceFrame> refs;

  static ReferenceSet prediction(Tensor4 first);
  static ReferenceSet interpolation(Tensor4 first, Tensor4 last, std::size_t last_index);
  static ReferenceSet segmented(std::vector<ReferenceFrame> refs);

  // Pick the reference frames out of a full latent sequence.
  static ReferenceSet from_sequence(const Tensor4& latents, const std::vector<std::size_t>& indices,
                                    ReferenceMode mode);

  void validate(std::size_t frames) const;
};

struct Deviations {
  Tensor4 d0;
  std::optional<Tensor4> df;
};

// D0 = E(V_0) - U_0 and, for interpolation, DF = E(V_last) - U_last (first and last reference).
Deviations deviations(const Tensor4& estimate, const ReferenceSet& refs);
// One deviation per reference, in reference order.
std::vector<Tensor4> reference_deviations(const Tensor4& estimate, const ReferenceSet& refs);

// alpha * (((D0 + U) + (DF + U)) / 2) + (1 - alpha) * U, elementwise.
Tensor4 modulate_interp(const Tensor4& u, const Tensor4& d0, const Tensor4& df, double alpha);
// alpha * (D0 + U) + (1 - alpha) * U, elementwise.
Tensor4 modulate_predict(const Tensor4& u, const Tensor4& d0, double alpha);

enum class WeightMode { nonlinear, linear_descending, linear_ascending, constant };

WeightMode parse_weight_mode(const std::string& name);
std::string to_string(WeightMode mode);

// nonlinear: 1 - exp(-sigma); linear-descending 1 - k/(T-1); linear-ascending k/(T-1); constant 0.5.
double weight(WeightMode mode, double sigma, std::size_t step, std::size_t steps);

enum class ZeroShotTask { vfi4, vfi11, vfp };

ZeroShotTask parse_zeroshot_task(const std::string& name);
std::string to_string(ZeroShotTask task);

struct FrameLayout {
  std::vector<std::size_t> references;
  std::vector<std::size_t> targets;
};

// vfi4: references every 4th frame from 0, targets strictly between consecutive references.
// vfi11: references {0, F-1}, targets 1..F-2. vfp: reference {0}, targets 1..F-1.
FrameLayout vfi_layout(ZeroShotTask task, std::size_t frames = 12);

struct ModulationOptions {
  WeightMode weight = WeightMode::nonlinear;
  double sigma_scale = 1.0;             // alpha uses sigma * sigma_scale in nonlinear mode
  std::optional<double> terminal_alpha;  // overrides alpha at the final step
};

// Replaces U^t by the reference-corrected estimate at every sampling step.
//
// prediction: every frame gets modulate_predict with D0. interpolation: frames of segment
// [r_j, r_{j+1}] get modulate_interp with (D_j, D_{j+1}); a reference shared by two segments
// gets the mean of both results; frames outside [r_first, r_last] are left alone.
class ModulationHook final : public EstimateHook {
 public:
  ModulationHook(ReferenceSet refs, ModulationOptions options);

  HookStage stage() const override { return HookStage::modulation; }
  void apply(Tensor4& estimate, const StepInfo& info) const override;

  double alpha(const StepInfo& info) const;

 private:
  ReferenceSet refs_;
  ModulationOptions options_;
};

}  // namespace e2f
