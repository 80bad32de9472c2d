#include "e2f/zeroshot.hpp"

#include "e2f/error.hpp"

namespace e2f {

namespace {

void check_single(const Tensor4& t, const char* what) {
  if (t.shape().frames != 1) throw Error(std::string(what) + " must be a single frame, got " + t.shape().str());
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("modulation weight must lie in [0, 1]");
}

}  // namespace

ReferenceSet ReferenceSet::prediction(Tensor4 first) {
  check_single(first, "reference");
  ReferenceSet r;
  r.mode = ReferenceMode::prediction;
  r.refs.push_back({0, std::move(first)});
  return r;
}

ReferenceSet ReferenceSet::interpolation(Tensor4 first, Tensor4 last, std::size_t last_index) {
  check_single(first, "reference");
  check_single(last, "reference");
  if (last_index == 0) throw Error("interpolation needs the last reference after frame 0");
  ReferenceSet r;
  r.mode = ReferenceMode::interpolation;
  r.refs.push_back({0, std::move(first)});
  r.refs.push_back({last_index, std::move(last)});
  return r;
}

ReferenceSet ReferenceSet::segmented(std::vector<ReferenceFrame> refs) {
  if (refs.size() < 2) throw Error("interpolation needs at least two references");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    check_single(refs[i].latent, "reference");
    if (i > 0 && refs[i].index <= refs[i - 1].index) throw Error("reference indices must increase");
  }
  ReferenceSet r;
  r.mode = ReferenceMode::interpolation;
  r.refs = std::move(refs);
  return r;
}

ReferenceSet ReferenceSet::from_sequence(const Tensor4& latents, const std::vector<std::size_t>& indices,
                                         ReferenceMode mode) {
  std::vector<ReferenceFrame> refs;
  for (std::size_t i : indices) {
    if (i >= latents.shape().frames) throw Error("reference index " + std::to_string(i) + " outside the sequence");
    refs.push_back({i, latents.frame_tensor(i)});
  }
  if (mode == ReferenceMode::prediction) {
    if (refs.size() != 1 || refs[0].index != 0) throw Error("prediction needs exactly the reference of frame 0");
    return prediction(std::move(refs[0].latent));
  }
  return segmented(std::move(refs));
}

void ReferenceSet::validate(std::size_t frames) const {
  if (refs.empty()) throw Error("reference set is empty");
  if (mode == ReferenceMode::prediction && refs.size() != 1) throw Error("prediction takes exactly one reference");
  if (mode == ReferenceMode::interpolation && refs.size() < 2) throw Error("interpolation needs two references");
  const Shape4& s0 = refs.front().latent.shape();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].latent.shape() != s0 || s0.frames != 1) throw Error("reference latents differ in shape");
    if (refs[i].index >= frames) throw Error("reference index " + std::to_string(refs[i].index) + " out of range");
    if (i > 0 && refs[i].index <= refs[i - 1].index) throw Error("reference indices must increase");
  }
}

std::vector<Tensor4> reference_deviations(const Tensor4& estimate, const ReferenceSet& refs) {
  refs.validate(estimate.shape().frames);
  std::vector<Tensor4> out;
  out.reserve(refs.refs.size());
  for (const auto& r : refs.refs) {
    Tensor4 u = estimate.frame_tensor(r.index);
    if (u.shape() != r.latent.shape()) {
      throw Error("reference shape " + r.latent.shape().str() + " does not match latent frame " + u.shape().str());
    }
    out.push_back(r.latent - u);
  }
  return out;
}

Deviations deviations(const Tensor4& estimate, const ReferenceSet& refs) {
  auto d = reference_deviations(estimate, refs);
  Deviations out{std::move(d.front()), std::nullopt};
  if (refs.mode == ReferenceMode::interpolation) out.df = std::move(d.back());
  return out;
}

Tensor4 modulate_interp(const Tensor4& u, const Tensor4& d0, const Tensor4& df, double alpha) {
  check_alpha(alpha);
  if (u.shape() != d0.shape() || u.shape() != df.shape()) throw Error("modulation shape mismatch");
  Tensor4 out(u.shape());
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[i] = alpha * (((d0[i] + u[i]) + (df[i] + u[i])) / 2.0) + (1.0 - alpha) * u[i];
  }
  return out;
}

Tensor4 modulate_predict(const Tensor4& u, const Tensor4& d0, double alpha) {
  check_alpha(alpha);
  if (u.shape() != d0.shape()) throw Error("modulation shape mismatch");
  Tensor4 out(u.shape());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = alpha * (d0[i] + u[i]) + (1.0 - alpha) * u[i];
  return out;
}

WeightMode parse_weight_mode(const std::string& name) {
  if (name == "nonlinear") return WeightMode::nonlinear;
  if (name == "linear-descending") return WeightMode::linear_descending;
  if (name == "linear-ascending") return WeightMode::linear_ascending;
  if (name == "constant") return WeightMode::constant;
  throw Error("unknown weight schedule '" + name + "' (nonlinear|linear-descending|linear-ascending|constant)");
}

std::string to_string(WeightMode mode) {
  switch (mode) {
    case WeightMode::nonlinear: return "nonlinear";
    case WeightMode::linear_descending: return "linear-descending";
    case WeightMode::linear_ascending: return "linear-ascending";
    case WeightMode::constant: return "constant";
  }
  return "?";
}

double weight(WeightMode mode, double sigma, std::size_t step, std::size_t steps) {
  if (steps == 0 || step >= steps) throw Error("weight step index out of range");
  const double pos = steps == 1 ? 0.0 : static_cast<double>(step) / static_cast<double>(steps - 1);
  switch (mode) {
    case WeightMode::nonlinear:
      if (!(sigma >= 0.0)) throw Error("nonlinear weight needs sigma >= 0");
      return alpha_weight(sigma);
    case WeightMode::linear_descending: return 1.0 - pos;
    case WeightMode::linear_ascending: return pos;
    case WeightMode::constant: return 0.5;
  }
  return 0.0;
}

ZeroShotTask parse_zeroshot_task(const std::string& name) {
  if (name == "vfi4") return ZeroShotTask::vfi4;
  if (name == "vfi11") return ZeroShotTask::vfi11;
  if (name == "vfp") return ZeroShotTask::vfp;
  throw Error("unknown zero-shot task '" + name + "' (vfi4|vfi11|vfp)");
}

std::string to_string(ZeroShotTask task) {
  switch (task) {
    case ZeroShotTask::vfi4: return "vfi4";
    case ZeroShotTask::vfi11: return "vfi11";
    case ZeroShotTask::vfp: return "vfp";
  }
  return "?";
}

FrameLayout vfi_layout(ZeroShotTask task, std::size_t frames) {
  FrameLayout l;
  switch (task) {
    case ZeroShotTask::vfi4:
      if (frames < 5) throw Error("vfi4 needs at least 5 frames");
      for (std::size_t r = 0; r < frames; r += 4) l.references.push_back(r);
      break;
    case ZeroShotTask::vfi11:
      if (frames < 3) throw Error("vfi11 needs at least 3 frames");
      l.references = {0, frames - 1};
      break;
    case ZeroShotTask::vfp:
      if (frames < 2) throw Error("vfp needs at least 2 frames");
      l.references = {0};
      for (std::size_t f = 1; f < frames; ++f) l.targets.push_back(f);
      return l;
  }
  for (std::size_t j = 0; j + 1 < l.references.size(); ++j) {
    for (std::size_t f = l.references[j] + 1; f < l.references[j + 1]; ++f) l.targets.push_back(f);
  }
  return l;
}

ModulationHook::ModulationHook(ReferenceSet refs, ModulationOptions options)
    : refs_(std::move(refs)), options_(options) {
  if (refs_.refs.empty()) throw Error("modulation needs references");
  if (!(options_.sigma_scale > 0.0)) throw Error("sigma scale must be > 0");
  if (options_.terminal_alpha) check_alpha(*options_.terminal_alpha);
}

double ModulationHook::alpha(const StepInfo& info) const {
  if (options_.terminal_alpha && info.step + 1 == info.steps) return *options_.terminal_alpha;
  return weight(options_.weight, info.sigma * options_.sigma_scale, info.step, info.steps);
}

void ModulationHook::apply(Tensor4& estimate, const StepInfo& info) const {
  const double a = alpha(info);
  const auto dev = reference_deviations(estimate, refs_);
  const std::size_t frames = estimate.shape().frames;

  if (refs_.mode == ReferenceMode::prediction) {
    for (std::size_t f = 0; f < frames; ++f) {
      estimate.set_frame(f, modulate_predict(estimate.frame_tensor(f), dev[0], a));
    }
    return;
  }

  const Tensor4 original = estimate;
  const auto& r = refs_.refs;
  for (std::size_t f = r.front().index; f <= r.back().index; ++f) {
    const Tensor4 u = original.frame_tensor(f);
    Tensor4 acc;
    std::size_t hits = 0;
    for (std::size_t j = 0; j + 1 < r.size(); ++j) {
      if (f < r[j].index || f > r[j + 1].index) continue;
      Tensor4 m = modulate_interp(u, dev[j], dev[j + 1], a);
      if (hits == 0) {
        acc = std::move(m);
      } else {
        acc += m;
      }
      ++hits;
    }
    if (hits > 1) acc *= 1.0 / static_cast<double>(hits);
    estimate.set_frame(f, acc);
  }
}

}  // namespace e2f
