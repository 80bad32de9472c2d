#include "e2f/guidance.hpp"

#include <cmath>
#include <limits>

#include "e2f/error.hpp"

namespace e2f {

ResidualPredictor ResidualPredictor::oracle(double threshold, std::size_t channels) {
  if (!(threshold > 0.0)) throw Error("oracle residual predictor needs a threshold > 0");
  if (channels == 0) throw Error("residual predictor needs channels >= 1");
  ResidualPredictor p;
  p.kind_ = Kind::oracle;
  p.threshold_ = threshold;
  p.channels_ = channels;
  return p;
}

ResidualPredictor ResidualPredictor::fit(const std::vector<Tensor4>& frames,
                                         const std::vector<EventVolume>& volumes) {
  if (frames.empty() || frames.size() != volumes.size()) {
    throw Error("residual fit needs matching, non-empty frame and volume lists");
  }
  const std::size_t channels = frames.front().shape().channels;
  ResidualPredictor p;
  p.kind_ = Kind::learned;
  p.channels_ = channels;
  p.coef_.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    Eigen::Matrix4d gram = Eigen::Matrix4d::Zero();
    Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
    for (std::size_t n = 0; n < frames.size(); ++n) {
      const Tensor4& v = frames[n];
      const Tensor4& e = volumes[n].data;
      if (v.shape().channels != channels || v.shape().frames != e.shape().frames ||
          v.shape().height != e.shape().height || v.shape().width != e.shape().width) {
        throw Error("residual fit: frames " + v.shape().str() + " do not match volume " + e.shape().str());
      }
      for (std::size_t k = 0; k + 1 < v.shape().frames; ++k) {
        for (std::size_t y = 0; y < v.shape().height; ++y) {
          for (std::size_t x = 0; x < v.shape().width; ++x) {
            const Eigen::Vector4d z(e(k + 1, 0, y, x), e(k + 1, 1, y, x), e(k + 1, 2, y, x), 1.0);
            gram += z * z.transpose();
            rhs += z * (v(k + 1, c, y, x) - v(k, c, y, x));
          }
        }
      }
    }
    // Channel 0 is the sum of the other two, so the system is singular; a tiny ridge picks the
    // minimum-norm-like solution without changing the predictions.
    gram += 1e-9 * Eigen::Matrix4d::Identity();
    const Eigen::Vector4d w = gram.ldlt().solve(rhs);
    p.coef_[c] = {w[0], w[1], w[2], w[3]};
  }
  return p;
}

ResidualField ResidualPredictor::predict(const EventVolume& volume) const {
  const Shape4& vs = volume.data.shape();
  if (vs.channels != 3 || vs.frames < 1) throw Error("residual predictor needs an F x 3 x H x W volume");
  if (kind_ == Kind::oracle) {
    SimConfig sim;
    sim.contrast_threshold = threshold_;
    return residual_from_events(volume, sim, channels_);
  }
  Tensor4 out(Shape4{vs.frames - 1, channels_, vs.height, vs.width});
  for (std::size_t k = 0; k + 1 < vs.frames; ++k) {
    for (std::size_t c = 0; c < channels_; ++c) {
      const auto& w = coef_[c];
      for (std::size_t y = 0; y < vs.height; ++y) {
        for (std::size_t x = 0; x < vs.width; ++x) {
          out(k, c, y, x) = w[0] * volume.data(k + 1, 0, y, x) + w[1] * volume.data(k + 1, 1, y, x) +
                            w[2] * volume.data(k + 1, 2, y, x) + w[3];
        }
      }
    }
  }
  return ResidualField{std::move(out)};
}

std::vector<NamedArray> ResidualPredictor::to_arrays() const {
  NamedArray a{"residual.predictor", {}, {}};
  if (kind_ == Kind::oracle) {
    a.dims = {3};
    a.data = {0.0, threshold_, static_cast<double>(channels_)};
  } else {
    a.dims = {2 + 4 * channels_};
    a.data = {1.0, static_cast<double>(channels_)};
    for (const auto& w : coef_) a.data.insert(a.data.end(), w.begin(), w.end());
  }
  return {a};
}

ResidualPredictor ResidualPredictor::from_arrays(const std::vector<NamedArray>& arrays) {
  const NamedArray* a = find_array(arrays, "residual.predictor");
  if (!a || a->data.empty()) throw Error("model has no residual.predictor array");
  if (a->data[0] == 0.0) {
    if (a->data.size() != 3) throw Error("malformed oracle residual predictor");
    return oracle(a->data[1], static_cast<std::size_t>(a->data[2]));
  }
  ResidualPredictor p;
  p.kind_ = Kind::learned;
  p.channels_ = static_cast<std::size_t>(a->data.at(1));
  if (a->data.size() != 2 + 4 * p.channels_) throw Error("malformed learned residual predictor");
  for (std::size_t c = 0; c < p.channels_; ++c) {
    p.coef_.push_back({a->data[2 + 4 * c], a->data[3 + 4 * c], a->data[4 + 4 * c], a->data[5 + 4 * c]});
  }
  return p;
}

GuidanceMode parse_guidance_mode(const std::string& name) {
  if (name == "off") return GuidanceMode::off;
  if (name == "constant") return GuidanceMode::constant;
  if (name == "linear") return GuidanceMode::linear;
  if (name == "increasing") return GuidanceMode::increasing;
  if (name == "exponential") return GuidanceMode::exponential;
  throw Error("unknown guidance mode '" + name + "' (off|constant|linear|increasing|exponential)");
}

std::string to_string(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::off: return "off";
    case GuidanceMode::constant: return "constant";
    case GuidanceMode::linear: return "linear";
    case GuidanceMode::increasing: return "increasing";
    case GuidanceMode::exponential: return "exponential";
  }
  return "?";
}

double schedule_strength(const GuidanceSchedule& schedule, std::size_t k) {
  if (schedule.s_max < 0.0) throw Error("guidance s_max must be >= 0");
  if (k >= schedule.window) throw Error("guidance step " + std::to_string(k) + " outside window");
  const double pos = schedule.window == 1
                         ? 0.0
                         : static_cast<double>(k) / static_cast<double>(schedule.window - 1);
  switch (schedule.mode) {
    case GuidanceMode::off: return 0.0;
    case GuidanceMode::constant: return schedule.s_max;
    case GuidanceMode::linear: return schedule.s_max * (1.0 - pos);
    case GuidanceMode::increasing: return schedule.window == 1 ? schedule.s_max : schedule.s_max * pos;
    case GuidanceMode::exponential: return schedule.s_max * std::exp(-5.0 * pos);
  }
  return 0.0;
}

namespace {

void check_residual(const Shape4& decoded, const ResidualField& r) {
  const Shape4& rs = r.data.shape();
  if (decoded.frames == 0 || rs.frames + 1 != decoded.frames || rs.channels != decoded.channels ||
      rs.height != decoded.height || rs.width != decoded.width) {
    throw Error("residual shape " + rs.str() + " does not match decoded frames " + decoded.str());
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// (D(U_{k+1}) - D(U_k)) - R_k for one difference index.
void difference_residual(const Tensor4& decoded, const ResidualField& r, std::size_t k, std::span<double> out) {
  auto a = decoded.frame(k);
  auto b = decoded.frame(k + 1);
  auto t = r.data.frame(k);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (b[i] - a[i]) - t[i];
}

// Pixel-space subgradient for frame f: S_{f-1} - S_f.
void pull_back_frame(const Tensor4& decoded, const ResidualField& r, std::size_t f, std::span<double> out,
                     std::vector<double>& scratch) {
  const std::size_t F = decoded.shape().frames;
  std::fill(out.begin(), out.end(), 0.0);
  if (f > 0) {
    difference_residual(decoded, r, f - 1, scratch);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign(scratch[i]);
  }
  if (f + 1 < F) {
    difference_residual(decoded, r, f, scratch);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= sign(scratch[i]);
  }
}

}  // namespace

double residual_loss(const Tensor4& latent, const ResidualField& residual, const Decoder& decoder) {
  const Tensor4 decoded = decoder.apply(latent);
  check_residual(decoded.shape(), residual);
  std::vector<double> d(decoded.shape().frame_size());
  double loss = 0.0;
  for (std::size_t k = 0; k + 1 < decoded.shape().frames; ++k) {
    difference_residual(decoded, residual, k, d);
    for (double v : d) loss += std::abs(v);
  }
  return loss;
}

Tensor4 residual_grad(const Tensor4& latent, const ResidualField& residual, const Decoder& decoder) {
  const Tensor4 decoded = decoder.apply(latent);
  check_residual(decoded.shape(), residual);
  Tensor4 pixel_grad(decoded.shape());
  const auto frames = static_cast<std::ptrdiff_t>(decoded.shape().frames);
#pragma omp parallel
  {
    std::vector<double> scratch(decoded.shape().frame_size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t f = 0; f < frames; ++f) {
      pull_back_frame(decoded, residual, static_cast<std::size_t>(f), pixel_grad.frame(static_cast<std::size_t>(f)),
                      scratch);
    }
  }
  return decoder.adjoint(pixel_grad);
}

Tensor4 residual_grad_serial(const Tensor4& latent, const ResidualField& residual, const Decoder& decoder) {
  const Tensor4 decoded = decoder.apply_serial(latent);
  check_residual(decoded.shape(), residual);
  Tensor4 pixel_grad(decoded.shape());
  std::vector<double> scratch(decoded.shape().frame_size());
  for (std::size_t f = 0; f < decoded.shape().frames; ++f) {
    pull_back_frame(decoded, residual, f, pixel_grad.frame(f), scratch);
  }
  if (decoder.kind() == Decoder::Kind::identity) return pixel_grad;
  Tensor4 out(decoder.latent_shape(pixel_grad.shape()));
  const Eigen::MatrixXd& A = decoder.matrix();
  for (std::size_t f = 0; f < pixel_grad.shape().frames; ++f) {
    auto g = pixel_grad.frame(f);
    auto o = out.frame(f);
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < A.rows(); ++i) acc += A(i, j) * g[static_cast<std::size_t>(i)];
      o[static_cast<std::size_t>(j)] = acc;
    }
  }
  return out;
}

Tensor4 guide(const Tensor4& latent, const ResidualField& residual, double strength, const Decoder& decoder) {
  if (strength < 0.0) throw Error("guidance strength must be >= 0");
  if (strength == 0.0) return latent;
  Tensor4 g = residual_grad(latent, residual, decoder);
  Tensor4 out = latent;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= strength * g[i];
  return out;
}

double max_descent_step(const Tensor4& latent, const ResidualField& residual, const Decoder& decoder) {
  const Tensor4 decoded = decoder.apply(latent);
  check_residual(decoded.shape(), residual);
  Tensor4 direction = residual_grad(latent, residual, decoder);
  direction *= -1.0;
  const Tensor4 moved = decoder.apply(direction);

  double limit = std::numeric_limits<double>::infinity();
  const std::size_t n = decoded.shape().frame_size();
  std::vector<double> d(n);
  for (std::size_t k = 0; k + 1 < decoded.shape().frames; ++k) {
    difference_residual(decoded, residual, k, d);
    auto a = moved.frame(k);
    auto b = moved.frame(k + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double rate = b[i] - a[i];
      if (rate == 0.0) continue;
      if (d[i] == 0.0) return 0.0;
      if (sign(rate) != sign(d[i])) limit = std::min(limit, std::abs(d[i]) / std::abs(rate));
    }
  }
  return limit;
}

GuidanceHook::GuidanceHook(GuidanceSchedule schedule, ResidualField residual, Decoder decoder)
    : schedule_(schedule), residual_(std::move(residual)), decoder_(std::move(decoder)) {}

void GuidanceHook::apply(Tensor4& estimate, const StepInfo& info) const {
  if (info.window != schedule_.window) {
    throw Error("sampler guidance window " + std::to_string(info.window) + " differs from schedule window " +
                std::to_string(schedule_.window));
  }
  const double s = schedule_strength(schedule_, info.window_index);
  if (s == 0.0) return;
  estimate = guide(estimate, residual_, s, decoder_);
}

}  // namespace e2f
