#include "e2f/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "e2f/error.hpp"

namespace e2f {

FrameSequence make_toy_sequence(std::uint64_t seed, const ToySceneOptions& o) {
  if (o.frames == 0 || o.height == 0 || o.width == 0) throw Error("toy scene needs a non-empty shape");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double scale = static_cast<double>(std::min(o.height, o.width)) / 8.0;
  const double base = between(0.2, 0.4);
  const double gy = between(-0.1, 0.1), gx = between(-0.1, 0.1);

  struct Blob {
    double y, x, vy, vx, amp, radius;
  };
  std::vector<Blob> blobs(o.blobs);
  for (auto& b : blobs) {
    b.y = between(0.0, static_cast<double>(o.height - 1));
    b.x = between(0.0, static_cast<double>(o.width - 1));
    b.vy = between(-0.5, 0.5) * scale;
    b.vx = between(-0.5, 0.5) * scale;
    b.amp = between(0.25, 0.5);
    b.radius = between(1.2, 2.5) * scale;
  }

  Tensor4 v(Shape4{o.frames, 1, o.height, o.width});
  for (std::size_t f = 0; f < o.frames; ++f) {
    for (std::size_t y = 0; y < o.height; ++y) {
      for (std::size_t x = 0; x < o.width; ++x) {
        const double yn = static_cast<double>(y) / static_cast<double>(o.height) - 0.5;
        const double xn = static_cast<double>(x) / static_cast<double>(o.width) - 0.5;
        double val = base + gy * yn + gx * xn;
        for (const auto& b : blobs) {
          const double dy = static_cast<double>(y) - (b.y + b.vy * static_cast<double>(f));
          const double dx = static_cast<double>(x) - (b.x + b.vx * static_cast<double>(f));
          val += b.amp * std::exp(-(dy * dy + dx * dx) / (2.0 * b.radius * b.radius));
        }
        v(f, 0, y, x) = std::clamp(val, 0.0, 1.0);
      }
    }
  }
  return FrameSequence{std::move(v), FrameTimeline::uniform(o.frames, o.duration)};
}

EventVolume volume_from_stream(const EventStream& stream, const FrameTimeline& timeline) {
  return stack_events(group_events(stream, timeline), stream.width, stream.height);
}

ToySample make_toy_sample(std::uint64_t seed, const ToySceneOptions& options, const SimConfig& sim) {
  FrameSequence frames = make_toy_sequence(seed, options);
  SimConfig s = sim;
  s.duration = options.duration;
  EventStream events = simulate_events(frames, s);
  EventVolume volume = volume_from_stream(events, frames.timeline);
  return ToySample{std::move(frames), std::move(events), std::move(volume)};
}

Decoder make_mixing_decoder(FrameShape frame, std::uint64_t seed, double scale) {
  const auto n = static_cast<Eigen::Index>(frame.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  const double s = scale / std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) += s * normal(rng);
  return Decoder::linear(std::move(a), frame, frame);
}

std::vector<NamedArray> decoder_to_arrays(const Decoder& d) {
  if (d.kind() == Decoder::Kind::identity) return {NamedArray{"decoder.kind", {1}, {0.0}}};
  const FrameShape l = d.latent_frame(), f = d.output_frame();
  const Eigen::MatrixXd& a = d.matrix();
  NamedArray m{"decoder.A", {static_cast<std::uint64_t>(a.rows()), static_cast<std::uint64_t>(a.cols())}, {}};
  m.data.reserve(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) m.data.push_back(a(i, j));
  return {NamedArray{"decoder.kind", {1}, {1.0}},
          NamedArray{"decoder.shape",
                     {6},
                     {static_cast<double>(l.channels), static_cast<double>(l.height), static_cast<double>(l.width),
                      static_cast<double>(f.channels), static_cast<double>(f.height), static_cast<double>(f.width)}},
          std::move(m)};
}

Decoder decoder_from_arrays(const std::vector<NamedArray>& arrays) {
  const NamedArray* kind = find_array(arrays, "decoder.kind");
  if (!kind || kind->data.empty() || kind->data[0] == 0.0) return Decoder::identity();
  const NamedArray* shape = find_array(arrays, "decoder.shape");
  const NamedArray* m = find_array(arrays, "decoder.A");
  if (!shape || shape->data.size() != 6 || !m || m->dims.size() != 2) throw Error("malformed decoder arrays");
  auto z = [&](std::size_t i) { return static_cast<std::size_t>(shape->data[i]); };
  const auto rows = static_cast<Eigen::Index>(m->dims[0]), cols = static_cast<Eigen::Index>(m->dims[1]);
  if (m->data.size() != static_cast<std::size_t>(rows * cols)) throw Error("decoder.A has the wrong size");
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = m->data[static_cast<std::size_t>(i * cols + j)];
  return Decoder::linear(std::move(a), FrameShape{z(0), z(1), z(2)}, FrameShape{z(3), z(4), z(5)});
}

void write_model(const std::filesystem::path& path, const ModelBundle& model) {
  auto arrays = model.denoiser.to_arrays();
  for (auto& a : decoder_to_arrays(model.decoder)) arrays.push_back(std::move(a));
  for (auto& a : model.predictor.to_arrays()) arrays.push_back(std::move(a));
  arrays.push_back(NamedArray{"sim.threshold", {1}, {model.threshold}});
  write_model_container(path, arrays);
}

ModelBundle read_model(const std::filesystem::path& path) {
  const auto arrays = read_model_container(path);
  const NamedArray* c = find_array(arrays, "sim.threshold");
  if (!c || c->data.size() != 1) throw Error("model has no sim.threshold array");
  return ModelBundle{ToyDenoiser::from_arrays(arrays), decoder_from_arrays(arrays),
                     ResidualPredictor::from_arrays(arrays), c->data[0]};
}

Task parse_task(const std::string& name) {
  if (name == "reconstruct") return Task::reconstruct;
  if (name == "vfi4") return Task::vfi4;
  if (name == "vfi11") return Task::vfi11;
  if (name == "vfp") return Task::vfp;
  throw Error("unknown task '" + name + "' (reconstruct|vfi4|vfi11|vfp)");
}

std::string to_string(Task task) {
  switch (task) {
    case Task::reconstruct: return "reconstruct";
    case Task::vfi4: return "vfi4";
    case Task::vfi11: return "vfi11";
    case Task::vfp: return "vfp";
  }
  return "?";
}

Shape4 latent_shape_for(const ModelBundle& model, std::size_t frames, std::size_t height, std::size_t width) {
  const std::size_t c = model.denoiser.spec().channels;
  if (model.decoder.kind() == Decoder::Kind::identity) return Shape4{frames, c, height, width};
  const FrameShape l = model.decoder.latent_frame();
  return Shape4{frames, l.channels, l.height, l.width};
}

Latent run_task(Task task, const Denoiser& denoiser, const Decoder& decoder, const EventVolume& condition,
                const std::optional<ResidualField>& residual, const std::optional<ReferenceSet>& refs,
                const RunOptions& o) {
  const Shape4& vs = condition.data.shape();
  if (vs.channels != 3 || vs.frames == 0) throw Error("condition must be an F x 3 x H x W event volume");
  const bool zero_shot = task != Task::reconstruct;
  if (zero_shot && !refs) throw Error(to_string(task) + " needs reference frames");
  if (!zero_shot && refs) throw Error("reconstruct takes no reference frames");

  SamplerConfig cfg;
  cfg.schedule = make_schedule(o.schedule);
  cfg.seed = o.seed;
  cfg.dump_every = o.dump_every;
  cfg.on_dump = o.on_dump;

  if (zero_shot) {
    const auto& r = refs->refs;
    const Shape4& rs = r.front().latent.shape();
    cfg.latent_shape = Shape4{vs.frames, rs.channels, rs.height, rs.width};
    const ZeroShotTask zt = task == Task::vfi4 ? ZeroShotTask::vfi4
                            : task == Task::vfi11 ? ZeroShotTask::vfi11
                                                  : ZeroShotTask::vfp;
    const FrameLayout layout = vfi_layout(zt, vs.frames);
    if (r.size() != layout.references.size()) throw Error(to_string(task) + " expects " +
                                                          std::to_string(layout.references.size()) + " references");
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r[i].index != layout.references[i]) throw Error("reference indices do not match the " + to_string(task) + " layout");
    }
    refs->validate(vs.frames);
    cfg.hooks.push_back(std::make_shared<ModulationHook>(*refs, o.modulation));
  }

  const bool guided = !o.zero_events && o.guidance.mode != GuidanceMode::off && o.guidance.window > 0;
  if (guided) {
    if (!residual) throw Error("guidance needs a residual field");
    cfg.guidance_window = o.guidance.window;
    if (o.latent_guidance) {
      cfg.hooks.push_back(std::make_shared<GuidanceHook>(o.guidance, ResidualField{decoder.encode(residual->data)},
                                                         Decoder::identity()));
    } else {
      cfg.hooks.push_back(std::make_shared<GuidanceHook>(o.guidance, *residual, decoder));
    }
  }

  if (!zero_shot) {
    if (decoder.kind() == Decoder::Kind::identity) {
      cfg.latent_shape = Shape4{vs.frames, o.channels, vs.height, vs.width};
    } else {
      const FrameShape l = decoder.latent_frame();
      cfg.latent_shape = Shape4{vs.frames, l.channels, l.height, l.width};
    }
  }

  if (o.zero_events) return sample(denoiser, EventVolume{Tensor4(vs)}, cfg);
  return sample(denoiser, condition, cfg);
}

}  // namespace e2f
