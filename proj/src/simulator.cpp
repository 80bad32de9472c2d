#include "e2f/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "e2f/error.hpp"

namespace e2f {

void FrameSequence::validate() const {
  const Shape4& s = data.shape();
  if (s.frames == 0) throw Error("frame sequence is empty");
  if (s.channels != 1 && s.channels != 3) throw Error("frames need 1 or 3 channels, got " + s.str());
  if (timeline.frames() != s.frames) throw Error("timeline length does not match frame count");
  if (!all_finite(data)) throw Error("frame sequence contains non-finite values");
}

Tensor4 luminance(const Tensor4& frames) {
  const Shape4& s = frames.shape();
  if (s.channels == 1) return frames;
  if (s.channels != 3) throw Error("luminance needs 1 or 3 channels");
  Tensor4 out(Shape4{s.frames, 1, s.height, s.width});
  for (std::size_t f = 0; f < s.frames; ++f) {
    for (std::size_t y = 0; y < s.height; ++y) {
      for (std::size_t x = 0; x < s.width; ++x) {
        out(f, 0, y, x) = 0.299 * frames(f, 0, y, x) + 0.587 * frames(f, 1, y, x) +
                          0.114 * frames(f, 2, y, x);
      }
    }
  }
  return out;
}

ResidualField frame_differences(const Tensor4& frames) {
  const Shape4& s = frames.shape();
  if (s.frames < 1) throw Error("frame differences need at least one frame");
  Shape4 rs = s;
  rs.frames = s.frames - 1;
  Tensor4 out(rs);
  for (std::size_t k = 0; k + 1 < s.frames; ++k) {
    auto a = frames.frame(k);
    auto b = frames.frame(k + 1);
    auto d = out.frame(k);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = b[i] - a[i];
  }
  return ResidualField{std::move(out)};
}

namespace {

struct Prepared {
  Tensor4 intensity;
  const FrameTimeline* timeline;
  double threshold;
};

Prepared prepare(const FrameSequence& frames, const SimConfig& config) {
  frames.validate();
  if (!(config.contrast_threshold > 0.0)) throw Error("contrast threshold must be > 0");
  if (frames.data.shape().frames < 2) throw Error("event simulation needs at least 2 frames");
  if (config.per_channel && frames.data.shape().channels != 1) {
    throw Error("per-channel simulation of colour frames needs channel-tagged events; use luminance");
  }
  const Shape4& s = frames.data.shape();
  if (s.width > 65535 || s.height > 65535) throw Error("frame too large for event coordinates");
  return Prepared{luminance(frames.data), &frames.timeline, config.contrast_threshold};
}

// Signed count for one interval given the carried remainder and the interval change.
long interval_count(double accumulated, double change, double c) {
  long n = static_cast<long>(std::trunc(accumulated / c));
  const double miss = change - c * static_cast<double>(n);
  if (miss > c) {
    ++n;
  } else if (miss < -c) {
    --n;
  }
  return n;
}

void simulate_pixel(const Prepared& p, std::size_t pixel, std::vector<Event>& out) {
  const Shape4& s = p.intensity.shape();
  const std::size_t plane = s.plane_size();
  const auto x = static_cast<std::uint16_t>(pixel % s.width);
  const auto y = static_cast<std::uint16_t>(pixel / s.width);
  const double c = p.threshold;
  const double base = p.intensity[pixel];
  long level = 0;  // reference = base + c * level

  for (std::size_t k = 0; k + 1 < s.frames; ++k) {
    const double i0 = p.intensity[k * plane + pixel];
    const double i1 = p.intensity[(k + 1) * plane + pixel];
    const double ref = base + c * static_cast<double>(level);
    const long n = interval_count(i1 - ref, i1 - i0, c);
    if (n == 0) continue;

    const double t0 = p.timeline->end(k);
    const double t1 = p.timeline->end(k + 1);
    const double last = std::nextafter(t1, -std::numeric_limits<double>::infinity());
    const int pol = n > 0 ? 1 : -1;
    const double change = i1 - i0;
    for (long j = 1; j <= std::labs(n); ++j) {
      const double crossing = ref + c * static_cast<double>(pol * j);
      double frac = change != 0.0 ? (crossing - i0) / change : 0.0;
      frac = std::clamp(frac, 0.0, 1.0);
      const double t = std::min(t0 + frac * (t1 - t0), last);
      out.push_back(Event{x, y, t, static_cast<std::int8_t>(pol)});
    }
    level += n;
  }
}

EventStream assemble(const Prepared& p, std::vector<std::vector<Event>>& per_pixel, double duration) {
  const Shape4& s = p.intensity.shape();
  EventStream stream;
  stream.width = static_cast<std::uint16_t>(s.width);
  stream.height = static_cast<std::uint16_t>(s.height);
  stream.duration = duration;
  std::size_t total = 0;
  for (const auto& v : per_pixel) total += v.size();
  stream.events.reserve(total);
  for (const auto& v : per_pixel) stream.events.insert(stream.events.end(), v.begin(), v.end());
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return stream;
}

double stream_duration(const FrameSequence& frames, const SimConfig& config) {
  const double last = frames.timeline.timestamps().back();
  return std::max(config.duration, last);
}

}  // namespace

EventStream simulate_events(const FrameSequence& frames, const SimConfig& config) {
  const Prepared p = prepare(frames, config);
  const auto pixels = static_cast<std::ptrdiff_t>(p.intensity.shape().plane_size());
  std::vector<std::vector<Event>> per_pixel(static_cast<std::size_t>(pixels));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < pixels; ++i) {
    simulate_pixel(p, static_cast<std::size_t>(i), per_pixel[static_cast<std::size_t>(i)]);
  }
  return assemble(p, per_pixel, stream_duration(frames, config));
}

EventStream simulate_events_serial(const FrameSequence& frames, const SimConfig& config) {
  const Prepared p = prepare(frames, config);
  const std::size_t pixels = p.intensity.shape().plane_size();
  std::vector<std::vector<Event>> per_pixel(pixels);
  for (std::size_t i = 0; i < pixels; ++i) simulate_pixel(p, i, per_pixel[i]);
  return assemble(p, per_pixel, stream_duration(frames, config));
}

ResidualField residual_from_events(const EventVolume& volume, const SimConfig& config,
                                   std::size_t channels) {
  if (!(config.contrast_threshold > 0.0)) throw Error("contrast threshold must be > 0");
  const Shape4& vs = volume.data.shape();
  if (vs.channels != 3) throw Error("event volume must have 3 channels");
  if (vs.frames < 1) throw Error("event volume is empty");
  Tensor4 out(Shape4{vs.frames - 1, channels, vs.height, vs.width});
  for (std::size_t k = 0; k + 1 < vs.frames; ++k) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t y = 0; y < vs.height; ++y) {
        for (std::size_t x = 0; x < vs.width; ++x) {
          out(k, c, y, x) = config.contrast_threshold * volume.data(k + 1, 0, y, x);
        }
      }
    }
  }
  return ResidualField{std::move(out)};
}

ResidualField residual_from_events(const std::vector<EventGroup>& groups, std::uint16_t width,
                                   std::uint16_t height, const SimConfig& config,
                                   std::size_t channels) {
  return residual_from_events(stack_events(groups, width, height), config, channels);
}

}  // namespace e2f
