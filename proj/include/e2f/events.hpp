#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "e2f/tensor.hpp"

namespace e2f {

struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  double t = 0.0;
  std::int8_t polarity = 1;  // +1 or -1

  friend bool operator==(const Event&, const Event&) = default;
};

// Time-sorted events plus sensor metadata.
struct EventStream {
  std::vector<Event> events;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  double duration = 0.0;

  // Throws if any event violates the sensor bounds, duration, polarity or ordering.
  void validate() const;
};

// Frame timestamps s_0 < ... < s_{F-1}; s_{-1} is implicitly 0.
class FrameTimeline {
 public:
  explicit FrameTimeline(std::vector<double> timestamps);

  // s_f = (f + 1) * duration / frames.
  static FrameTimeline uniform(std::size_t frames, double duration);

  std::size_t frames() const { return stamps_.size(); }
  const std::vector<double>& timestamps() const { return stamps_; }
  double start(std::size_t f) const { return f == 0 ? 0.0 : stamps_[f - 1]; }
  double end(std::size_t f) const { return stamps_[f]; }

  void check_against(double duration) const;

 private:
  std::vector<double> stamps_;
};

// Events with t_begin <= t < t_end.
struct EventGroup {
  std::size_t frame = 0;
  double t_begin = 0.0;
  double t_end = 0.0;
  std::vector<Event> events;
};

// F x 3 x H x W; channel 0 = signed sum, 1 = positive sum, 2 = negative sum (<= 0).
struct EventVolume {
  Tensor4 data;

  std::size_t frames() const { return data.shape().frames; }
};

EventStream parse_event_stream(std::string_view text, std::uint16_t width, std::uint16_t height,
                               double duration);

std::vector<EventGroup> group_events(const EventStream& stream, const FrameTimeline& timeline);

// Per-frame parallel; stack_events_serial is the reference loop.
EventVolume stack_events(const std::vector<EventGroup>& groups, std::uint16_t width,
                         std::uint16_t height);
EventVolume stack_events_serial(const std::vector<EventGroup>& groups, std::uint16_t width,
                                std::uint16_t height);

enum class NoiseMode { relative, baseline };

struct NoiseOptions {
  NoiseMode mode = NoiseMode::relative;
  double eta = 0.0;            // relative: std = eta * std(volume)
  double baseline_std = 0.02;  // baseline: fixed absolute std
  std::uint64_t seed = 0;
};

struct NoisyVolume {
  EventVolume volume;
  double noise_std = 0.0;
  bool degenerate_variance = false;
};

double volume_std(const EventVolume& volume);
NoisyVolume inject_noise(const EventVolume& volume, const NoiseOptions& options);

// Redistributes the events of contiguous groups into k equal-duration groups over the same span.
std::vector<EventGroup> repartition_groups(const std::vector<EventGroup>& groups, std::size_t k);

// Binary stream: "EVT0", u16 W, u16 H, f64 T, then packed (f64 t, u16 x, u16 y, i8 p) records.
void write_event_stream_binary(const std::filesystem::path& path, const EventStream& stream);
EventStream read_event_stream_binary(const std::filesystem::path& path);
void write_event_stream_text(std::ostream& os, const EventStream& stream);
// Dispatches on extension: ".evt" binary, anything else text.
void save_event_stream(const std::filesystem::path& path, const EventStream& stream);
EventStream load_event_stream(const std::filesystem::path& path, std::uint16_t width,
                              std::uint16_t height, double duration);

}  // namespace e2f
