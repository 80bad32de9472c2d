#pragma once

#include <vector>

#include "e2f/events.hpp"
#include "e2f/tensor.hpp"

namespace e2f {

// F x C x H x W intensities, nominally in [0, 1], with one timestamp per frame.
struct FrameSequence {
  Tensor4 data;
  FrameTimeline timeline;

  // Finite values, F >= 1, C in {1, 3}, timeline length F.
  void validate() const;
};

struct SimConfig {
  double contrast_threshold = 0.05;
  // false: simulate on luminance. true: simulate each channel (single-channel frames only).
  bool per_channel = false;
  double duration = 1.0;
};

// (F-1) x C x H x W inter-frame residuals; entry k describes frame k -> k+1.
struct ResidualField {
  Tensor4 data;
};

// Brightness the simulator watches: the frame itself for C == 1, BT.601 luminance for C == 3.
Tensor4 luminance(const Tensor4& frames);

// V_{k+1} - V_k for k = 0..F-2.
ResidualField frame_differences(const Tensor4& frames);

// Reference-level (integrate-to-threshold) event generation on linear intensity.
//
// Each pixel keeps a reference level that starts at the first frame's value. Over the interval
// between frames k and k+1 the pixel emits n_k events of polarity sign(n_k), where
// n_k = trunc((I_{k+1} - ref) / C) is the number of threshold multiples crossed. If the
// resulting interval count misses the interval's own change by more than C (a direction
// reversal with a large carried remainder) one further event towards that change is emitted.
// The reference then advances by C * n_k, so |I_k - ref_k| < C and |C n_k - dI_k| <= C hold for
// every k. Event times interpolate linearly within [s_k, s_{k+1}).
//
// Parallel over pixels; simulate_events_serial is the reference loop. Both return identical
// streams.
EventStream simulate_events(const FrameSequence& frames, const SimConfig& config);
EventStream simulate_events_serial(const FrameSequence& frames, const SimConfig& config);

// R_k = C * (signed event sum of the group covering [s_k, s_{k+1})), i.e. channel 0 of volume
// frame k+1, broadcast over `channels`.
ResidualField residual_from_events(const EventVolume& volume, const SimConfig& config,
                                   std::size_t channels = 1);
ResidualField residual_from_events(const std::vector<EventGroup>& groups, std::uint16_t width,
                                   std::uint16_t height, const SimConfig& config,
                                   std::size_t channels = 1);

}  // namespace e2f
