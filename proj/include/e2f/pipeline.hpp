#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "e2f/decoder.hpp"
#include "e2f/diffusion.hpp"
#include "e2f/guidance.hpp"
#include "e2f/sampler.hpp"
#include "e2f/simulator.hpp"
#include "e2f/zeroshot.hpp"

namespace e2f {

// Smooth synthetic motion: Gaussian blobs drifting over a shaded background.
struct ToySceneOptions {
  std::size_t frames = 12;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t blobs = 2;
  double duration = 1.0;
};

FrameSequence make_toy_sequence(std::uint64_t seed, const ToySceneOptions& options = {});

struct ToySample {
  FrameSequence frames;
  EventStream events;
  EventVolume volume;
};

// Frames, their simulated events and the stacked volume.
ToySample make_toy_sample(std::uint64_t seed, const ToySceneOptions& options, const SimConfig& sim);

// Stacks a stream on the frame timeline.
EventVolume volume_from_stream(const EventStream& stream, const FrameTimeline& timeline);

// Square full-rank mixing decoder I + scale * G / sqrt(n) over whole frames.
Decoder make_mixing_decoder(FrameShape frame, std::uint64_t seed, double scale = 0.1);

std::vector<NamedArray> decoder_to_arrays(const Decoder& decoder);
Decoder decoder_from_arrays(const std::vector<NamedArray>& arrays);

// Everything a run needs from a trained model file.
struct ModelBundle {
  ToyDenoiser denoiser;
  Decoder decoder = Decoder::identity();
  ResidualPredictor predictor = ResidualPredictor::oracle(0.05);
  double threshold = 0.05;
};

void write_model(const std::filesystem::path& path, const ModelBundle& model);
ModelBundle read_model(const std::filesystem::path& path);

enum class Task { reconstruct, vfi4, vfi11, vfp };

Task parse_task(const std::string& name);
std::string to_string(Task task);

struct RunOptions {
  ScheduleParams schedule;
  GuidanceSchedule guidance;
  bool latent_guidance = false;  // guide latent differences through the identity map
  ModulationOptions modulation;
  bool zero_events = false;      // zero the condition and disable guidance
  std::size_t channels = 1;      // latent channels under the identity decoder
  std::uint64_t seed = 0;
  std::size_t dump_every = 0;
  std::function<void(std::size_t, const Tensor4&)> on_dump;
};

// Samples the latent sequence for `task`. `residual` is in pixel units; `refs` holds clean latents
// and is required exactly for the zero-shot tasks.
Latent run_task(Task task, const Denoiser& denoiser, const Decoder& decoder, const EventVolume& condition,
                const std::optional<ResidualField>& residual, const std::optional<ReferenceSet>& refs,
                const RunOptions& options);

// Latent shape for F frames under the decoder and the bundle's denoiser.
Shape4 latent_shape_for(const ModelBundle& model, std::size_t frames, std::size_t height, std::size_t width);

}  // namespace e2f
