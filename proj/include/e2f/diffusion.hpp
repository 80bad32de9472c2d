#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "e2f/events.hpp"
#include "e2f/tensor.hpp"

namespace e2f {

// Strictly decreasing sigma_T > ... > sigma_1 followed by an exact 0.
struct NoiseSchedule {
  std::vector<double> sigmas;
  double sigma_data = 0.5;

  std::size_t steps() const { return sigmas.empty() ? 0 : sigmas.size() - 1; }
  double sigma_max() const { return sigmas.front(); }
  void validate() const;
};

struct ScheduleParams {
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  std::size_t steps = 30;
  double rho = 7.0;
  double sigma_data = 0.5;
};

// sigma_i = (s_max^(1/rho) + i/(T-1) * (s_min^(1/rho) - s_max^(1/rho)))^rho, i = 0..T-1, then 0.
NoiseSchedule make_schedule(double sigma_min, double sigma_max, std::size_t steps, double rho,
                            double sigma_data = 0.5);
NoiseSchedule make_schedule(const ScheduleParams& params);

// (sigma^2 + sigma_data^2) / (sigma + sigma_data)^2
double lambda_weight(double sigma, double sigma_data);
// 1 - exp(-sigma)
double alpha_weight(double sigma);

struct Latent {
  Tensor4 data;
  std::size_t sigma_index = 0;
};

// x0 + sigma * n, n ~ N(0, I) from a generator seeded with `seed`.
Latent forward_noise(const Latent& x0, double sigma, std::uint64_t seed);

// Posterior mean of x0 ~ N(mu, s0^2) given x = x0 + sigma * n.
double posterior_mean_gaussian(double x, double sigma, double mu, double s0);

// Clean-latent estimator U = D(x; E, sigma). Implementations are read-only during evaluation.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Tensor4 denoise(const Tensor4& noisy, const EventVolume& condition, double sigma) const = 0;
};

// Exact denoiser for i.i.d. N(mu, s0^2) data; ignores the condition.
class GaussianPosteriorDenoiser final : public Denoiser {
 public:
  GaussianPosteriorDenoiser(double mu, double s0);
  Tensor4 denoise(const Tensor4& noisy, const EventVolume& condition, double sigma) const override;

 private:
  double mu_;
  double s0_;
};

enum class ToyArchitecture { affine, mlp };

struct ToyDenoiserSpec {
  ToyArchitecture architecture = ToyArchitecture::mlp;
  std::size_t frames = 12;
  std::size_t channels = 1;
  std::size_t hidden = 64;    // mlp only
  double sigma_data = 0.5;
  bool preconditioned = true;  // D = c_skip x + c_out * net(...)
  double event_scale = 1.0;    // applied to raw event sums before they enter the net

  std::size_t inputs() const { return frames * channels + 3 * frames + 1; }
  std::size_t outputs() const { return frames * channels; }
  std::size_t parameter_count() const;
};

struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

// Per-pixel conditional denoiser shared across pixels (a 1x1 convolution over time).
//
// At each pixel the net sees the scaled noisy latent of every frame and channel, the three
// event channels of every frame and log(sigma)/4, and predicts the clean latent of every frame.
class ToyDenoiser final : public Denoiser {
 public:
  ToyDenoiser(ToyDenoiserSpec spec, std::uint64_t init_seed);
  ToyDenoiser(ToyDenoiserSpec spec, std::vector<double> parameters);

  const ToyDenoiserSpec& spec() const { return spec_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

  Tensor4 denoise(const Tensor4& noisy, const EventVolume& condition, double sigma) const override;

  // sum over pixels of lambda * ||x0 - D||^2 / element_count, with its gradient accumulated into
  // `grad` when non-empty.
  double sample_loss(const Tensor4& clean, const Tensor4& noisy, const EventVolume& condition,
                     double sigma, std::span<double> grad) const;

  std::vector<NamedArray> to_arrays() const;
  static ToyDenoiser from_arrays(const std::vector<NamedArray>& arrays);

 private:
  void check_shapes(const Tensor4& noisy, const EventVolume& condition) const;

  ToyDenoiserSpec spec_;
  std::vector<double> params_;
};

struct TrainingPair {
  Tensor4 clean;          // X^0
  EventVolume condition;  // E
};

struct TrainConfig {
  std::size_t iterations = 2000;
  double learning_rate = 1e-3;
  double final_lr_ratio = 0.1;  // cosine decay to learning_rate * final_lr_ratio
  // Training sigmas: log-normal(p_mean, p_std) clipped to [sigma_min, sigma_max], or log-uniform
  // over that range when log_uniform is set. Held-out scoring always uses log-uniform draws.
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  bool log_uniform = false;
  double p_mean = -1.2;
  double p_std = 1.2;
  std::size_t batch_size = 8;
  std::size_t log_every = 100;
  std::uint64_t seed = 0;
  bool zero_events = false;  // the "without events" ablation
  bool check_gradient = true;
  std::size_t eval_draws = 8;  // sigma/noise draws per held-out pair
};

struct TrainReport {
  std::vector<double> loss_history;  // mean batch loss per logging interval
  double initial_eval_loss = 0.0;
  double final_eval_loss = 0.0;
  double gradient_check_max_rel_error = 0.0;
};

// Deterministic lambda-weighted Monte-Carlo loss over fixed sigma/noise draws.
double evaluate_loss(const ToyDenoiser& model, const std::vector<TrainingPair>& data,
                     const TrainConfig& config, std::uint64_t eval_seed);

// Central finite differences on `coordinates` random parameters of the loss on one batch.
double gradient_check(const ToyDenoiser& model, const std::vector<TrainingPair>& batch,
                      const std::vector<double>& sigmas, std::uint64_t noise_seed,
                      std::size_t coordinates, std::uint64_t pick_seed);

// Adam on the lambda-weighted denoising objective; `eval` (may be empty) scores progress.
TrainReport train_denoiser(ToyDenoiser& model, const std::vector<TrainingPair>& dataset,
                           const TrainConfig& config, const std::vector<TrainingPair>& eval = {});

// Container: "E2FM", then per array: u32 name length, name, u32 rank, u64 dims, f64 data.
void write_model_container(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_model_container(const std::filesystem::path& path);
const NamedArray* find_array(const std::vector<NamedArray>& arrays, const std::string& name);

}  // namespace e2f
