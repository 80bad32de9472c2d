#pragma once

#include <vector>

#include "e2f/tensor.hpp"

namespace e2f {

struct MetricSeries {
  std::vector<double> per_frame;
  double mean = 0.0;
};

struct SsimParams {
  std::size_t window = 11;
  double gaussian_std = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;
};

// Mean squared difference per frame. Parallel over frames; *_serial are the reference loops.
MetricSeries mse(const Tensor4& a, const Tensor4& b);
MetricSeries mse_serial(const Tensor4& a, const Tensor4& b);

// Gaussian-windowed SSIM over valid window positions, averaged over positions then channels.
// The parallel path filters separably; the serial path sums the 2-D window directly.
MetricSeries ssim(const Tensor4& a, const Tensor4& b, const SsimParams& params = {});
MetricSeries ssim_serial(const Tensor4& a, const Tensor4& b, const SsimParams& params = {});

// Normalised 1-D Gaussian taps of length params.window.
std::vector<double> gaussian_taps(const SsimParams& params);

}  // namespace e2f
