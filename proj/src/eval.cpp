#include "e2f/eval.hpp"

#include <cmath>

#include "e2f/error.hpp"

namespace e2f {

namespace {

void check_pair(const Tensor4& a, const Tensor4& b) {
  if (a.shape() != b.shape()) throw Error("metric inputs differ in shape: " + a.shape().str() + " vs " + b.shape().str());
  if (a.shape().frames == 0 || a.shape().frame_size() == 0) throw Error("metric inputs are empty");
}

void check_window(const Shape4& s, const SsimParams& p) {
  if (p.window == 0 || p.window % 2 == 0) throw Error("ssim window must be odd");
  if (s.height < p.window || s.width < p.window) {
    throw Error("frame " + std::to_string(s.height) + "x" + std::to_string(s.width) + " is smaller than the " +
                std::to_string(p.window) + "x" + std::to_string(p.window) + " ssim window");
  }
}

double frame_mse(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

void finish(MetricSeries& m) {
  double acc = 0.0;
  for (double v : m.per_frame) acc += v;
  m.mean = acc / static_cast<double>(m.per_frame.size());
}

double ssim_value(double mx, double my, double sxx, double syy, double sxy, const SsimParams& p) {
  const double c1 = (p.k1 * p.range) * (p.k1 * p.range);
  const double c2 = (p.k2 * p.range) * (p.k2 * p.range);
  const double vx = sxx - mx * mx;
  const double vy = syy - my * my;
  const double cov = sxy - mx * my;
  return ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

// Separable filtering of the five moment planes of one channel.
double plane_ssim_separable(const double* a, const double* b, std::size_t h, std::size_t w,
                            const std::vector<double>& g, const SsimParams& p) {
  const std::size_t n = g.size();
  const std::size_t oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(5 * h * ow);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s[5] = {0, 0, 0, 0, 0};
      for (std::size_t j = 0; j < n; ++j) {
        const double va = a[y * w + x + j], vb = b[y * w + x + j];
        s[0] += g[j] * va;
        s[1] += g[j] * vb;
        s[2] += g[j] * va * va;
        s[3] += g[j] * vb * vb;
        s[4] += g[j] * va * vb;
      }
      for (int q = 0; q < 5; ++q) rows[(q * h + y) * ow + x] = s[q];
    }
  }
  double total = 0.0;
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s[5] = {0, 0, 0, 0, 0};
      for (std::size_t i = 0; i < n; ++i) {
        for (int q = 0; q < 5; ++q) s[q] += g[i] * rows[(q * h + y + i) * ow + x];
      }
      total += ssim_value(s[0], s[1], s[2], s[3], s[4], p);
    }
  }
  return total / static_cast<double>(oh * ow);
}

double plane_ssim_direct(const double* a, const double* b, std::size_t h, std::size_t w,
                         const std::vector<double>& g, const SsimParams& p) {
  const std::size_t n = g.size();
  const std::size_t oh = h - n + 1, ow = w - n + 1;
  double total = 0.0;
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double wt = g[i] * g[j];
          const double va = a[(y + i) * w + x + j], vb = b[(y + i) * w + x + j];
          mx += wt * va;
          my += wt * vb;
          sxx += wt * va * va;
          syy += wt * vb * vb;
          sxy += wt * va * vb;
        }
      }
      total += ssim_value(mx, my, sxx, syy, sxy, p);
    }
  }
  return total / static_cast<double>(oh * ow);
}

template <class PlaneFn>
double frame_ssim(const Tensor4& a, const Tensor4& b, std::size_t f, const std::vector<double>& g,
                  const SsimParams& p, PlaneFn plane) {
  const Shape4& s = a.shape();
  double acc = 0.0;
  for (std::size_t c = 0; c < s.channels; ++c) {
    const std::size_t off = a.index(f, c, 0, 0);
    acc += plane(a.values().data() + off, b.values().data() + off, s.height, s.width, g, p);
  }
  return acc / static_cast<double>(s.channels);
}

}  // namespace

std::vector<double> gaussian_taps(const SsimParams& p) {
  if (p.window == 0 || p.window % 2 == 0) throw Error("ssim window must be odd");
  if (!(p.gaussian_std > 0.0)) throw Error("ssim gaussian std must be > 0");
  std::vector<double> g(p.window);
  const double c = static_cast<double>(p.window / 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.window; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-(d * d) / (2.0 * p.gaussian_std * p.gaussian_std));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

MetricSeries mse(const Tensor4& a, const Tensor4& b) {
  check_pair(a, b);
  MetricSeries m;
  m.per_frame.resize(a.shape().frames);
  const auto frames = static_cast<std::ptrdiff_t>(a.shape().frames);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t f = 0; f < frames; ++f) {
    const auto i = static_cast<std::size_t>(f);
    m.per_frame[i] = frame_mse(a.frame(i), b.frame(i));
  }
  finish(m);
  return m;
}

MetricSeries mse_serial(const Tensor4& a, const Tensor4& b) {
  check_pair(a, b);
  MetricSeries m;
  for (std::size_t f = 0; f < a.shape().frames; ++f) m.per_frame.push_back(frame_mse(a.frame(f), b.frame(f)));
  finish(m);
  return m;
}

MetricSeries ssim(const Tensor4& a, const Tensor4& b, const SsimParams& params) {
  check_pair(a, b);
  check_window(a.shape(), params);
  const auto g = gaussian_taps(params);
  MetricSeries m;
  m.per_frame.resize(a.shape().frames);
  const auto frames = static_cast<std::ptrdiff_t>(a.shape().frames);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t f = 0; f < frames; ++f) {
    const auto i = static_cast<std::size_t>(f);
    m.per_frame[i] = frame_ssim(a, b, i, g, params, plane_ssim_separable);
  }
  finish(m);
  return m;
}

MetricSeries ssim_serial(const Tensor4& a, const Tensor4& b, const SsimParams& params) {
  check_pair(a, b);
  check_window(a.shape(), params);
  const auto g = gaussian_taps(params);
  MetricSeries m;
  for (std::size_t f = 0; f < a.shape().frames; ++f) {
    m.per_frame.push_back(frame_ssim(a, b, f, g, params, plane_ssim_direct));
  }
  finish(m);
  return m;
}

}  // namespace e2f
