#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace e2f {

// Dense F x C x H x W layout, row-major with width fastest.
struct Shape4 {
  std::size_t frames = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return frames * channels * height * width; }
  std::size_t frame_size() const { return channels * height * width; }
  std::size_t plane_size() const { return height * width; }
  std::string str() const;

  friend bool operator==(const Shape4&, const Shape4&) = default;
};

class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0);
  Tensor4(Shape4 shape, std::vector<double> values);

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t index(std::size_t f, std::size_t c, std::size_t y, std::size_t x) const {
    return ((f * shape_.channels + c) * shape_.height + y) * shape_.width + x;
  }
  double& operator()(std::size_t f, std::size_t c, std::size_t y, std::size_t x) {
    return values_[index(f, c, y, x)];
  }
  double operator()(std::size_t f, std::size_t c, std::size_t y, std::size_t x) const {
    return values_[index(f, c, y, x)];
  }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<double> frame(std::size_t f);
  std::span<const double> frame(std::size_t f) const;

  // Copy of frame f as a single-frame tensor.
  Tensor4 frame_tensor(std::size_t f) const;
  void set_frame(std::size_t f, const Tensor4& single);

  Tensor4& operator+=(const Tensor4& other);
  Tensor4& operator-=(const Tensor4& other);
  Tensor4& operator*=(double s);

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  Shape4 shape_{};
  std::vector<double> values_;
};

Tensor4 operator+(Tensor4 a, const Tensor4& b);
Tensor4 operator-(Tensor4 a, const Tensor4& b);
Tensor4 operator*(double s, Tensor4 a);

bool all_finite(const Tensor4& t);
double max_abs_diff(const Tensor4& a, const Tensor4& b);

}  // namespace e2f
