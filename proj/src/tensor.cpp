#include "e2f/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "e2f/error.hpp"

namespace e2f {

std::string Shape4::str() const {
  std::ostringstream os;
  os << frames << 'x' << channels << 'x' << height << 'x' << width;
  return os.str();
}

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape), values_(shape.size(), fill) {}

Tensor4::Tensor4(Shape4 shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw Error("tensor value count " + std::to_string(values_.size()) +
                " does not match shape " + shape_.str());
  }
}

std::span<double> Tensor4::frame(std::size_t f) {
  return std::span<double>(values_).subspan(f * shape_.frame_size(), shape_.frame_size());
}

std::span<const double> Tensor4::frame(std::size_t f) const {
  return std::span<const double>(values_).subspan(f * shape_.frame_size(), shape_.frame_size());
}

Tensor4 Tensor4::frame_tensor(std::size_t f) const {
  Shape4 s = shape_;
  s.frames = 1;
  auto src = frame(f);
  return Tensor4(s, std::vector<double>(src.begin(), src.end()));
}

void Tensor4::set_frame(std::size_t f, const Tensor4& single) {
  if (single.shape().frame_size() != shape_.frame_size() || single.shape().frames != 1) {
    throw Error("frame shape " + single.shape().str() + " does not fit " + shape_.str());
  }
  std::copy(single.values_.begin(), single.values_.end(), frame(f).begin());
}

Tensor4& Tensor4::operator+=(const Tensor4& other) {
  if (other.shape_ != shape_) throw Error("shape mismatch " + shape_.str() + " vs " + other.shape_.str());
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor4& Tensor4::operator-=(const Tensor4& other) {
  if (other.shape_ != shape_) throw Error("shape mismatch " + shape_.str() + " vs " + other.shape_.str());
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Tensor4& Tensor4::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }
Tensor4 operator-(Tensor4 a, const Tensor4& b) { return a -= b; }
Tensor4 operator*(double s, Tensor4 a) { return a *= s; }

bool all_finite(const Tensor4& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  if (a.shape() != b.shape()) throw Error("shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace e2f
