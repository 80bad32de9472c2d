#pragma once

#include <Eigen/Dense>

#include "e2f/tensor.hpp"

namespace e2f {

// Channels x height x width of one frame.
struct FrameShape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const { return channels * height * width; }
  friend bool operator==(const FrameShape&, const FrameShape&) = default;
};

// Maps latent frames to pixel frames: identity, or y_f = A x_f per frame with A full column rank.
// The encoder is the matching inverse (identity, or the pseudo-inverse of A).
class Decoder {
 public:
  enum class Kind { identity, linear };

  static Decoder identity();
  static Decoder linear(Eigen::MatrixXd matrix, FrameShape latent, FrameShape frame);

  Kind kind() const { return kind_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  FrameShape latent_frame() const { return latent_; }
  FrameShape output_frame() const { return frame_; }

  Shape4 output_shape(const Shape4& latent) const;
  Shape4 latent_shape(const Shape4& frames) const;

  // Per-frame parallel. apply_serial is the reference loop.
  Tensor4 apply(const Tensor4& latent) const;
  Tensor4 apply_serial(const Tensor4& latent) const;
  // A^T per frame (the adjoint of apply).
  Tensor4 adjoint(const Tensor4& frames) const;
  // Least-squares inverse (A^T A)^{-1} A^T per frame.
  Tensor4 encode(const Tensor4& frames) const;

 private:
  Decoder() = default;
  void check_latent(const Shape4& s) const;

  Kind kind_ = Kind::identity;
  Eigen::MatrixXd matrix_;
  FrameShape latent_{};
  FrameShape frame_{};
  Eigen::LLT<Eigen::MatrixXd> gram_;
};

}  // namespace e2f
