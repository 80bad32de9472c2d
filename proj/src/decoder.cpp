#include "e2f/decoder.hpp"

#include "e2f/error.hpp"

namespace e2f {

Decoder Decoder::identity() { return Decoder(); }

Decoder Decoder::linear(Eigen::MatrixXd matrix, FrameShape latent, FrameShape frame) {
  if (static_cast<std::size_t>(matrix.cols()) != latent.size() ||
      static_cast<std::size_t>(matrix.rows()) != frame.size()) {
    throw Error("decoder matrix is " + std::to_string(matrix.rows()) + "x" + std::to_string(matrix.cols()) +
                ", expected " + std::to_string(frame.size()) + "x" + std::to_string(latent.size()));
  }
  if (matrix.rows() < matrix.cols()) throw Error("decoder matrix cannot have full column rank (rows < cols)");
  if (!matrix.allFinite()) throw Error("decoder matrix has non-finite entries");

  Decoder d;
  d.kind_ = Kind::linear;
  d.latent_ = latent;
  d.frame_ = frame;
  d.gram_.compute(matrix.transpose() * matrix);
  if (d.gram_.info() != Eigen::Success) throw Error("decoder matrix is rank deficient");
  const Eigen::VectorXd diag = d.gram_.matrixL().toDenseMatrix().diagonal();
  if (diag.minCoeff() <= 1e-10 * diag.maxCoeff()) throw Error("decoder matrix is numerically rank deficient");
  d.matrix_ = std::move(matrix);
  return d;
}

void Decoder::check_latent(const Shape4& s) const {
  if (kind_ == Kind::identity) return;
  if (s.channels != latent_.channels || s.height != latent_.height || s.width != latent_.width) {
    throw Error("latent shape " + s.str() + " does not match decoder input");
  }
}

Shape4 Decoder::output_shape(const Shape4& latent) const {
  check_latent(latent);
  if (kind_ == Kind::identity) return latent;
  return Shape4{latent.frames, frame_.channels, frame_.height, frame_.width};
}

Shape4 Decoder::latent_shape(const Shape4& frames) const {
  if (kind_ == Kind::identity) return frames;
  if (frames.channels != frame_.channels || frames.height != frame_.height || frames.width != frame_.width) {
    throw Error("frame shape " + frames.str() + " does not match decoder output");
  }
  return Shape4{frames.frames, latent_.channels, latent_.height, latent_.width};
}

namespace {

void map_frame(const Eigen::MatrixXd& m, std::span<const double> in, std::span<double> out) {
  Eigen::Map<const Eigen::VectorXd> x(in.data(), static_cast<Eigen::Index>(in.size()));
  Eigen::Map<Eigen::VectorXd> y(out.data(), static_cast<Eigen::Index>(out.size()));
  y.noalias() = m * x;
}

}  // namespace

Tensor4 Decoder::apply(const Tensor4& latent) const {
  if (kind_ == Kind::identity) return latent;
  Tensor4 out(output_shape(latent.shape()));
  const auto frames = static_cast<std::ptrdiff_t>(latent.shape().frames);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t f = 0; f < frames; ++f) {
    map_frame(matrix_, latent.frame(static_cast<std::size_t>(f)), out.frame(static_cast<std::size_t>(f)));
  }
  return out;
}

Tensor4 Decoder::apply_serial(const Tensor4& latent) const {
  if (kind_ == Kind::identity) return latent;
  Tensor4 out(output_shape(latent.shape()));
  for (std::size_t f = 0; f < latent.shape().frames; ++f) map_frame(matrix_, latent.frame(f), out.frame(f));
  return out;
}

Tensor4 Decoder::adjoint(const Tensor4& frames) const {
  if (kind_ == Kind::identity) return frames;
  Tensor4 out(latent_shape(frames.shape()));
  const Eigen::MatrixXd at = matrix_.transpose();
  const auto n = static_cast<std::ptrdiff_t>(frames.shape().frames);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t f = 0; f < n; ++f) {
    map_frame(at, frames.frame(static_cast<std::size_t>(f)), out.frame(static_cast<std::size_t>(f)));
  }
  return out;
}

Tensor4 Decoder::encode(const Tensor4& frames) const {
  if (kind_ == Kind::identity) return frames;
  Tensor4 out(latent_shape(frames.shape()));
  for (std::size_t f = 0; f < frames.shape().frames; ++f) {
    auto in = frames.frame(f);
    Eigen::Map<const Eigen::VectorXd> y(in.data(), static_cast<Eigen::Index>(in.size()));
    auto dst = out.frame(f);
    Eigen::Map<Eigen::VectorXd> x(dst.data(), static_cast<Eigen::Index>(dst.size()));
    x = gram_.solve(matrix_.transpose() * y);
  }
  return out;
}

}  // namespace e2f
