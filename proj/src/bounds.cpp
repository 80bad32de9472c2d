#include "e2f/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "e2f/error.hpp"
#include "e2f/guidance.hpp"

namespace e2f {

namespace {

constexpr std::size_t kMaxIterations = 1000000;

Eigen::VectorXd start_vector(Eigen::Index n) {
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v.normalized();
}

// Iterates v <- step(v) / |step(v)| until |M v - theta v| <= tol * theta.
template <class Step, class Apply>
double iterate(Eigen::Index n, Step step, Apply apply_m, double tol, std::size_t& iterations, bool want_min) {
  Eigen::VectorXd v = start_vector(n);
  for (std::size_t it = 0; it < kMaxIterations; ++it) {
    Eigen::VectorXd w = step(v);
    const double norm = w.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw Error("singular value iteration broke down");
    v = w / norm;
    const Eigen::VectorXd mv = apply_m(v);
    const double theta = v.dot(mv);
    ++iterations;
    if ((mv - theta * v).norm() <= tol * std::abs(theta)) return theta;
  }
  throw Error(want_min ? "inverse iteration did not converge" : "power iteration did not converge");
}

}  // namespace

OperatorNorms lipschitz_and_condition(const Eigen::MatrixXd& a, double tol) {
  if (a.rows() == 0 || a.cols() == 0) throw Error("empty operator");
  if (a.rows() < a.cols()) throw Error("operator is rank deficient (rows < cols)");
  const Eigen::MatrixXd m = a.transpose() * a;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw Error("operator is rank deficient");

  OperatorNorms out;
  auto apply_m = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return m * v; };
  const double top = iterate(m.cols(), apply_m, apply_m, tol, out.iterations, false);
  const double bottom = iterate(
      m.cols(), [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return llt.solve(v); }, apply_m, tol,
      out.iterations, true);
  if (!(bottom > 1e-24 * top)) throw Error("operator is numerically rank deficient");
  out.lipschitz = std::sqrt(top);
  out.smallest = std::sqrt(bottom);
  out.kappa = out.lipschitz / out.smallest;
  return out;
}

OperatorNorms lipschitz_and_condition(const Decoder& decoder, double tol) {
  if (decoder.kind() == Decoder::Kind::identity) return OperatorNorms{1.0, 1.0, 1.0, 0};
  return lipschitz_and_condition(decoder.matrix(), tol);
}

BoundReport check_bound(const BoundInstance& instance) {
  return check_bound(instance, lipschitz_and_condition(instance.decoder));
}

BoundReport check_bound(const BoundInstance& in, const OperatorNorms& norms) {
  if (!(in.threshold > 0.0)) throw Error("bound check needs a contrast threshold > 0");
  const Tensor4 decoded = in.decoder.apply(in.latents);
  if (decoded.shape() != in.truth.shape()) {
    throw Error("decoded shape " + decoded.shape().str() + " does not match ground truth " + in.truth.shape().str());
  }
  const std::size_t F = decoded.shape().frames;
  if (F == 0) throw Error("bound check needs at least one frame");

  BoundReport r;
  r.frames = F;
  r.threshold = in.threshold;
  r.lipschitz = norms.lipschitz;
  r.kappa = norms.kappa;

  if (F > 1) {
    const ResidualField dv = frame_differences(in.truth);
    if (in.residual.data.shape() != dv.data.shape()) throw Error("residual shape does not match the frames");
    for (std::size_t k = 0; k + 1 < F; ++k) {
      auto a = in.residual.data.frame(k);
      auto b = dv.data.frame(k);
      double e = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) e += std::abs(a[i] - b[i]);
      r.epsilon = std::max(r.epsilon, e);
    }
    r.loss = residual_loss(in.latents, in.residual, in.decoder);
  }

  auto f0 = decoded.frame(0);
  auto v0 = in.truth.frame(0);
  for (std::size_t f = 0; f < F; ++f) {
    auto ff = decoded.frame(f);
    auto vf = in.truth.frame(f);
    for (std::size_t i = 0; i < ff.size(); ++i) r.lhs += std::abs((ff[i] - vf[i]) - (f0[i] - v0[i]));
  }

  const double C = in.threshold;
  r.rhs = (r.lipschitz * r.kappa / C) * r.loss + static_cast<double>(F) * r.epsilon / C;
  r.holds = r.lhs <= r.rhs;
  r.sufficient = static_cast<double>(F - 1) * C <= std::min(r.lipschitz * r.kappa, 2.0);
  return r;
}

BoundInstance make_random_instance(std::uint64_t seed, const RandomInstanceOptions& o) {
  if (o.min_frames < 1 || o.max_frames < o.min_frames || o.max_side < 1) throw Error("bad random instance options");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  const std::size_t F = pick(o.min_frames, o.max_frames);
  const std::size_t h = pick(1, o.max_side);
  const std::size_t w = pick(1, o.max_side);
  const std::size_t m = h * w;
  const std::size_t n = pick(1, m);

  BoundInstance inst;
  inst.threshold = o.threshold;
  for (;;) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = normal(rng);
    try {
      inst.decoder = Decoder::linear(std::move(a), FrameShape{1, 1, n}, FrameShape{1, h, w});
      break;
    } catch (const Error&) {
      // rank-deficient draw; try again
    }
  }

  Tensor4 v(Shape4{F, 1, h, w});
  for (std::size_t i = 0; i < m; ++i) v[i] = 0.2 + 0.6 * unit(rng);
  for (std::size_t f = 1; f < F; ++f) {
    for (std::size_t i = 0; i < m; ++i) {
      v[f * m + i] = std::clamp(v[(f - 1) * m + i] + o.motion_std * normal(rng), 0.0, 1.0);
    }
  }

  const FrameTimeline timeline = FrameTimeline::uniform(F, 1.0);
  FrameSequence seq{v, timeline};
  SimConfig sim;
  sim.contrast_threshold = o.threshold;
  if (F > 1) {
    const EventStream stream = simulate_events(seq, sim);
    const EventVolume vol = stack_events(group_events(stream, timeline), stream.width, stream.height);
    inst.residual = residual_from_events(vol, sim, 1);
  } else {
    inst.residual = ResidualField{Tensor4(Shape4{0, 1, h, w})};
  }

  Tensor4 u = inst.decoder.encode(v);
  for (double& x : u.values()) x += o.latent_noise * normal(rng);
  inst.latents = std::move(u);
  inst.truth = std::move(v);
  return inst;
}

std::vector<BoundReport> run_bound_batch(std::size_t count, std::uint64_t seed, const RandomInstanceOptions& options) {
  std::vector<BoundReport> out(count);
  std::vector<std::string> errors(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = check_bound(make_random_instance(seed + static_cast<std::uint64_t>(i), options));
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!errors[i].empty()) throw Error("bound instance " + std::to_string(seed + i) + ": " + errors[i]);
  }
  return out;
}

}  // namespace e2f
