#pragma once

#include <cstdint>
#include <vector>

#include "e2f/decoder.hpp"
#include "e2f/simulator.hpp"

namespace e2f {

struct OperatorNorms {
  double lipschitz = 0.0;   // largest singular value
  double kappa = 0.0;       // largest / smallest singular value
  double smallest = 0.0;    // smallest singular value
  std::size_t iterations = 0;
};

// Power iteration on A^T A for the top eigenpair and inverse iteration (Cholesky solves) for the
// bottom one, each stopped when the eigen-residual falls below tol * eigenvalue. Throws if A is
// rank deficient or an iteration fails to converge.
OperatorNorms lipschitz_and_condition(const Eigen::MatrixXd& a, double tol = 1e-8);
OperatorNorms lipschitz_and_condition(const Decoder& decoder, double tol = 1e-8);

struct BoundInstance {
  Decoder decoder = Decoder::identity();
  Tensor4 latents;          // U, F latent frames
  Tensor4 truth;            // V, F pixel frames
  ResidualField residual;   // R, intensity units
  double threshold = 0.05;  // C
};

struct BoundReport {
  double lipschitz = 0.0;
  double kappa = 0.0;
  double threshold = 0.0;
  double epsilon = 0.0;  // max_k ||R_k - dV_k||_1
  double loss = 0.0;     // residual loss of U
  double lhs = 0.0;      // ||F_hat - V||_1 with F_hat_k = F_k - F_0 + V_0
  double rhs = 0.0;      // (L kappa / C) loss + F epsilon / C
  bool holds = false;
  // (F-1) C <= min(L kappa, 2): the telescoping argument guarantees lhs <= rhs.
  bool sufficient = false;
  std::size_t frames = 0;
};

// Frame 0 of the reconstruction is anchored to V_0 before the error is accumulated.
inline constexpr const char* kBoundAnchoring = "frame0";

BoundReport check_bound(const BoundInstance& instance);
// lhs/rhs pieces that do not depend on U are reused across calls with the same norms.
BoundReport check_bound(const BoundInstance& instance, const OperatorNorms& norms);

struct RandomInstanceOptions {
  std::size_t min_frames = 2;
  std::size_t max_frames = 12;
  std::size_t max_side = 4;   // frames are 1 x h x w with h, w in [1, max_side]
  double threshold = 0.05;
  double motion_std = 0.08;   // per-step intensity random walk
  double latent_noise = 0.05; // perturbation of U around the encoded truth
};

// Random full-rank linear decoder, random-walk ground truth, simulator-generated residuals and a
// perturbed latent estimate, all drawn from `seed`.
BoundInstance make_random_instance(std::uint64_t seed, const RandomInstanceOptions& options = {});

// Instances seed, seed+1, ...; parallel over instances.
std::vector<BoundReport> run_bound_batch(std::size_t count, std::uint64_t seed,
                                         const RandomInstanceOptions& options = {});

}  // namespace e2f
