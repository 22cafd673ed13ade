#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "zakai/errors.hpp"

namespace zakai::model {

/// Scalar linear-Gaussian model with quadratic intensity:
/// dX = b X dt + sigma dV, h(x) = h x, lambda(x) = lambda x^2, X0 ~ N(mu0,var0).
struct LinearModelParams {
  double b = 0.5;
  double sigma = 2.0;
  double h = 5.5;
  double lambda = 10.0;
  double mu0 = 5.0;
  double var0 = 0.01;
};

/// Multi-dimensional linear-Gaussian model with per-axis quadratic intensity:
/// dX = drift X dt + diffusion dV, h(x) = obs x,
/// lambda(x) = lambda0 + sum_k lambda_quad[k] x_k^2, X0 ~ N(mu0, diag(var0)).
struct LinearMdParams {
  Eigen::MatrixXd drift;       // d x d
  Eigen::MatrixXd diffusion;   // d x m
  Eigen::MatrixXd obs;         // l x d
  Eigen::VectorXd lambda_quad; // d
  double lambda0 = 0.0;
  Eigen::VectorXd mu0;
  Eigen::VectorXd var0;        // diagonal initial covariance
};

/// Intensity clamp restoring the boundedness assumption on lambda; the
/// quadratic example intensities are unbounded, so user functions are clamped
/// to this range (lambda identically zero is the one sanctioned exception,
/// used for the purely diffusive comparisons).
struct ClampBounds {
  double lambda_min = 1e-6;
  double lambda_max = 1e4;
};

struct ModelSpec {
  int dim_x = 1;      // d
  int dim_noise = 1;  // m
  int dim_z = 1;      // l

  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> diffusion;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> obs_fn;
  std::function<double(const Eigen::VectorXd&)> intensity;  // already clamped

  // Scalar fast paths, present when dim_x == dim_z == 1.
  std::function<double(double)> drift1;
  std::function<double(double)> diffusion1;
  std::function<double(double)> obs1;
  std::function<double(double)> intensity1;

  ClampBounds clamp;
  Eigen::VectorXd mu0;
  Eigen::MatrixXd cov0;

  // Structured provenance, set by the factories below; enables closed-form
  // coefficient assembly and closed-form rebased matrices.
  std::optional<LinearModelParams> linear;
  std::optional<LinearMdParams> linear_md;
};

ModelSpec make_linear_model(const LinearModelParams& p, ClampBounds clamp = {});
ModelSpec make_linear_md_model(const LinearMdParams& p, ClampBounds clamp = {});

/// Simulated data on the equidistant grid t_k = k*dt, k = 0..K.
/// dz.row(k) and dn[k] are the observation increments over [t_k, t_{k+1}].
struct PathBundle {
  double dt = 0.0;
  std::vector<double> times;  // K+1
  Eigen::MatrixXd x;          // (K+1) x d
  Eigen::MatrixXd dz;         // K x l
  std::vector<int> dn;        // K
  std::uint64_t seed = 0;

  int steps() const { return int(dn.size()); }
  int dim_x() const { return int(x.cols()); }
  int dim_z() const { return int(dz.cols()); }
};

/// Euler-Maruyama path of the signal SDE; deterministic given the seed.
Eigen::MatrixXd simulate_signal(const ModelSpec& spec, double dt, int steps,
                                std::uint64_t seed);

/// Observation increments given a signal path:
///   dz_k = h(X_{t_k}) dt + sqrt(dt) eta_k,
///   dn_k ~ Poisson(lambda(X_{t_k}) dt),
/// from an RNG stream independent of the signal stream.
std::pair<Eigen::MatrixXd, std::vector<int>> simulate_observations(
    const ModelSpec& spec, const Eigen::MatrixXd& x_path, double dt,
    std::uint64_t seed);

/// Signal + observations in one bundle; the two streams are derived from
/// the given seed but independent.
PathBundle simulate_bundle(const ModelSpec& spec, double dt, int steps,
                           std::uint64_t seed);

/// Stream-splitting helper: stable derived seed for (seed, index, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index,
                          std::uint64_t stream);

}  // namespace zakai::model
