#pragma once

#include "zakai/model.hpp"

namespace zakai::reference {

struct ParticleCloud {
  Eigen::MatrixXd positions;    // N x d
  Eigen::VectorXd log_weights;  // N
  double ess = 0.0;
};

struct PfEstimateRow {
  double t = 0.0;
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;  // per-axis weighted variances
  double ess = 0.0;
};

/// Bootstrap particle filter for the mixed-observation model: Euler-Maruyama
/// proposal, weight factor
///   exp(h(x)^T dz - |h(x)|^2 dt / 2) * lambda(x)^{dn} * exp(-(lambda(x)-1) dt),
/// systematic resampling when ESS < N/2. Emits one row per grid point.
std::vector<PfEstimateRow> particle_filter(const model::ModelSpec& spec,
                                           const model::PathBundle& bundle,
                                           int n_particles,
                                           std::uint64_t seed);

struct KalmanBucyResult {
  std::vector<double> mean;      // per grid point
  std::vector<double> variance;  // per grid point
};

/// Explicit filter for the scalar linear model with the point channel
/// disabled: Euler integration of
///   dm = b m dt + P h (dz - h m dt),  dP = (2 b P + sigma^2 - h^2 P^2) dt.
KalmanBucyResult kalman_bucy(const model::LinearModelParams& p,
                             const model::PathBundle& bundle);

}  // namespace zakai::reference
