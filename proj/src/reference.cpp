#include "zakai/reference.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "zakai/errors.hpp"

namespace zakai::reference {

namespace {

// Normalizes log weights in place; returns the effective sample size.
double normalize_weights(Eigen::VectorXd& log_w, int step) {
  const double mx = log_w.maxCoeff();
  require(std::isfinite(mx), ErrorCode::divergence,
          "particle_filter: weight collapse (all weights vanished) at step " +
              std::to_string(step));
  double sum = 0.0;
  for (int i = 0; i < log_w.size(); ++i) sum += std::exp(log_w(i) - mx);
  const double log_sum = mx + std::log(sum);
  double sq = 0.0;
  for (int i = 0; i < log_w.size(); ++i) {
    log_w(i) -= log_sum;
    const double w = std::exp(log_w(i));
    sq += w * w;
  }
  return 1.0 / sq;
}

void weighted_moments(const Eigen::MatrixXd& pos, const Eigen::VectorXd& log_w,
                      Eigen::VectorXd& mean, Eigen::VectorXd& var) {
  const int d = int(pos.cols());
  mean = Eigen::VectorXd::Zero(d);
  var = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < pos.rows(); ++i)
    mean += std::exp(log_w(i)) * pos.row(i).transpose();
  for (int i = 0; i < pos.rows(); ++i) {
    const Eigen::VectorXd dx = pos.row(i).transpose() - mean;
    var += std::exp(log_w(i)) * dx.cwiseProduct(dx);
  }
}

}  // namespace

std::vector<PfEstimateRow> particle_filter(const model::ModelSpec& spec,
                                           const model::PathBundle& bundle,
                                           int n_particles,
                                           std::uint64_t seed) {
  require(n_particles >= 2, ErrorCode::invalid_argument,
          "particle_filter: need at least 2 particles");
  const int d = spec.dim_x, m = spec.dim_noise, l = spec.dim_z;
  require(bundle.steps() == 0 || bundle.dim_z() == l, ErrorCode::invalid_argument,
          "particle_filter: bundle channel count does not match the model");
  const int N = n_particles;
  const double dt = bundle.dt;
  const double sq = std::sqrt(dt);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  ParticleCloud cloud;
  cloud.positions.resize(N, d);
  cloud.log_weights = Eigen::VectorXd::Constant(N, -std::log(double(N)));

  Eigen::LLT<Eigen::MatrixXd> llt(spec.cov0);
  require(llt.info() == Eigen::Success, ErrorCode::invalid_argument,
          "particle_filter: cov0 must be symmetric positive definite");
  Eigen::VectorXd xi(d);
  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < d; ++k) xi(k) = normal(rng);
    cloud.positions.row(i) = (spec.mu0 + llt.matrixL() * xi).transpose();
  }
  cloud.ess = double(N);

  std::vector<PfEstimateRow> rows;
  rows.reserve(bundle.steps() + 1);
  auto emit = [&](double t) {
    PfEstimateRow row;
    row.t = t;
    weighted_moments(cloud.positions, cloud.log_weights, row.mean, row.variance);
    row.ess = cloud.ess;
    rows.push_back(row);
  };
  emit(bundle.times.empty() ? 0.0 : bundle.times[0]);

  Eigen::VectorXd noise(m);
  Eigen::MatrixXd resampled(N, d);
  for (int k = 0; k < bundle.steps(); ++k) {
    const Eigen::VectorXd dz = bundle.dz.row(k).transpose();
    const int dn = bundle.dn[k];

    for (int i = 0; i < N; ++i) {
      Eigen::VectorXd x = cloud.positions.row(i).transpose();
      for (int c = 0; c < m; ++c) noise(c) = normal(rng);
      x = x + spec.drift(x) * dt + spec.diffusion(x) * (sq * noise);
      cloud.positions.row(i) = x.transpose();

      const Eigen::VectorXd hx = spec.obs_fn(x);
      const double lam = spec.intensity(x);
      double dlw = hx.dot(dz) - 0.5 * hx.squaredNorm() * dt - (lam - 1.0) * dt;
      if (dn > 0)
        dlw += lam > 0.0 ? dn * std::log(lam)
                         : -std::numeric_limits<double>::infinity();
      cloud.log_weights(i) += dlw;
    }

    cloud.ess = normalize_weights(cloud.log_weights, k + 1);
    if (cloud.ess < 0.5 * N) {
      // Systematic resampling with a single uniform draw.
      const double u0 = unif(rng) / N;
      double cum = std::exp(cloud.log_weights(0));
      int j = 0;
      for (int i = 0; i < N; ++i) {
        const double u = u0 + double(i) / N;
        while (u > cum && j + 1 < N) cum += std::exp(cloud.log_weights(++j));
        resampled.row(i) = cloud.positions.row(j);
      }
      cloud.positions = resampled;
      cloud.log_weights.setConstant(-std::log(double(N)));
      cloud.ess = double(N);
    }
    emit(bundle.times[k + 1]);
  }
  return rows;
}

KalmanBucyResult kalman_bucy(const model::LinearModelParams& p,
                             const model::PathBundle& bundle) {
  const double dt = bundle.dt;
  KalmanBucyResult out;
  out.mean.reserve(bundle.steps() + 1);
  out.variance.reserve(bundle.steps() + 1);
  double mean = p.mu0;
  double var = p.var0;
  out.mean.push_back(mean);
  out.variance.push_back(var);
  for (int k = 0; k < bundle.steps(); ++k) {
    const double dz = bundle.dz(k, 0);
    const double innovation = dz - p.h * mean * dt;
    const double gain = var * p.h;
    mean += p.b * mean * dt + gain * innovation;
    var += (2.0 * p.b * var + p.sigma * p.sigma -
            p.h * p.h * var * var) * dt;
    out.mean.push_back(mean);
    out.variance.push_back(var);
  }
  return out;
}

}  // namespace zakai::reference
