#include "zakai/model.hpp"

#include <cmath>
#include <random>
#include <string>

namespace zakai::model {

namespace {

double clamp_intensity(double v, const ClampBounds& c) {
  return std::min(std::max(v, c.lambda_min), c.lambda_max);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index,
                          std::uint64_t stream) {
  // splitmix64 over a mixed key; decorrelates the per-path streams.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1) +
                    0xBF58476D1CE4E5B9ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ModelSpec make_linear_model(const LinearModelParams& p, ClampBounds clamp) {
  require(p.sigma > 0.0, ErrorCode::invalid_argument, "linear model: sigma must be > 0");
  require(p.lambda >= 0.0, ErrorCode::invalid_argument,
          "linear model: lambda must be >= 0");
  require(p.var0 > 0.0, ErrorCode::invalid_argument, "linear model: var0 must be > 0");

  ModelSpec s;
  s.dim_x = s.dim_noise = s.dim_z = 1;
  s.clamp = clamp;
  const double b = p.b, sig = p.sigma, h = p.h, lam = p.lambda;
  s.drift1 = [b](double x) { return b * x; };
  s.diffusion1 = [sig](double) { return sig; };
  s.obs1 = [h](double x) { return h * x; };
  if (lam == 0.0) {
    s.intensity1 = [](double) { return 0.0; };  // exact lambda==0 override
  } else {
    s.intensity1 = [lam, clamp](double x) {
      return clamp_intensity(lam * x * x, clamp);
    };
  }
  s.drift = [b](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, b * x(0));
  };
  s.diffusion = [sig](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Constant(1, 1, sig);
  };
  s.obs_fn = [h](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, h * x(0));
  };
  auto i1 = s.intensity1;
  s.intensity = [i1](const Eigen::VectorXd& x) { return i1(x(0)); };
  s.mu0 = Eigen::VectorXd::Constant(1, p.mu0);
  s.cov0 = Eigen::MatrixXd::Constant(1, 1, p.var0);
  s.linear = p;
  return s;
}

ModelSpec make_linear_md_model(const LinearMdParams& p, ClampBounds clamp) {
  const int d = int(p.drift.rows());
  require(d >= 1 && p.drift.cols() == d, ErrorCode::invalid_argument,
          "linear_md model: drift must be square");
  require(p.diffusion.rows() == d, ErrorCode::invalid_argument,
          "linear_md model: diffusion rows must match dim");
  require(p.obs.cols() == d, ErrorCode::invalid_argument,
          "linear_md model: obs cols must match dim");
  require(p.lambda_quad.size() == d, ErrorCode::invalid_argument,
          "linear_md model: lambda_quad size must match dim");
  require(p.mu0.size() == d && p.var0.size() == d, ErrorCode::invalid_argument,
          "linear_md model: initial law size must match dim");
  require((p.var0.array() > 0.0).all(), ErrorCode::invalid_argument,
          "linear_md model: var0 entries must be > 0");
  require(p.lambda0 >= 0.0 && (p.lambda_quad.array() >= 0.0).all(),
          ErrorCode::invalid_argument,
          "linear_md model: intensity coefficients must be >= 0");

  ModelSpec s;
  s.dim_x = d;
  s.dim_noise = int(p.diffusion.cols());
  s.dim_z = int(p.obs.rows());
  s.clamp = clamp;
  const Eigen::MatrixXd B = p.drift, S = p.diffusion, H = p.obs;
  const Eigen::VectorXd lq = p.lambda_quad;
  const double l0 = p.lambda0;
  const bool lambda_zero = l0 == 0.0 && lq.isZero(0.0);
  s.drift = [B](const Eigen::VectorXd& x) -> Eigen::VectorXd { return B * x; };
  s.diffusion = [S](const Eigen::VectorXd&) { return S; };
  s.obs_fn = [H](const Eigen::VectorXd& x) -> Eigen::VectorXd { return H * x; };
  if (lambda_zero) {
    s.intensity = [](const Eigen::VectorXd&) { return 0.0; };
  } else {
    s.intensity = [l0, lq, clamp](const Eigen::VectorXd& x) {
      return clamp_intensity(l0 + lq.dot(x.cwiseProduct(x)), clamp);
    };
  }
  s.mu0 = p.mu0;
  s.cov0 = Eigen::MatrixXd(p.var0.asDiagonal());
  s.linear_md = p;
  return s;
}

Eigen::MatrixXd simulate_signal(const ModelSpec& spec, double dt, int steps,
                                std::uint64_t seed) {
  require(dt > 0.0, ErrorCode::invalid_argument, "simulate_signal: dt must be > 0");
  require(steps >= 1, ErrorCode::invalid_argument,
          "simulate_signal: steps must be >= 1");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int d = spec.dim_x, m = spec.dim_noise;
  const double sq = std::sqrt(dt);

  Eigen::MatrixXd path(steps + 1, d);

  // Draw X0 from N(mu0, cov0) via the Cholesky factor.
  Eigen::LLT<Eigen::MatrixXd> llt(spec.cov0);
  require(llt.info() == Eigen::Success, ErrorCode::invalid_argument,
          "simulate_signal: cov0 must be symmetric positive definite");
  Eigen::VectorXd xi(d);
  for (int i = 0; i < d; ++i) xi(i) = normal(rng);
  Eigen::VectorXd x = spec.mu0 + llt.matrixL() * xi;
  path.row(0) = x.transpose();

  Eigen::VectorXd noise(m);
  for (int k = 0; k < steps; ++k) {
    for (int i = 0; i < m; ++i) noise(i) = normal(rng);
    x = x + spec.drift(x) * dt + spec.diffusion(x) * (sq * noise);
    path.row(k + 1) = x.transpose();
  }
  return path;
}

std::pair<Eigen::MatrixXd, std::vector<int>> simulate_observations(
    const ModelSpec& spec, const Eigen::MatrixXd& x_path, double dt,
    std::uint64_t seed) {
  require(x_path.rows() >= 2, ErrorCode::invalid_argument,
          "simulate_observations: path must have length >= 2");
  const int steps = int(x_path.rows()) - 1;
  const int l = spec.dim_z;
  const double sq = std::sqrt(dt);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd dz(steps, l);
  std::vector<int> dn(steps, 0);
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd x = x_path.row(k).transpose();
    const Eigen::VectorXd hx = spec.obs_fn(x);
    for (int c = 0; c < l; ++c) dz(k, c) = hx(c) * dt + sq * normal(rng);
    const double lam = spec.intensity(x);
    if (lam > 0.0) {
      std::poisson_distribution<int> pois(lam * dt);
      dn[k] = pois(rng);
    }
  }
  return {dz, dn};
}

PathBundle simulate_bundle(const ModelSpec& spec, double dt, int steps,
                           std::uint64_t seed) {
  PathBundle b;
  b.dt = dt;
  b.seed = seed;
  b.x = simulate_signal(spec, dt, steps, derive_seed(seed, 0, 0));
  auto [dz, dn] = simulate_observations(spec, b.x, dt, derive_seed(seed, 0, 1));
  b.dz = std::move(dz);
  b.dn = std::move(dn);
  b.times.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) b.times[k] = k * dt;
  return b;
}

}  // namespace zakai::model
