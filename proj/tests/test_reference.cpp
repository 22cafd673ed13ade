#include <cmath>

#include "doctest.h"
#include "zakai/reference.hpp"

using namespace zakai;
using model::LinearModelParams;

TEST_CASE("kalman_bucy: pinned behavior") {
  LinearModelParams p;  // b=0.5 sigma=2 h=5.5

  // h = 0: no information, exponential mean and linear Riccati.
  LinearModelParams blind = p;
  blind.h = 0.0;
  model::PathBundle bundle;
  const int K = 1000;
  const double dt = 1e-3;
  bundle.dt = dt;
  bundle.times.resize(K + 1);
  for (int k = 0; k <= K; ++k) bundle.times[k] = k * dt;
  bundle.x = Eigen::MatrixXd::Zero(K + 1, 1);
  bundle.dz = Eigen::MatrixXd::Zero(K, 1);
  bundle.dn.assign(K, 0);
  const auto noinfo = reference::kalman_bucy(blind, bundle);
  CHECK(noinfo.mean.back() ==
        doctest::Approx(5.0 * std::exp(0.5)).epsilon(1e-3));

  // Self-consistent observations keep the mean on the exponential exactly.
  model::PathBundle self = bundle;
  double m = p.mu0;
  for (int k = 0; k < K; ++k) {
    self.dz(k, 0) = p.h * m * dt;
    m += p.b * m * dt;
  }
  const auto consistent = reference::kalman_bucy(p, self);
  m = p.mu0;
  for (int k = 0; k <= K; ++k) {
    CHECK(consistent.mean[k] == doctest::Approx(m).epsilon(1e-12));
    if (k < K) m += p.b * m * dt;
  }

  // Stationary variance: positive root of 2bP + sigma^2 - h^2 P^2 = 0.
  model::PathBundle longer = bundle;
  const int K2 = 2000;
  longer.times.resize(K2 + 1);
  longer.dt = 1e-3;
  for (int k = 0; k <= K2; ++k) longer.times[k] = k * 1e-3;
  longer.x = Eigen::MatrixXd::Zero(K2 + 1, 1);
  longer.dz = Eigen::MatrixXd::Zero(K2, 1);
  longer.dn.assign(K2, 0);
  const auto run = reference::kalman_bucy(p, longer);
  const double p_star =
      (p.b + std::sqrt(p.b * p.b + p.sigma * p.sigma * p.h * p.h)) /
      (p.h * p.h);
  CHECK(p_star == doctest::Approx(0.38055).epsilon(1e-4));
  CHECK(run.variance.back() == doctest::Approx(p_star).epsilon(0.01));

  // Information reduces the variance pathwise.
  const auto blind_run = reference::kalman_bucy(blind, longer);
  for (int k = 0; k <= K2; ++k) {
    CHECK(run.variance[k] > 0.0);
    CHECK(run.variance[k] <= blind_run.variance[k] + 1e-12);
  }
}

TEST_CASE("particle filter: unit likelihood keeps the prior cloud") {
  // h = 0 and lambda = 1: weights never change, no resampling.
  LinearModelParams p;
  p.h = 0.0;
  model::ModelSpec spec = model::make_linear_model(p);
  spec.intensity1 = [](double) { return 1.0; };
  spec.intensity = [](const Eigen::VectorXd&) { return 1.0; };
  const auto bundle = model::simulate_bundle(spec, 1e-3, 200, 12);
  const auto rows = reference::particle_filter(spec, bundle, 500, 99);
  for (const auto& r : rows) CHECK(r.ess == doctest::Approx(500.0));
  // Prior mean at T: mu0 e^{bT}.
  const double T = 0.2;
  const double se = std::sqrt(rows.back().variance(0) / 500.0);
  CHECK(std::abs(rows.back().mean(0) - 5.0 * std::exp(0.5 * T)) <= 4.0 * se);
}

TEST_CASE("particle filter agrees with Kalman-Bucy when jumps are off") {
  LinearModelParams p;
  p.lambda = 0.0;
  const auto spec = model::make_linear_model(p);
  const auto bundle = model::simulate_bundle(spec, 1e-3, 200, 4);
  const auto pf = reference::particle_filter(spec, bundle, 5000, 1234);
  const auto kb = reference::kalman_bucy(p, bundle);
  for (int k : {50, 100, 200}) {
    const double se = std::sqrt(std::max(pf[k].variance(0), 1e-12) /
                                std::max(pf[k].ess, 1.0));
    CHECK(std::abs(pf[k].mean(0) - kb.mean[k]) <= 3.0 * se + 2e-2);
  }
}

TEST_CASE("particle filter runs are reproducible and collapse is reported") {
  LinearModelParams p;
  const auto spec = model::make_linear_model(p);
  const auto bundle = model::simulate_bundle(spec, 1e-3, 100, 8);
  const auto a = reference::particle_filter(spec, bundle, 200, 7);
  const auto b = reference::particle_filter(spec, bundle, 200, 7);
  REQUIRE(a.size() == b.size());
  for (size_t k = 0; k < a.size(); ++k) CHECK(a[k].mean(0) == b[k].mean(0));

  CHECK_THROWS_AS(
      static_cast<void>(reference::particle_filter(spec, bundle, 1, 7)), Error);
}
