#include <cmath>

#include "doctest.h"
#include "zakai/adaptive.hpp"
#include "zakai/galerkin.hpp"
#include "zakai/reference.hpp"

using namespace zakai;
using galerkin::CoefficientMatrices;
using galerkin::FilterState;
using galerkin::StepMethod;
using hermite::BasisSpec;
using model::LinearModelParams;

namespace {

FilterState unit_state(int n, double mu = 0.0, double sigma = 1.0) {
  FilterState s;
  s.basis.n = n;
  s.basis.mu_basis = mu;
  s.basis.sigma_basis = sigma;
  s.coeffs = Eigen::VectorXd::Zero(n);
  s.coeffs(0) = 1.0;
  return s;
}

}  // namespace

TEST_CASE("kalman_matrices: pinned entries at the headline parameters") {
  LinearModelParams p;  // b=0.5 sigma=2 h=5.5 lambda=10
  const auto m = galerkin::kalman_matrices(6, p);

  CHECK(m.A(0, 0) == doctest::Approx(-0.75));
  CHECK(m.A(1, 1) == doctest::Approx(-1.75));
  CHECK(m.A(2, 2) == doctest::Approx(-2.75));
  CHECK(m.B[0](0, 1) == doctest::Approx(5.5));
  CHECK(m.B[0](1, 0) == doctest::Approx(5.5));
  CHECK(m.B[0](1, 2) == doctest::Approx(5.5 * std::sqrt(2.0)));
  CHECK(m.B[0](2, 1) == doctest::Approx(5.5 * std::sqrt(2.0)));
  CHECK(m.C(0, 0) == doctest::Approx(9.0));
  CHECK(m.C(1, 1) == doctest::Approx(29.0));
  CHECK(m.C(0, 2) == doctest::Approx(10.0 * std::sqrt(2.0)));
  CHECK(m.C(2, 0) == doctest::Approx(10.0 * std::sqrt(2.0)));
  CHECK(m.D.isIdentity(1e-15));

  // B and C are symmetric, A is not.
  CHECK((m.B[0] - m.B[0].transpose()).norm() == 0.0);
  CHECK((m.C - m.C.transpose()).norm() == 0.0);
  CHECK((m.A - m.A.transpose()).norm() > 1.0);
}

TEST_CASE("quadrature assembly matches the closed forms") {
  const auto rule = numerics::gauss_hermite(numerics::default_node_count(12));
  for (double b : {-0.5, 0.5})
    for (double lam : {0.1, 10.0}) {
      LinearModelParams p;
      p.b = b;
      p.lambda = lam;
      const auto spec = model::make_linear_model(p);
      BasisSpec basis;
      basis.n = 12;
      const auto quad = galerkin::assemble_quadrature(spec, basis, rule);
      const auto closed = galerkin::kalman_matrices(12, p);
      CHECK((quad.A - closed.A).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK((quad.B[0] - closed.B[0]).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK((quad.C - closed.C).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK((quad.D - closed.D).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("assembly degenerate cases: lambda == 1 and h == 0") {
  LinearModelParams p;
  const auto spec = model::make_linear_model(p);
  model::ModelSpec unit = spec;
  unit.intensity1 = [](double) { return 1.0; };
  unit.intensity = [](const Eigen::VectorXd&) { return 1.0; };
  unit.obs1 = [](double) { return 0.0; };
  unit.obs_fn = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1); };
  unit.linear.reset();
  BasisSpec basis;
  basis.n = 8;
  const auto rule = numerics::gauss_hermite(120);
  const auto m = galerkin::assemble_quadrature(unit, basis, rule);
  CHECK(m.C.cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(m.B[0].cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("steppers: scalar single-basis instances") {
  // n=1 system: A-C=alpha, B=beta, C=gamma, D=1.
  CoefficientMatrices m;
  m.basis.n = 1;
  m.A = Eigen::MatrixXd::Constant(1, 1, 0.3);   // alpha + gamma
  m.C = Eigen::MatrixXd::Constant(1, 1, 0.1);   // gamma
  m.B = {Eigen::MatrixXd::Constant(1, 1, 0.7)};
  m.D = Eigen::MatrixXd::Identity(1, 1);

  FilterState s = unit_state(1);
  const double dt = 0.01, dz = 0.05;
  const int dn = 2;
  const auto next = galerkin::em_step(s, m, Eigen::VectorXd::Constant(1, dz),
                                      dn, dt);
  const double expected = 1.0 + (0.3 - 0.1) * dt + 0.7 * dz + 0.1 * dn;
  // Renormalized to 1 with the factor folded into log_scale.
  CHECK(next.coeffs(0) == doctest::Approx(1.0));
  CHECK(next.log_scale == doctest::Approx(std::log(expected)));
  CHECK(next.t == doctest::Approx(dt));

  // Zero increments at dt=0 leave the state unchanged.
  const auto fixed = galerkin::em_step(s, m, Eigen::VectorXd::Zero(1), 0, 0.0);
  CHECK(fixed.coeffs(0) == doctest::Approx(1.0));
  CHECK(fixed.log_scale == doctest::Approx(0.0));

  // SU with A=C=0, B=beta: factor exp(beta dz - beta^2 dt/2).
  CoefficientMatrices su;
  su.basis.n = 1;
  su.A = Eigen::MatrixXd::Zero(1, 1);
  su.C = Eigen::MatrixXd::Zero(1, 1);
  su.B = {Eigen::MatrixXd::Constant(1, 1, 0.7)};
  su.D = Eigen::MatrixXd::Identity(1, 1);
  const Eigen::MatrixXd prop = Eigen::MatrixXd::Identity(1, 1);
  const auto snext = galerkin::su_step(s, su, prop,
                                       Eigen::VectorXd::Constant(1, dz), 0, dt);
  CHECK(snext.log_scale ==
        doctest::Approx(0.7 * dz - 0.5 * 0.7 * 0.7 * dt).epsilon(1e-12));

  // SU jump stage: dn=2 with C=cI multiplies by (1+c)^2.
  CoefficientMatrices ju;
  ju.basis.n = 1;
  ju.A = Eigen::MatrixXd::Zero(1, 1);
  ju.C = Eigen::MatrixXd::Constant(1, 1, 0.4);
  ju.B = {Eigen::MatrixXd::Zero(1, 1)};
  ju.D = Eigen::MatrixXd::Identity(1, 1);
  const auto jnext = galerkin::su_step(s, ju, prop, Eigen::VectorXd::Zero(1),
                                       2, 0.0);
  CHECK(jnext.log_scale == doctest::Approx(2.0 * std::log(1.4)).epsilon(1e-12));
}

TEST_CASE("conditional moments and density: pinned states") {
  const auto table = hermite::build_coeff_table(22);

  // Pure first basis function: N(0, 2) after normalization.
  FilterState s = unit_state(8);
  const auto est = galerkin::conditional_moments(s, table);
  CHECK(est.mean == doctest::Approx(0.0));
  CHECK(est.variance == doctest::Approx(2.0).epsilon(1e-12));

  const auto mv = galerkin::moment_vectors(table, 8);
  CHECK(galerkin::density_eval(s, mv, 0.0) ==
        doctest::Approx(1.0 / std::sqrt(4.0 * M_PI)).epsilon(1e-12));

  // Adapted pure first basis function: translation equivariance.
  FilterState a = unit_state(8, 5.0, 1.0);
  CHECK(galerkin::conditional_moments(a, table).mean == doctest::Approx(5.0));

  // Projection of N(0,1) reconstructs its own moments at n=20.
  FilterState p = unit_state(20);
  const auto coeffs = hermite::project_gaussian(table, 0.0, 1.0, 20);
  for (int i = 0; i < 20; ++i) p.coeffs(i) = coeffs[i];
  const auto pest = galerkin::conditional_moments(p, table);
  CHECK(std::abs(pest.mean) <= 1e-8);
  // Exact second-moment truncation of the n=20 projection (40-digit
  // quadrature oracle): variance 0.99979326793401791...
  CHECK(pest.variance == doctest::Approx(0.999793267934018).epsilon(1e-9));
  CHECK(std::abs(pest.variance - 1.0) <= 3e-4);
  const auto pmv = galerkin::moment_vectors(table, 20);
  CHECK(galerkin::density_eval(p, pmv, 0.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-4));

  // Scale invariance of every normalized output.
  FilterState scaled = p;
  scaled.coeffs *= 137.0;
  const auto sest = galerkin::conditional_moments(scaled, table);
  CHECK(sest.mean == doctest::Approx(pest.mean));
  CHECK(sest.variance == doctest::Approx(pest.variance));
  CHECK(galerkin::density_eval(scaled, pmv, 0.3) ==
        doctest::Approx(galerkin::density_eval(p, pmv, 0.3)));

  // Degenerate state rejects moment queries.
  FilterState degenerate = unit_state(2);
  degenerate.coeffs(0) = 0.0;
  degenerate.coeffs(1) = 1.0;  // (1, e_2) = 0
  CHECK_THROWS_AS(static_cast<void>(galerkin::conditional_moments(degenerate, table)),
                  Error);
}

TEST_CASE("density integrates to one over the quadrature grid") {
  const auto table = hermite::build_coeff_table(22);
  const auto mv = galerkin::moment_vectors(table, 12);
  FilterState s = unit_state(12, 1.0, 2.0);
  s.coeffs = Eigen::VectorXd::Random(12).cwiseAbs();
  s.coeffs(0) += 2.0;  // keep the normalizer well away from zero
  const auto rule = numerics::gauss_hermite(160);
  const double integral = numerics::inner_product(
      [&](double x) { return galerkin::density_eval(s, mv, x); },
      [](double) { return 1.0; }, rule, 1.0, 2.0);
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("run_filter: empty bundle, renormalization invariance, EM~SU") {
  LinearModelParams p;
  const auto spec = model::make_linear_model(p);
  const auto table = hermite::build_coeff_table(13);
  const auto basis = adaptive::initial_basis(spec, 12);
  const auto q0 = galerkin::project_initial(spec, basis, table);

  model::PathBundle empty;
  empty.dt = 1e-4;
  empty.times = {0.0};
  empty.x = Eigen::MatrixXd::Constant(1, 1, 5.0);
  empty.dz = Eigen::MatrixXd::Zero(0, 1);
  const auto only_t0 =
      galerkin::run_filter(spec, basis, StepMethod::SU, empty, q0);
  CHECK(only_t0.size() == 1);
  CHECK(only_t0[0].mean == doctest::Approx(5.0).epsilon(1e-6));

  const auto bundle = model::simulate_bundle(spec, 1e-4, 500, 11);
  galerkin::RunOptions raw;
  raw.renormalize = false;
  const auto with = galerkin::run_filter(spec, basis, StepMethod::SU, bundle, q0);
  const auto without =
      galerkin::run_filter(spec, basis, StepMethod::SU, bundle, q0, raw);
  REQUIRE(with.size() == without.size());
  for (size_t k = 0; k < with.size(); ++k) {
    CHECK(std::abs(with[k].mean - without[k].mean) <= 1e-10);
    CHECK(std::abs(with[k].variance - without[k].variance) <= 1e-10);
  }

  // EM and SU agree at fine dt on the normalized means. Checked in the
  // gentle-information regime where both steppers resolve the dynamics;
  // strong observations push the Euler multiplier past its stability range
  // (that contrast is the step-size acceptance check).
  LinearModelParams gentle = p;
  gentle.h = 0.1;
  gentle.lambda = 0.1;
  const auto gspec = model::make_linear_model(gentle);
  const auto gbundle = model::simulate_bundle(gspec, 1e-4, 2000, 11);
  const auto gs = adaptive::run_aga(gspec, adaptive::initial_basis(gspec, 12),
                                    StepMethod::SU, gbundle, {});
  const auto ge = adaptive::run_aga(gspec, adaptive::initial_basis(gspec, 12),
                                    StepMethod::EM, gbundle, {});
  for (size_t k = 0; k < gs.size(); ++k)
    CHECK(std::abs(gs[k].mean - ge[k].mean) <= 1e-2);
}

TEST_CASE("gaussian-bump basis: gram solve path and tracking") {
  LinearModelParams p;
  p.h = 0.5;  // the EM multiplier must stay in range for this family
  p.lambda = 0.0;
  p.sigma = 1.0;
  p.mu0 = 2.0;
  p.var0 = 1.0;
  const auto spec = model::make_linear_model(p);
  const auto bundle = model::simulate_bundle(spec, 1e-3, 300, 9);
  const auto kb = reference::kalman_bucy(p, bundle);

  hermite::BasisSpec basis;
  basis.family = hermite::BasisFamily::Gaussian;
  basis.n = 25;
  basis.mu_basis = 2.5;
  basis.sigma_basis = 1.2;
  const auto table = hermite::build_coeff_table(1);
  const auto q0 = galerkin::project_initial(spec, basis, table);
  galerkin::RunOptions opt;
  const auto rows =
      galerkin::run_filter(spec, basis, StepMethod::EM, bundle, q0, opt);
  for (size_t k = 0; k < rows.size(); ++k)
    CHECK(std::abs(rows[k].mean - kb.mean[k]) <= 0.05);

  // The splitting-up method demands an orthonormal basis.
  CHECK_THROWS_AS(static_cast<void>(galerkin::run_filter(
                      spec, basis, StepMethod::SU, bundle, q0, opt)),
                  Error);
}

TEST_CASE("density clamp flag floors negative lobes at zero") {
  const auto table = hermite::build_coeff_table(8);
  const auto mv = galerkin::moment_vectors(table, 6);
  FilterState s = unit_state(6);
  s.coeffs(0) = 1.0;
  s.coeffs(2) = -0.8;  // force visible negative lobes
  bool saw_negative = false;
  for (double x = -4.0; x <= 4.0; x += 0.05) {
    const double raw = galerkin::density_eval(s, mv, x);
    const double clamped = galerkin::density_eval(s, mv, x, true);
    if (raw < 0.0) {
      saw_negative = true;
      CHECK(clamped == 0.0);
    } else {
      CHECK(clamped == raw);
    }
  }
  CHECK(saw_negative);
}

TEST_CASE("a point-process jump pushes mass outward on a symmetric state") {
  // Symmetric state centered at 0 with intensity lambda x^2 increasing in |x|.
  LinearModelParams p;
  p.lambda = 10.0;
  const auto mats = galerkin::kalman_matrices(12, p);
  const auto table = hermite::build_coeff_table(14);

  FilterState s = unit_state(12);
  const auto coeffs = hermite::project_gaussian(table, 0.0, 1.0, 12);
  for (int i = 0; i < 12; ++i) s.coeffs(i) = coeffs[i];
  const double m2_before = galerkin::conditional_moments(s, table).variance;

  const Eigen::MatrixXd prop = Eigen::MatrixXd::Identity(12, 12);
  const auto jumped = galerkin::su_step(s, mats, prop, Eigen::VectorXd::Zero(1),
                                        1, 0.0);
  const double m2_after = galerkin::conditional_moments(jumped, table).variance;
  CHECK(m2_after >= m2_before);
}

TEST_CASE("zero-information run tracks the prior moments") {
  // h = 0 and lambda = 1 make the observations uninformative; the filter is
  // the forward density evolution, whose mean solves dm/dt = b m.
  LinearModelParams p;
  p.h = 0.0;
  p.mu0 = 1.0;
  p.var0 = 1.0;
  model::ModelSpec spec = model::make_linear_model(p);
  spec.intensity1 = [](double) { return 1.0; };
  spec.intensity = [](const Eigen::VectorXd&) { return 1.0; };
  spec.linear.reset();  // quadrature assembly with the unit intensity

  const double T = 0.2, dt = 1e-3;
  const auto bundle = model::simulate_bundle(spec, dt, int(T / dt + 0.5), 21);
  galerkin::RunOptions opt;
  const auto basis = adaptive::initial_basis(spec, 16);
  const auto table = hermite::build_coeff_table(17);
  const auto q0 = galerkin::project_initial(spec, basis, table);
  const auto rows = galerkin::run_filter(spec, basis, StepMethod::SU, bundle,
                                         q0, opt);
  const auto& last = rows.back();
  CHECK(std::abs(last.mean - 1.0 * std::exp(0.5 * T)) <= 1e-2);
  // Prior variance of the OU bridge: var0 e^{2bT} + sigma^2 (e^{2bT}-1)/(2b).
  const double want_var = 1.0 * std::exp(2.0 * 0.5 * T) +
                          4.0 * (std::exp(2.0 * 0.5 * T) - 1.0) / (2.0 * 0.5);
  CHECK(std::abs(last.variance - want_var) <= 1e-2 * want_var);
}
