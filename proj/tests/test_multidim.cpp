#include <cmath>

#include "doctest.h"
#include "zakai/multidim.hpp"
#include "zakai/reference.hpp"

using namespace zakai;
using galerkin::StepMethod;
using model::LinearMdParams;
using model::LinearModelParams;
using multidim::TensorBasisSpec;

namespace {

TensorBasisSpec tensor(int d, int n, double mu = 0.0, double sigma = 1.0) {
  TensorBasisSpec b;
  b.d = d;
  b.n_per_dim = n;
  b.mu = Eigen::VectorXd::Constant(d, mu);
  b.sigma = Eigen::VectorXd::Constant(d, sigma);
  return b;
}

// Two decoupled copies of the scalar linear model; the intensity reads the
// first axis only.
LinearMdParams decoupled_params(const LinearModelParams& p) {
  LinearMdParams md;
  md.drift = p.b * Eigen::MatrixXd::Identity(2, 2);
  md.diffusion = p.sigma * Eigen::MatrixXd::Identity(2, 2);
  md.obs = p.h * Eigen::MatrixXd::Identity(2, 2);
  md.lambda_quad = Eigen::VectorXd::Zero(2);
  md.lambda_quad(0) = p.lambda;
  md.mu0 = Eigen::VectorXd::Constant(2, p.mu0);
  md.var0 = Eigen::VectorXd::Constant(2, p.var0);
  return md;
}

}  // namespace

TEST_CASE("tensor indexing: pinned values and round trip") {
  const auto b = tensor(2, 3);
  CHECK(multidim::tensor_index(b, {1, 1}) == 1);
  CHECK(multidim::tensor_index(b, {2, 3}) == 6);
  for (int flat = 1; flat <= 9; ++flat)
    CHECK(multidim::tensor_index(b, multidim::tensor_multi(b, flat)) == flat);
  CHECK_THROWS_AS(multidim::tensor_index(b, {0, 1}), Error);
  CHECK_THROWS_AS(multidim::tensor_index(b, {1, 4}), Error);
  CHECK_THROWS_AS(multidim::tensor_multi(b, 10), Error);

  auto too_big = tensor(5, 7);
  CHECK_THROWS_AS(multidim::validate(too_big), Error);
}

TEST_CASE("tensor basis evaluation is separable") {
  const auto b = tensor(2, 3);
  Eigen::VectorXd origin = Eigen::VectorXd::Zero(2);
  CHECK(multidim::tensor_basis_eval(b, 1, origin) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-12));
  // Any axis with component index 2 vanishes at the center.
  CHECK(multidim::tensor_basis_eval(b, multidim::tensor_index(b, {2, 1}),
                                    origin) == doctest::Approx(0.0));
  Eigen::VectorXd pt(2);
  pt << 0.7, -0.4;
  const auto ab = multidim::axis_basis(b, 0);
  for (int flat = 1; flat <= 9; ++flat) {
    const auto multi = multidim::tensor_multi(b, flat);
    CHECK(multidim::tensor_basis_eval(b, flat, pt) ==
          doctest::Approx(hermite::basis_eval(ab, multi[0], pt(0)) *
                          hermite::basis_eval(ab, multi[1], pt(1)))
              .epsilon(1e-14));
  }
}

TEST_CASE("d=1 assembly and runs delegate to the scalar module bitwise") {
  LinearModelParams p;
  const auto spec = model::make_linear_model(p);
  const auto rule = numerics::gauss_hermite(120);

  auto b1 = tensor(1, 10, 5.0, 0.1);
  model::ModelSpec spec_md = spec;  // same model, d = 1
  const auto md = multidim::assemble_md(spec_md, b1, rule);
  const auto s1 = galerkin::assemble_quadrature(spec, multidim::axis_basis(b1, 0), rule);
  CHECK(md.A == s1.A);
  CHECK(md.C == s1.C);
  CHECK(md.B[0] == s1.B[0]);

  const auto bundle = model::simulate_bundle(spec, 1e-4, 300, 17);
  multidim::MdRunOptions opt;
  opt.adaptive = true;
  const auto rows_md = multidim::run_filter_md(spec, b1, StepMethod::SU, bundle, opt);
  const auto rows_1d = adaptive::run_aga(spec, adaptive::initial_basis(spec, 10),
                                         StepMethod::SU, bundle, {});
  REQUIRE(rows_md.size() == rows_1d.size());
  for (size_t k = 0; k < rows_md.size(); ++k) {
    CHECK(rows_md[k].mean(0) == rows_1d[k].mean);
    CHECK(rows_md[k].variance(0) == rows_1d[k].variance);
  }
}

TEST_CASE("decoupled model: A is the Kronecker sum of the scalar blocks") {
  LinearModelParams p;
  p.mu0 = 0.0;
  p.var0 = 1.0;
  const auto md_params = decoupled_params(p);
  const auto spec = model::make_linear_md_model(md_params);
  const auto basis = tensor(2, 6);
  const auto rule = numerics::gauss_hermite(120);
  const auto mats = multidim::assemble_md(spec, basis, rule);

  const auto one = galerkin::kalman_matrices(6, p);
  const int n = 6, m = 36;
  Eigen::MatrixXd ks = Eigen::MatrixXd::Zero(m, m);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        ks(i * n + k, j * n + k) += one.A(i, j);  // A1 (x) I
        ks(k * n + i, k * n + j) += one.A(i, j);  // I (x) A1
      }
  CHECK((mats.A - ks).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(mats.D.isIdentity(1e-12));

  // Intensity reads axis 1 only: C = (C1 + I) (x) I - I.
  Eigen::MatrixXd cx = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        cx(i * n + k, j * n + k) += one.C(i, j) + (i == j ? 1.0 : 0.0);
  cx -= Eigen::MatrixXd::Identity(m, m);
  CHECK((mats.C - cx).cwiseAbs().maxCoeff() <= 1e-8);

  // Channel 1 reads axis 1, channel 2 reads axis 2.
  Eigen::MatrixXd b1 = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd b2 = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        b1(i * n + k, j * n + k) += one.B[0](i, j);
        b2(k * n + i, k * n + j) += one.B[0](i, j);
      }
  CHECK((mats.B[0] - b1).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((mats.B[1] - b2).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("structured assembly agrees with tensor quadrature at d=2") {
  LinearModelParams p;
  p.mu0 = 0.0;
  p.var0 = 1.0;
  LinearMdParams md = decoupled_params(p);
  md.drift(0, 1) = -0.3;  // couple the axes
  md.diffusion(1, 0) = 0.5;
  const auto spec = model::make_linear_md_model(md);
  const auto basis = tensor(2, 4, 0.2, 1.1);
  const auto rule = numerics::gauss_hermite(80);

  const auto closed = multidim::assemble_md(spec, basis, rule);
  model::ModelSpec generic = spec;
  generic.linear_md.reset();  // force the quadrature path
  const auto quad = multidim::assemble_md(generic, basis, rule);
  CHECK((closed.A - quad.A).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK((closed.C - quad.C).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK((closed.B[0] - quad.B[0]).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK((closed.B[1] - quad.B[1]).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK((quad.D - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() <=
        1e-8);

  // Unit intensity: C vanishes.
  LinearMdParams unit = decoupled_params(p);
  unit.lambda_quad.setZero();
  unit.lambda0 = 1.0;
  const auto zc =
      multidim::assemble_md(model::make_linear_md_model(unit), basis, rule);
  CHECK(zc.C.cwiseAbs().maxCoeff() <= 1e-12);

  // d=3 without declared structure is refused.
  model::ModelSpec generic3 = generic;
  generic3.dim_x = 3;
  CHECK_THROWS_AS(
      static_cast<void>(multidim::assemble_md(generic3, tensor(3, 3), rule)),
      Error);
}

TEST_CASE("axis permutation permutes the estimates") {
  // Asymmetric decoupled model: different drift per axis.
  LinearMdParams md;
  md.drift = Eigen::MatrixXd::Zero(2, 2);
  md.drift(0, 0) = 0.4;
  md.drift(1, 1) = -0.6;
  md.diffusion = Eigen::MatrixXd::Identity(2, 2);
  md.obs = Eigen::MatrixXd::Identity(2, 2) * 2.0;
  md.lambda_quad = Eigen::VectorXd::Zero(2);
  md.lambda0 = 1.0;
  md.mu0 = Eigen::VectorXd::Zero(2);
  md.mu0 << 1.0, -0.5;
  md.var0 = Eigen::VectorXd::Constant(2, 1.0);
  const auto spec = model::make_linear_md_model(md);

  LinearMdParams swapped = md;
  swapped.drift(0, 0) = md.drift(1, 1);
  swapped.drift(1, 1) = md.drift(0, 0);
  swapped.mu0 << md.mu0(1), md.mu0(0);
  const auto spec_sw = model::make_linear_md_model(swapped);

  const auto bundle = model::simulate_bundle(spec, 1e-3, 100, 5);
  model::PathBundle bundle_sw = bundle;
  bundle_sw.x.col(0).swap(bundle_sw.x.col(1));
  bundle_sw.dz.col(0).swap(bundle_sw.dz.col(1));

  auto basis = multidim::initial_basis_md(spec, 5);
  auto basis_sw = multidim::initial_basis_md(spec_sw, 5);
  const auto rows =
      multidim::run_filter_md(spec, basis, StepMethod::SU, bundle, {});
  const auto rows_sw =
      multidim::run_filter_md(spec_sw, basis_sw, StepMethod::SU, bundle_sw, {});
  REQUIRE(rows.size() == rows_sw.size());
  for (size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].mean(0) == doctest::Approx(rows_sw[k].mean(1)).epsilon(1e-10));
    CHECK(rows[k].mean(1) == doctest::Approx(rows_sw[k].mean(0)).epsilon(1e-10));
  }
}

TEST_CASE("decoupled purely diffusive d=2 run matches two scalar KB runs") {
  LinearModelParams p;
  p.lambda = 0.0;
  LinearMdParams md = decoupled_params(p);
  md.lambda_quad.setZero();  // both axes diffusive-only
  const auto spec = model::make_linear_md_model(md);
  const double dt = 2e-4;
  const auto bundle = model::simulate_bundle(spec, dt, 500, 34);

  multidim::MdRunOptions opt;
  opt.adaptive = true;
  const auto rows = multidim::run_filter_md(
      spec, multidim::initial_basis_md(spec, 10), StepMethod::SU, bundle, opt);

  for (int axis = 0; axis < 2; ++axis) {
    model::PathBundle axis_bundle;
    axis_bundle.dt = dt;
    axis_bundle.times = bundle.times;
    axis_bundle.x = bundle.x.col(axis);
    axis_bundle.dz = bundle.dz.col(axis);
    axis_bundle.dn.assign(bundle.steps(), 0);
    const auto kb = reference::kalman_bucy(p, axis_bundle);
    for (int k = 0; k <= bundle.steps(); ++k)
      CHECK(std::abs(rows[k].mean(axis) - kb.mean[k]) <=
            0.05 * std::sqrt(kb.variance[k]) + 1e-9);
  }
}
