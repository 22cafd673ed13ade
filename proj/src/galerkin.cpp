#include "zakai/galerkin.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace zakai::galerkin {

using hermite::BasisFamily;
using hermite::BasisSpec;
using model::ModelSpec;
using numerics::GramSolver;
using numerics::MappedRule;
using numerics::QuadratureRule;

namespace {

// Adapted basis values e_1..e_count and their first/second x-derivatives at x.
// For the Hermite family the derivatives come from the ladder relations
//   e_j' = (sqrt(j-1) e_{j-1} - sqrt(j) e_{j+1}) / 2,
//   e_j'' = (sqrt((j-1)(j-2)) e_{j-2} + (1-2j) e_j + sqrt(j(j+1)) e_{j+2}) / 4,
// scaled by 1/sigma per derivative order (e_0 := 0 removes all edge cases).
struct BasisPointValues {
  std::vector<double> v, d1, d2;
};

void eval_with_derivatives(const BasisSpec& basis, int n, double x,
                           BasisPointValues& out) {
  out.v.assign(n + 2, 0.0);
  out.d1.assign(n, 0.0);
  out.d2.assign(n, 0.0);
  if (basis.family == BasisFamily::Hermite) {
    hermite::basis_eval_all(basis, n + 2, x, out.v.data());
    const double inv_s = 1.0 / basis.sigma_basis;
    for (int j = 1; j <= n; ++j) {
      const double lo = j >= 2 ? std::sqrt(double(j - 1)) * out.v[j - 2] : 0.0;
      out.d1[j - 1] = 0.5 * inv_s * (lo - std::sqrt(double(j)) * out.v[j]);
      const double lo2 =
          j >= 3 ? std::sqrt(double((j - 1) * (j - 2))) * out.v[j - 3] : 0.0;
      out.d2[j - 1] = 0.25 * inv_s * inv_s *
                      (lo2 + (1.0 - 2.0 * j) * out.v[j - 1] +
                       std::sqrt(double(j) * (j + 1)) * out.v[j + 1]);
    }
  } else {
    const double w = hermite::gaussian_width(basis);
    hermite::basis_eval_all(basis, n, x, out.v.data());
    for (int j = 1; j <= n; ++j) {
      const double z = x - hermite::gaussian_center(basis, j);
      const double g = out.v[j - 1];
      out.d1[j - 1] = -z / (w * w) * g;
      out.d2[j - 1] = (z * z / (w * w * w * w) - 1.0 / (w * w)) * g;
    }
  }
}

double scalar_drift(const ModelSpec& spec, double x) {
  return spec.drift1 ? spec.drift1(x)
                     : spec.drift(Eigen::VectorXd::Constant(1, x))(0);
}
double scalar_diffusion(const ModelSpec& spec, double x) {
  return spec.diffusion1 ? spec.diffusion1(x)
                         : spec.diffusion(Eigen::VectorXd::Constant(1, x))(0, 0);
}
double scalar_obs(const ModelSpec& spec, double x) {
  return spec.obs1 ? spec.obs1(x)
                   : spec.obs_fn(Eigen::VectorXd::Constant(1, x))(0);
}
double scalar_intensity(const ModelSpec& spec, double x) {
  return spec.intensity1 ? spec.intensity1(x)
                         : spec.intensity(Eigen::VectorXd::Constant(1, x));
}

}  // namespace

CoefficientMatrices assemble_quadrature(const ModelSpec& spec,
                                        const BasisSpec& basis,
                                        const QuadratureRule& rule) {
  require(spec.dim_x == 1, ErrorCode::invalid_argument,
          "assemble_quadrature: one-dimensional models only");
  hermite::validate(basis);
  const int n = basis.n;
  const int l = spec.dim_z;

  CoefficientMatrices m;
  m.basis = basis;
  m.A = Eigen::MatrixXd::Zero(n, n);
  m.C = Eigen::MatrixXd::Zero(n, n);
  m.D = Eigen::MatrixXd::Zero(n, n);
  m.B.assign(l, Eigen::MatrixXd::Zero(n, n));

  const MappedRule q =
      numerics::map_rule(rule, basis.mu_basis, basis.sigma_basis);
  BasisPointValues pv;
  for (size_t k = 0; k < q.x.size(); ++k) {
    const double f = q.factor[k];
    if (f == 0.0) continue;
    const double x = q.x[k];
    eval_with_derivatives(basis, n, x, pv);

    const double bx = scalar_drift(spec, x);
    const double sx = scalar_diffusion(spec, x);
    const double half_a = 0.5 * sx * sx;
    const double lam1 = scalar_intensity(spec, x) - 1.0;
    const double hx = l == 1 ? scalar_obs(spec, x) : 0.0;
    Eigen::VectorXd hvec;
    if (l > 1) hvec = spec.obs_fn(Eigen::VectorXd::Constant(1, x));

    for (int j = 1; j <= n; ++j) {
      const double le_j = bx * pv.d1[j - 1] + half_a * pv.d2[j - 1];
      const double ej = pv.v[j - 1];
      for (int i = 1; i <= n; ++i) {
        const double ei = pv.v[i - 1];
        const double w = f * ei;
        m.A(j - 1, i - 1) += w * le_j;
        m.C(j - 1, i - 1) += w * lam1 * ej;
        m.D(j - 1, i - 1) += w * ej;
        if (l == 1) {
          m.B[0](j - 1, i - 1) += w * hx * ej;
        } else {
          for (int c = 0; c < l; ++c) m.B[c](j - 1, i - 1) += w * hvec(c) * ej;
        }
      }
    }
  }

  require(m.D.allFinite() && m.D.diagonal().minCoeff() > 0.0,
          ErrorCode::invalid_argument,
          "assemble_quadrature: quadrature underflow, no node carries basis mass");
  return m;
}

CoefficientMatrices kalman_matrices(int n, const model::LinearModelParams& p) {
  BasisSpec basis;
  basis.n = n;
  return kalman_matrices(n, p, basis);
}

CoefficientMatrices kalman_matrices(int n, const model::LinearModelParams& p,
                                    const BasisSpec& basis) {
  require(n >= 1, ErrorCode::invalid_argument, "kalman_matrices: n must be >= 1");
  require(basis.family == BasisFamily::Hermite, ErrorCode::invalid_argument,
          "kalman_matrices: Hermite basis only");
  const double c = basis.mu_basis, s = basis.sigma_basis;
  const double b = p.b, sig2 = p.sigma * p.sigma, h = p.h, lam = p.lambda;

  CoefficientMatrices m;
  m.basis = basis;
  m.basis.n = n;
  m.A = Eigen::MatrixXd::Zero(n, n);
  m.C = Eigen::MatrixXd::Zero(n, n);
  m.D = Eigen::MatrixXd::Identity(n, n);
  m.B.assign(1, Eigen::MatrixXd::Zero(n, n));

  const double diff = sig2 / (8.0 * s * s);
  for (int j = 1; j <= n; ++j) {
    m.A(j - 1, j - 1) = -0.5 * b + diff * (1.0 - 2.0 * j);
    if (j + 2 <= n)
      m.A(j - 1, j + 1) = (-0.5 * b + diff) * std::sqrt(double(j) * (j + 1));
    if (j - 2 >= 1)
      m.A(j - 1, j - 3) =
          (0.5 * b + diff) * std::sqrt(double(j - 1) * (j - 2));
    if (j + 1 <= n)
      m.A(j - 1, j) = -(b * c / s) * 0.5 * std::sqrt(double(j));
    if (j - 1 >= 1)
      m.A(j - 1, j - 2) = (b * c / s) * 0.5 * std::sqrt(double(j - 1));

    m.B[0](j - 1, j - 1) = h * c;
    if (j + 1 <= n) m.B[0](j - 1, j) = h * s * std::sqrt(double(j));
    if (j - 1 >= 1) m.B[0](j - 1, j - 2) = h * s * std::sqrt(double(j - 1));

    m.C(j - 1, j - 1) = lam * (c * c + s * s * (2.0 * j - 1.0)) - 1.0;
    if (j + 1 <= n) m.C(j - 1, j) = 2.0 * lam * c * s * std::sqrt(double(j));
    if (j - 1 >= 1)
      m.C(j - 1, j - 2) = 2.0 * lam * c * s * std::sqrt(double(j - 1));
    if (j + 2 <= n)
      m.C(j - 1, j + 1) = lam * s * s * std::sqrt(double(j) * (j + 1));
    if (j - 2 >= 1)
      m.C(j - 1, j - 3) = lam * s * s * std::sqrt(double((j - 1) * (j - 2)));
  }
  return m;
}

MomentVectors moment_vectors(const hermite::HermiteCoeffTable& table, int n) {
  MomentVectors mv;
  mv.w0.resize(n);
  mv.w1.resize(n);
  mv.w2.resize(n);
  for (int i = 1; i <= n; ++i) {
    mv.w0(i - 1) = hermite::moment_weight(table, 0, i);
    mv.w1(i - 1) = hermite::moment_weight(table, 1, i);
    mv.w2(i - 1) = hermite::moment_weight(table, 2, i);
  }
  return mv;
}

MomentVectors moment_vectors(const BasisSpec& gaussian_basis) {
  require(gaussian_basis.family == BasisFamily::Gaussian,
          ErrorCode::invalid_argument,
          "moment_vectors(BasisSpec) is the Gaussian-family overload");
  const int n = gaussian_basis.n;
  const double w = hermite::gaussian_width(gaussian_basis);
  MomentVectors mv;
  mv.w0.resize(n);
  mv.w1.resize(n);
  mv.w2.resize(n);
  for (int i = 1; i <= n; ++i) {
    const double c = hermite::gaussian_center(gaussian_basis, i);
    mv.w0(i - 1) = 1.0;
    mv.w1(i - 1) = c;
    mv.w2(i - 1) = c * c + w * w;
  }
  return mv;
}

MomentVectors moment_vectors_for(const BasisSpec& basis,
                                 const hermite::HermiteCoeffTable& table) {
  return basis.family == BasisFamily::Hermite ? moment_vectors(table, basis.n)
                                              : moment_vectors(basis);
}

namespace {

struct RawMoments {
  double norm, m1, m2;
};

// Unnormalized moments of the state. For the adapted Hermite basis,
// (x^j, e_i^{mu,sigma}) = sqrt(sigma) * sum_r C(j,r) mu^{j-r} sigma^r (y^r, e_i).
RawMoments raw_moments(const FilterState& state, const MomentVectors& mv) {
  const auto& psi = state.coeffs;
  RawMoments r{};
  if (state.basis.family == BasisFamily::Hermite) {
    const double mu = state.basis.mu_basis, s = state.basis.sigma_basis;
    const double rs = std::sqrt(s);
    const double p0 = psi.dot(mv.w0), p1 = psi.dot(mv.w1), p2 = psi.dot(mv.w2);
    r.norm = rs * p0;
    r.m1 = rs * (mu * p0 + s * p1);
    r.m2 = rs * (mu * mu * p0 + 2.0 * mu * s * p1 + s * s * p2);
  } else {
    r.norm = psi.dot(mv.w0);
    r.m1 = psi.dot(mv.w1);
    r.m2 = psi.dot(mv.w2);
  }
  return r;
}

}  // namespace

FilterEstimate conditional_moments(const FilterState& state,
                                   const MomentVectors& mv) {
  const RawMoments r = raw_moments(state, mv);
  require(std::isfinite(r.norm) &&
              std::abs(r.norm) > 1e-12 * state.coeffs.norm(),
          ErrorCode::degenerate_state,
          "conditional_moments: vanishing normalizer at t = " +
              std::to_string(state.t));
  FilterEstimate est;
  est.t = state.t;
  est.mean = r.m1 / r.norm;
  est.variance = r.m2 / r.norm - est.mean * est.mean;
  return est;
}

FilterEstimate conditional_moments(const FilterState& state,
                                   const hermite::HermiteCoeffTable& table) {
  return conditional_moments(state, moment_vectors_for(state.basis, table));
}

double density_eval(const FilterState& state, const MomentVectors& mv, double x,
                    bool clamp_negative) {
  const RawMoments r = raw_moments(state, mv);
  require(std::isfinite(r.norm) &&
              std::abs(r.norm) > 1e-12 * state.coeffs.norm(),
          ErrorCode::degenerate_state, "density_eval: vanishing normalizer");
  const int n = state.basis.n;
  std::vector<double> vals(n);
  hermite::basis_eval_all(state.basis, n, x, vals.data());
  double q = 0.0;
  for (int i = 0; i < n; ++i) q += state.coeffs(i) * vals[i];
  const double p = q / r.norm;
  return clamp_negative && p < 0.0 ? 0.0 : p;
}

namespace {

FilterState finish_step(FilterState next, double dt, bool renormalize) {
  next.t += dt;
  require(next.coeffs.allFinite(), ErrorCode::divergence,
          "stepper diverged (non-finite coefficients) at t = " +
              std::to_string(next.t));
  if (renormalize) {
    const double r = next.coeffs.norm();
    require(r > 0.0, ErrorCode::divergence,
            "stepper collapsed to zero at t = " + std::to_string(next.t));
    next.coeffs /= r;
    next.log_scale += std::log(r);
  }
  return next;
}

}  // namespace

Eigen::VectorXd em_kernel(const CoefficientMatrices& mats,
                          const GramSolver& gram, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& dz, int dn, double dt) {
  Eigen::VectorXd rhs = (mats.A * y - mats.C * y) * dt;
  for (int l = 0; l < int(mats.B.size()); ++l) rhs += mats.B[l] * y * dz(l);
  if (dn != 0) rhs += mats.C * y * double(dn);
  return y + gram.solve(rhs);
}

Eigen::VectorXd su_kernel(const CoefficientMatrices& mats,
                          const Eigen::MatrixXd& precomp,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& dz,
                          int dn, double dt) {
  Eigen::VectorXd y1 = precomp * y;
  Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(y.size(), y.size());
  for (int l = 0; l < int(mats.B.size()); ++l)
    obs += mats.B[l] * dz(l) - 0.5 * dt * (mats.B[l] * mats.B[l]);
  Eigen::VectorXd y2 = numerics::matrix_exp(obs) * y1;
  for (int k = 0; k < dn; ++k) y2 += mats.C * y2;  // (I + C)^{dn}
  return y2;
}

FilterState em_step(const FilterState& state, const CoefficientMatrices& mats,
                    const Eigen::VectorXd& dz, int dn, double dt) {
  require(dt >= 0.0, ErrorCode::invalid_argument, "em_step: dt must be >= 0");
  GramSolver gram(mats.D, mats.basis.family == BasisFamily::Hermite);
  FilterState next = state;
  next.coeffs = em_kernel(mats, gram, state.coeffs, dz, dn, dt);
  return finish_step(std::move(next), dt, true);
}

FilterState su_step(const FilterState& state, const CoefficientMatrices& mats,
                    const Eigen::MatrixXd& precomp, const Eigen::VectorXd& dz,
                    int dn, double dt) {
  require(mats.basis.family == BasisFamily::Hermite, ErrorCode::invalid_argument,
          "su_step: orthonormal (Hermite) basis required");
  FilterState next = state;
  next.coeffs = su_kernel(mats, precomp, state.coeffs, dz, dn, dt);
  return finish_step(std::move(next), dt, true);
}

namespace {

double negative_mass_fraction(const FilterState& state, const MappedRule& q) {
  const int n = state.basis.n;
  std::vector<double> vals(n);
  double pos = 0.0, neg = 0.0;
  for (size_t k = 0; k < q.x.size(); ++k) {
    if (q.factor[k] == 0.0) continue;
    hermite::basis_eval_all(state.basis, n, q.x[k], vals.data());
    double v = 0.0;
    for (int i = 0; i < n; ++i) v += state.coeffs(i) * vals[i];
    const double mass = q.factor[k] * v;
    (mass >= 0.0 ? pos : neg) += std::abs(mass);
  }
  const double tot = pos + neg;
  return tot > 0.0 ? std::min(pos, neg) / tot : 0.0;
}

}  // namespace

std::vector<EstimateRow> run_filter(const ModelSpec& spec,
                                    const BasisSpec& basis, StepMethod method,
                                    const model::PathBundle& bundle,
                                    const Eigen::VectorXd& q0_coeffs,
                                    const RunOptions& options) {
  const auto setup_start = std::chrono::steady_clock::now();
  hermite::validate(basis);
  require(spec.dim_x == 1, ErrorCode::invalid_argument,
          "run_filter: one-dimensional models only (see the tensor module)");
  require(q0_coeffs.size() == basis.n, ErrorCode::invalid_argument,
          "run_filter: q0 length must equal basis size");
  require(bundle.steps() == 0 || bundle.dim_z() == spec.dim_z,
          ErrorCode::invalid_argument,
          "run_filter: bundle channel count does not match the model");
  const bool hermite_family = basis.family == BasisFamily::Hermite;
  require(hermite_family || method == StepMethod::EM, ErrorCode::invalid_argument,
          "run_filter: the splitting-up method requires an orthonormal basis");

  const int n = basis.n;
  // Gaussian bumps have width 8*sigma/(n-1), so resolving their products
  // needs node counts growing with n, unlike the polynomial-kernel family.
  const int nodes = options.quad_nodes > 0 ? options.quad_nodes
                    : hermite_family
                        ? numerics::default_node_count(n)
                        : std::min(numerics::kMaxQuadratureNodes,
                                   std::max(8 * n + 120, 240));
  const QuadratureRule rule = numerics::gauss_hermite(nodes);

  hermite::HermiteCoeffTable table;
  if (hermite_family) {
    require(n + 1 <= hermite::kMaxTableDegree, ErrorCode::invalid_argument,
            "run_filter: moment weights need n <= " +
                std::to_string(hermite::kMaxTableDegree - 1));
    table = hermite::build_coeff_table(n + 1);
  }

  CoefficientMatrices mats =
      (spec.linear && hermite_family)
          ? kalman_matrices(n, *spec.linear, basis)
          : assemble_quadrature(spec, basis, rule);
  GramSolver gram(mats.D, hermite_family);

  FilterState state;
  state.basis = basis;
  state.coeffs = gram.solve(q0_coeffs);
  state.t = bundle.times.empty() ? 0.0 : bundle.times.front();

  MomentVectors mv = moment_vectors_for(basis, table);
  MappedRule mapped =
      numerics::map_rule(rule, basis.mu_basis, basis.sigma_basis);

  Eigen::MatrixXd su_prop;
  const double dt = bundle.dt;
  if (method == StepMethod::SU && bundle.steps() > 0)
    su_prop = numerics::matrix_exp((mats.A - mats.C) * dt);

  if (options.setup_seconds)
    *options.setup_seconds = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - setup_start)
                                 .count();

  std::vector<EstimateRow> rows;
  rows.reserve(bundle.steps() + 1);

  auto emit = [&](const FilterEstimate& est, bool rebased) {
    EstimateRow row;
    row.t = est.t;
    row.mean = est.mean;
    row.variance = est.variance;
    row.log_scale = state.log_scale;
    row.neg_mass = options.compute_neg_mass
                       ? negative_mass_fraction(state, mapped)
                       : 0.0;
    row.rebased = rebased;
    row.mu_basis = state.basis.mu_basis;
    row.sigma_basis = state.basis.sigma_basis;
    rows.push_back(row);
  };

  emit(conditional_moments(state, mv), false);

  for (int k = 1; k <= bundle.steps(); ++k) {
    const Eigen::VectorXd dz = bundle.dz.row(k - 1).transpose();
    const int dn = bundle.dn[k - 1];
    try {
      FilterState next = state;
      next.coeffs = method == StepMethod::EM
                        ? em_kernel(mats, gram, state.coeffs, dz, dn, dt)
                        : su_kernel(mats, su_prop, state.coeffs, dz, dn, dt);
      state = finish_step(std::move(next), dt, options.renormalize);

      const FilterEstimate est = conditional_moments(state, mv);
      bool rebased = false;
      if (options.after_estimate) {
        rebased = options.after_estimate(k, est, state, mats, su_prop);
        if (rebased) {
          gram = GramSolver(mats.D, hermite_family);
          mv = moment_vectors_for(state.basis, table);
          mapped = numerics::map_rule(rule, state.basis.mu_basis,
                                      state.basis.sigma_basis);
        }
      }
      emit(est, rebased);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::divergence ||
          e.code() == ErrorCode::degenerate_state)
        fail(e.code(),
             std::string(e.what()) + " (step " + std::to_string(k) + ")");
      throw;
    }
  }
  if (options.final_state) *options.final_state = state;
  return rows;
}

Eigen::VectorXd project_initial(const ModelSpec& spec, const BasisSpec& basis,
                                const hermite::HermiteCoeffTable& table) {
  require(spec.dim_x == 1, ErrorCode::invalid_argument,
          "project_initial: one-dimensional models only");
  const double mu0 = spec.mu0(0);
  const double var0 = spec.cov0(0, 0);
  const int n = basis.n;
  Eigen::VectorXd out(n);
  if (basis.family == BasisFamily::Hermite) {
    // In basis coordinates y = (x - mu)/sigma the initial law is
    // N((mu0-mu)/sigma, var0/sigma^2) and (q0, e_i^{mu,sigma}) picks up a
    // 1/sqrt(sigma) from the substitution.
    const double s = basis.sigma_basis;
    const auto std_coeffs = hermite::project_gaussian(
        table, (mu0 - basis.mu_basis) / s, var0 / (s * s), n);
    for (int i = 0; i < n; ++i) out(i) = std_coeffs[i] / std::sqrt(s);
  } else {
    // (N(mu0,var0), N(c_i,w^2)) = normal density of mu0 - c_i at variance
    // var0 + w^2.
    const double w = hermite::gaussian_width(basis);
    const double v = var0 + w * w;
    for (int i = 1; i <= n; ++i) {
      const double dx = mu0 - hermite::gaussian_center(basis, i);
      out(i - 1) = std::exp(-0.5 * dx * dx / v) /
                   std::sqrt(2.0 * 3.14159265358979323846 * v);
    }
  }
  return out;
}

Eigen::VectorXd project_density(const std::function<double(double)>& density,
                                const BasisSpec& basis,
                                const QuadratureRule& rule) {
  const MappedRule q =
      numerics::map_rule(rule, basis.mu_basis, basis.sigma_basis);
  const int n = basis.n;
  std::vector<double> vals(n);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (size_t k = 0; k < q.x.size(); ++k) {
    if (q.factor[k] == 0.0) continue;
    hermite::basis_eval_all(basis, n, q.x[k], vals.data());
    const double fd = q.factor[k] * density(q.x[k]);
    for (int i = 0; i < n; ++i) out(i) += fd * vals[i];
  }
  return out;
}

}  // namespace zakai::galerkin
