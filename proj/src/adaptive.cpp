#include "zakai/adaptive.hpp"

#include <cmath>
#include <string>

namespace zakai::adaptive {

using galerkin::CoefficientMatrices;
using galerkin::FilterEstimate;
using galerkin::FilterState;
using hermite::BasisFamily;
using hermite::BasisSpec;

void validate(const AgaConfig& cfg) {
  require(cfg.threshold_mu > 0.0 && cfg.threshold_sigma > 0.0,
          ErrorCode::invalid_argument, "aga: thresholds must be > 0");
  require(cfg.max_rebases >= 0, ErrorCode::invalid_argument,
          "aga: max_rebases must be >= 0");
  require(cfg.projection_rule_nodes >= 2, ErrorCode::invalid_argument,
          "aga: projection_rule_nodes must be >= 2");
}

bool should_rebase(const FilterEstimate& est, const BasisSpec& basis,
                   const AgaConfig& cfg) {
  require(est.variance >= 0.0, ErrorCode::invalid_argument,
          "should_rebase: variance must be >= 0");
  if (std::abs(est.mean - basis.mu_basis) >
      cfg.threshold_mu * basis.sigma_basis)
    return true;
  return std::abs(std::sqrt(est.variance) / basis.sigma_basis - 1.0) >
         cfg.threshold_sigma;
}

FilterState rebase(const FilterState& state, double new_mu, double new_sigma,
                   const numerics::QuadratureRule& rule) {
  require(new_sigma > 0.0, ErrorCode::invalid_argument,
          "rebase: new_sigma must be > 0");
  require(state.basis.family == BasisFamily::Hermite,
          ErrorCode::invalid_argument, "rebase: orthonormal basis required");
  const int n = state.basis.n;

  BasisSpec next = state.basis;
  next.mu_basis = new_mu;
  next.sigma_basis = new_sigma;

  // Transfer T(i,j) = (e_j^{old}, e_i^{new}) by quadrature against the new
  // basis's Gaussian weight.
  const numerics::MappedRule q = numerics::map_rule(rule, new_mu, new_sigma);
  Eigen::MatrixXd transfer = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> old_vals(n), new_vals(n);
  for (size_t k = 0; k < q.x.size(); ++k) {
    if (q.factor[k] == 0.0) continue;
    hermite::basis_eval_all(state.basis, n, q.x[k], old_vals.data());
    hermite::basis_eval_all(next, n, q.x[k], new_vals.data());
    for (int i = 0; i < n; ++i) {
      const double w = q.factor[k] * new_vals[i];
      for (int j = 0; j < n; ++j) transfer(i, j) += w * old_vals[j];
    }
  }

  FilterState out = state;
  out.basis = next;
  out.coeffs = transfer * state.coeffs;

  // Both bases are orthonormal, so the L2 mass of the expansion is the
  // squared coefficient norm and re-projection can only lose mass.
  const double before = state.coeffs.squaredNorm();
  const double after = out.coeffs.squaredNorm();
  require(before > 0.0 && after >= 0.5 * before, ErrorCode::mass_loss,
          "rebase: transition to (" + std::to_string(new_mu) + ", " +
              std::to_string(new_sigma) + ") at t = " + std::to_string(state.t) +
              " retains only " + std::to_string(100.0 * after / before) +
              "% of the L2 mass; basis too small for this density");
  return out;
}

BasisSpec initial_basis(const model::ModelSpec& spec, int n) {
  require(spec.dim_x == 1, ErrorCode::invalid_argument,
          "initial_basis: one-dimensional models only");
  BasisSpec basis;
  basis.family = BasisFamily::Hermite;
  basis.n = n;
  basis.mu_basis = spec.mu0(0);
  basis.sigma_basis = std::sqrt(spec.cov0(0, 0));
  return basis;
}

std::vector<galerkin::EstimateRow> run_aga(const model::ModelSpec& spec,
                                           const BasisSpec& basis0,
                                           galerkin::StepMethod method,
                                           const model::PathBundle& bundle,
                                           const AgaConfig& cfg,
                                           const galerkin::RunOptions& options) {
  validate(cfg);
  require(basis0.family == BasisFamily::Hermite, ErrorCode::invalid_argument,
          "run_aga: orthonormal (Hermite) basis required");
  const int n = basis0.n;
  const auto table = hermite::build_coeff_table(
      std::min(hermite::kMaxTableDegree, n + 1));
  const Eigen::VectorXd q0 = galerkin::project_initial(spec, basis0, table);

  const numerics::QuadratureRule proj_rule =
      numerics::gauss_hermite(cfg.projection_rule_nodes);
  const int assembly_nodes = options.quad_nodes > 0
                                 ? options.quad_nodes
                                 : numerics::default_node_count(n);
  numerics::QuadratureRule assembly_rule;  // built lazily, quadrature models only
  const double dt = bundle.dt;

  auto rebases = std::make_shared<int>(0);
  auto last_sigma = std::make_shared<double>(basis0.sigma_basis);

  galerkin::RunOptions run = options;
  run.after_estimate = [&, rebases, last_sigma](
                           int, const FilterEstimate& est, FilterState& state,
                           CoefficientMatrices& mats,
                           Eigen::MatrixXd& su_prop) -> bool {
    double sigma_hat;
    bool trigger;
    if (est.variance >= 0.0) {
      sigma_hat = std::sqrt(est.variance);
      if (sigma_hat > 0.0) *last_sigma = sigma_hat;
      trigger = should_rebase(est, state.basis, cfg);
      if (sigma_hat <= 0.0) sigma_hat = *last_sigma;
    } else {
      // Negative variance: the expansion has gone locally negative; force a
      // transition using the last trustworthy scale.
      sigma_hat = *last_sigma;
      trigger = true;
    }
    if (!trigger) return false;

    ++*rebases;
    require(*rebases <= cfg.max_rebases, ErrorCode::invalid_argument,
            "run_aga: exceeded max_rebases = " + std::to_string(cfg.max_rebases) +
                " at t = " + std::to_string(state.t));

    state = rebase(state, est.mean, sigma_hat, proj_rule);
    if (spec.linear) {
      mats = galerkin::kalman_matrices(n, *spec.linear, state.basis);
    } else {
      if (assembly_rule.nodes.empty())
        assembly_rule = numerics::gauss_hermite(assembly_nodes);
      mats = galerkin::assemble_quadrature(spec, state.basis, assembly_rule);
    }
    if (method == galerkin::StepMethod::SU)
      su_prop = numerics::matrix_exp((mats.A - mats.C) * dt);
    return true;
  };

  return galerkin::run_filter(spec, basis0, method, bundle, q0, run);
}

}  // namespace zakai::adaptive
