#pragma once

#include "zakai/galerkin.hpp"

namespace zakai::adaptive {

/// Thresholds of the adaptive scheme, in units of the current basis scale
/// (location) and relative scale drift.
struct AgaConfig {
  double threshold_mu = 0.25;
  double threshold_sigma = 0.25;
  int max_rebases = 1000;
  int projection_rule_nodes = 200;
};

void validate(const AgaConfig& cfg);

/// True when the estimate has drifted out of the basis's trust region:
/// |mean - mu_basis| > threshold_mu * sigma_basis or
/// |sqrt(variance)/sigma_basis - 1| > threshold_sigma.
bool should_rebase(const galerkin::FilterEstimate& est,
                   const hermite::BasisSpec& basis, const AgaConfig& cfg);

/// Basis transition: re-expands the current density in the basis located at
/// (new_mu, new_sigma) by quadrature centered at the new basis, carrying
/// log_scale over. Fails when more than half of the L2 mass is lost.
galerkin::FilterState rebase(const galerkin::FilterState& state, double new_mu,
                             double new_sigma,
                             const numerics::QuadratureRule& rule);

/// Basis located and scaled by the model's initial law.
hermite::BasisSpec initial_basis(const model::ModelSpec& spec, int n);

/// Adaptive Galerkin run: step, estimate, and re-center/re-scale the basis
/// (with matrix reassembly) whenever the estimate leaves the trust region.
/// With infinite thresholds this is the fixed-basis filter, bitwise.
std::vector<galerkin::EstimateRow> run_aga(const model::ModelSpec& spec,
                                           const hermite::BasisSpec& basis0,
                                           galerkin::StepMethod method,
                                           const model::PathBundle& bundle,
                                           const AgaConfig& cfg,
                                           const galerkin::RunOptions& options = {});

}  // namespace zakai::adaptive
