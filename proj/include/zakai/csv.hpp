#pragma once

#include <string>
#include <vector>

#include "zakai/galerkin.hpp"
#include "zakai/model.hpp"
#include "zakai/multidim.hpp"

namespace zakai::csv {

/// Numbers are written with 17 significant digits so write/read round-trips
/// are lossless for doubles.
std::string format_double(double v);

void write_bundle(const std::string& path, const model::PathBundle& bundle);
model::PathBundle read_bundle(const std::string& path);

/// Columns t,mean,variance,log_scale,neg_mass_fraction,rebased and, when
/// adaptive_columns is set, mu_basis,sigma_basis.
void write_estimates(const std::string& path,
                     const std::vector<galerkin::EstimateRow>& rows,
                     bool adaptive_columns);

/// Columns t,mean_1..mean_d,var_1..var_d,log_scale,rebased.
void write_estimates_md(const std::string& path,
                        const std::vector<multidim::MdEstimateRow>& rows);

}  // namespace zakai::csv
