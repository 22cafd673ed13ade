#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zakai/config.hpp"
#include "zakai/model.hpp"

namespace zakai::bench {

/// RMSE = sqrt( (1/(mK)) sum_j sum_k (X^j(t_k) - xhat^j(t_k))^2 ) over
/// per-path sequences of equal shape.
double rmse(const std::vector<std::vector<double>>& estimates,
            const std::vector<std::vector<double>>& truths);

/// Mean squared deviations of the filter mean and variance from a reference
/// method: EDM = (1/(mL)) sum (Xhat - Xref)^2, EDV analogous (not rooted).
std::pair<double, double> edm_edv(
    const std::vector<std::vector<double>>& estimates,
    const std::vector<std::vector<double>>& reference_estimates,
    const std::vector<std::vector<double>>& variances,
    const std::vector<std::vector<double>>& reference_variances);

struct ReportRow {
  std::string method;
  int size = 0;  // basis size n or particle count
  double wall_s = 0.0;
  double rmse = 0.0;
  double rmse_se = 0.0;
  double edm = 0.0;
  double edm_se = 0.0;
  double edv = 0.0;
  double edv_se = 0.0;
  int paths = 0;
  int steps = 0;  // grid points entering the metrics per path
  std::uint64_t bundles_hash = 0;
  std::string status = "ok";
};

/// One benchmark: simulates cfg.paths bundles (common random numbers across
/// methods per path index), runs every configured method on them, and
/// reports metrics with per-path jackknife standard errors. Wall time covers
/// the filtering loop only. A diverging method yields a failed row.
std::vector<ReportRow> run_experiment(const config::RunConfig& cfg);

/// Basis-size sweep of the configured family/method over cfg.n_list.
std::vector<ReportRow> run_convergence(const config::RunConfig& cfg);

/// Step-size sweep comparing SU and EM at each dt in cfg.dt_list.
std::vector<ReportRow> run_stability(const config::RunConfig& cfg);

void write_report_csv(const std::string& path,
                      const std::vector<ReportRow>& rows);
std::string format_report(const std::vector<ReportRow>& rows);

/// FNV-1a over the bundle payloads; identical across methods by construction,
/// recorded so common-random-numbers discipline is checkable from the report.
std::uint64_t hash_bundles(const std::vector<model::PathBundle>& bundles);

/// Worker count: ZAKAI_WORKERS environment variable, else hardware threads.
int worker_count();

}  // namespace zakai::bench
