#include "zakai/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "zakai/adaptive.hpp"
#include "zakai/csv.hpp"
#include "zakai/reference.hpp"

namespace zakai::bench {

using config::MethodSpec;
using config::RunConfig;

double rmse(const std::vector<std::vector<double>>& estimates,
            const std::vector<std::vector<double>>& truths) {
  require(estimates.size() == truths.size() && !estimates.empty(),
          ErrorCode::invalid_argument, "rmse: shape mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    require(estimates[j].size() == truths[j].size(), ErrorCode::invalid_argument,
            "rmse: shape mismatch in path " + std::to_string(j));
    for (std::size_t k = 0; k < estimates[j].size(); ++k) {
      const double e = truths[j][k] - estimates[j][k];
      sum += e * e;
    }
    count += estimates[j].size();
  }
  require(count > 0, ErrorCode::invalid_argument, "rmse: empty sequences");
  return std::sqrt(sum / double(count));
}

std::pair<double, double> edm_edv(
    const std::vector<std::vector<double>>& estimates,
    const std::vector<std::vector<double>>& reference_estimates,
    const std::vector<std::vector<double>>& variances,
    const std::vector<std::vector<double>>& reference_variances) {
  require(estimates.size() == reference_estimates.size() &&
              variances.size() == reference_variances.size() &&
              estimates.size() == variances.size() && !estimates.empty(),
          ErrorCode::invalid_argument, "edm_edv: shape mismatch");
  double dm = 0.0, dv = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    require(estimates[j].size() == reference_estimates[j].size() &&
                variances[j].size() == reference_variances[j].size() &&
                estimates[j].size() == variances[j].size(),
            ErrorCode::invalid_argument,
            "edm_edv: shape mismatch in path " + std::to_string(j));
    for (std::size_t k = 0; k < estimates[j].size(); ++k) {
      const double em = estimates[j][k] - reference_estimates[j][k];
      const double ev = variances[j][k] - reference_variances[j][k];
      dm += em * em;
      dv += ev * ev;
    }
    count += estimates[j].size();
  }
  require(count > 0, ErrorCode::invalid_argument, "edm_edv: empty sequences");
  return {dm / double(count), dv / double(count)};
}

int worker_count() {
  if (const char* env = std::getenv("ZAKAI_WORKERS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

namespace {

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mx;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mx);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

struct PathResult {
  bool ok = false;
  std::string error;
  double wall_s = 0.0;
  std::vector<double> means;  // at the kept grid points
  std::vector<double> vars;
};

struct JackknifeOut {
  double value = 0.0;
  double se = 0.0;
};

// Jackknife SE of sqrt(S/C) (or S/C when rooted == false) from per-path
// sums S_j over C_j points each.
JackknifeOut jackknife_ratio(const std::vector<double>& sums,
                             const std::vector<double>& counts, bool rooted) {
  const int m = int(sums.size());
  double S = 0.0, C = 0.0;
  for (int j = 0; j < m; ++j) {
    S += sums[j];
    C += counts[j];
  }
  JackknifeOut out;
  const double full = S / C;
  out.value = rooted ? std::sqrt(full) : full;
  if (m < 2) return out;
  std::vector<double> loo(m);
  double mean = 0.0;
  for (int j = 0; j < m; ++j) {
    const double v = (S - sums[j]) / (C - counts[j]);
    loo[j] = rooted ? std::sqrt(v) : v;
    mean += loo[j];
  }
  mean /= m;
  double ss = 0.0;
  for (int j = 0; j < m; ++j) ss += (loo[j] - mean) * (loo[j] - mean);
  out.se = std::sqrt((double(m) - 1.0) / double(m) * ss);
  return out;
}

MethodSpec method_from_filter_section(const RunConfig& cfg) {
  MethodSpec m;
  m.stepper = cfg.method;
  m.n = cfg.n;
  m.particles = cfg.particles;
  if (cfg.family == hermite::BasisFamily::Gaussian)
    m.kind = MethodSpec::Kind::GAG;
  else
    m.kind = cfg.adaptive ? MethodSpec::Kind::AGAH : MethodSpec::Kind::GAH;
  return m;
}

PathResult run_method_on_path(const RunConfig& cfg, const model::ModelSpec& spec,
                              const MethodSpec& method,
                              const model::PathBundle& bundle,
                              const std::vector<int>& kept,
                              std::uint64_t pf_seed) {
  PathResult res;
  const auto t0 = std::chrono::steady_clock::now();
  double setup = 0.0;
  try {
    std::vector<galerkin::EstimateRow> rows;
    std::vector<reference::PfEstimateRow> pf_rows;
    switch (method.kind) {
      case MethodSpec::Kind::GAH: {
        hermite::BasisSpec basis;
        basis.n = method.n;
        basis.mu_basis = cfg.basis_mu;
        basis.sigma_basis = cfg.basis_sigma;
        const auto table = hermite::build_coeff_table(
            std::min(hermite::kMaxTableDegree, method.n + 1));
        const Eigen::VectorXd q0 = galerkin::project_initial(spec, basis, table);
        galerkin::RunOptions opt;
        opt.quad_nodes = cfg.quad_nodes;
        opt.setup_seconds = &setup;
        opt.compute_neg_mass = false;
        rows = galerkin::run_filter(spec, basis, method.stepper, bundle, q0, opt);
        break;
      }
      case MethodSpec::Kind::AGAH: {
        const auto basis0 = adaptive::initial_basis(spec, method.n);
        galerkin::RunOptions opt;
        opt.quad_nodes = cfg.quad_nodes;
        opt.setup_seconds = &setup;
        opt.compute_neg_mass = false;
        rows = adaptive::run_aga(spec, basis0, method.stepper, bundle, cfg.aga, opt);
        break;
      }
      case MethodSpec::Kind::GAG: {
        hermite::BasisSpec basis;
        basis.family = hermite::BasisFamily::Gaussian;
        basis.n = method.n;
        basis.mu_basis = cfg.basis_mu;
        basis.sigma_basis = cfg.basis_sigma;
        const auto table = hermite::build_coeff_table(1);
        const Eigen::VectorXd q0 = galerkin::project_initial(spec, basis, table);
        galerkin::RunOptions opt;
        opt.quad_nodes = cfg.quad_nodes;
        opt.setup_seconds = &setup;
        opt.compute_neg_mass = false;
        rows = galerkin::run_filter(spec, basis, method.stepper, bundle, q0, opt);
        break;
      }
      case MethodSpec::Kind::PF: {
        pf_rows = reference::particle_filter(spec, bundle, method.particles,
                                             pf_seed);
        break;
      }
    }
    res.means.reserve(kept.size());
    res.vars.reserve(kept.size());
    for (int k : kept) {
      if (method.kind == MethodSpec::Kind::PF) {
        res.means.push_back(pf_rows[k].mean(0));
        res.vars.push_back(pf_rows[k].variance(0));
      } else {
        res.means.push_back(rows[k].mean);
        res.vars.push_back(rows[k].variance);
      }
    }
    res.ok = true;
  } catch (const Error& e) {
    res.error = e.what();
  }
  res.wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count() -
      setup;
  return res;
}

}  // namespace

std::uint64_t hash_bundles(const std::vector<model::PathBundle>& bundles) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& b : bundles) {
    h = fnv1a(h, &b.dt, sizeof(b.dt));
    h = fnv1a(h, b.x.data(), sizeof(double) * b.x.size());
    h = fnv1a(h, b.dz.data(), sizeof(double) * b.dz.size());
    h = fnv1a(h, b.dn.data(), sizeof(int) * b.dn.size());
  }
  return h;
}

std::vector<ReportRow> run_experiment(const RunConfig& cfg) {
  config::validate(cfg);
  require(cfg.model_kind == "linear", ErrorCode::invalid_argument,
          "benchmark: the harness covers scalar models; use the filter "
          "subcommand for multi-dimensional runs");
  const model::ModelSpec spec = config::build_model(cfg);
  const int m = cfg.paths;
  const int steps = cfg.steps();

  std::vector<model::PathBundle> bundles(m);
  parallel_for(m, [&](int p) {
    bundles[p] = model::PathBundle{};
    bundles[p].dt = cfg.dt;
    bundles[p].seed = cfg.seed;
    bundles[p].x = model::simulate_signal(spec, cfg.dt, steps,
                                          model::derive_seed(cfg.seed, p, 0));
    auto [dz, dn] = model::simulate_observations(
        spec, bundles[p].x, cfg.dt, model::derive_seed(cfg.seed, p, 1));
    bundles[p].dz = std::move(dz);
    bundles[p].dn = std::move(dn);
    bundles[p].times.resize(steps + 1);
    for (int k = 0; k <= steps; ++k) bundles[p].times[k] = k * cfg.dt;
  });
  const std::uint64_t bhash = hash_bundles(bundles);

  std::vector<int> kept;
  for (int k = 1; k <= steps; ++k)
    if (bundles[0].times[k] >= cfg.burn_in - 1e-12) kept.push_back(k);
  require(!kept.empty(), ErrorCode::invalid_argument,
          "benchmark: burn-in leaves no grid points");

  // Reference runs for EDM/EDV (shared across methods).
  std::vector<std::vector<double>> ref_means(m), ref_vars(m);
  if (cfg.reference_particles > 0) {
    parallel_for(m, [&](int p) {
      const auto rows = reference::particle_filter(
          spec, bundles[p], cfg.reference_particles,
          model::derive_seed(cfg.seed, p, 3));
      ref_means[p].reserve(kept.size());
      ref_vars[p].reserve(kept.size());
      for (int k : kept) {
        ref_means[p].push_back(rows[k].mean(0));
        ref_vars[p].push_back(rows[k].variance(0));
      }
    });
  }

  const std::vector<MethodSpec> methods =
      cfg.methods.empty() ? std::vector<MethodSpec>{method_from_filter_section(cfg)}
                          : cfg.methods;

  std::vector<ReportRow> report;
  for (const auto& method : methods) {
    std::vector<PathResult> results(m);
    parallel_for(m, [&](int p) {
      results[p] = run_method_on_path(cfg, spec, method, bundles[p], kept,
                                      model::derive_seed(cfg.seed, p, 2));
    });

    ReportRow row;
    row.method = method.label();
    row.size = method.kind == MethodSpec::Kind::PF ? method.particles : method.n;
    row.paths = m;
    row.steps = int(kept.size());
    row.bundles_hash = bhash;

    int failed = 0;
    std::string first_error;
    std::vector<double> se_sums, dm_sums, dv_sums, counts;
    for (int p = 0; p < m; ++p) {
      row.wall_s += results[p].wall_s;
      if (!results[p].ok) {
        ++failed;
        if (first_error.empty()) first_error = results[p].error;
        continue;
      }
      double se = 0.0, dm = 0.0, dv = 0.0;
      for (std::size_t i = 0; i < kept.size(); ++i) {
        const double err = bundles[p].x(kept[i], 0) - results[p].means[i];
        se += err * err;
        if (cfg.reference_particles > 0) {
          const double em = results[p].means[i] - ref_means[p][i];
          const double ev = results[p].vars[i] - ref_vars[p][i];
          dm += em * em;
          dv += ev * ev;
        }
      }
      se_sums.push_back(se);
      dm_sums.push_back(dm);
      dv_sums.push_back(dv);
      counts.push_back(double(kept.size()));
    }

    if (!se_sums.empty()) {
      const auto r = jackknife_ratio(se_sums, counts, true);
      row.rmse = r.value;
      row.rmse_se = r.se;
      if (cfg.reference_particles > 0) {
        const auto em = jackknife_ratio(dm_sums, counts, false);
        const auto ev = jackknife_ratio(dv_sums, counts, false);
        row.edm = em.value;
        row.edm_se = em.se;
        row.edv = ev.value;
        row.edv_se = ev.se;
      }
    }
    if (failed > 0)
      row.status = "failed(" + std::to_string(failed) + "/" +
                   std::to_string(m) + " paths): " + first_error;
    report.push_back(std::move(row));
  }
  return report;
}

std::vector<ReportRow> run_convergence(const RunConfig& cfg) {
  RunConfig sweep = cfg;
  sweep.methods.clear();
  for (int n : cfg.n_list) {
    MethodSpec m = method_from_filter_section(cfg);
    m.n = n;
    sweep.methods.push_back(m);
  }
  return run_experiment(sweep);
}

std::vector<ReportRow> run_stability(const RunConfig& cfg) {
  std::vector<ReportRow> out;
  for (double dt : cfg.dt_list) {
    RunConfig sweep = cfg;
    sweep.dt = dt;
    sweep.methods.clear();
    for (auto stepper : {galerkin::StepMethod::SU, galerkin::StepMethod::EM}) {
      MethodSpec m = method_from_filter_section(cfg);
      m.stepper = stepper;
      sweep.methods.push_back(m);
    }
    for (auto& row : run_experiment(sweep)) {
      std::ostringstream label;
      label << row.method << " dt=" << dt;
      row.method = label.str();
      out.push_back(std::move(row));
    }
  }
  return out;
}

void write_report_csv(const std::string& path,
                      const std::vector<ReportRow>& rows) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::io, "report: cannot open " + path);
  f << "method,size,wall_s,rmse,rmse_se,edm,edm_se,edv,edv_se,paths,steps,"
       "bundles_hash,status\n";
  for (const auto& r : rows) {
    f << r.method << ',' << r.size << ',' << csv::format_double(r.wall_s) << ','
      << csv::format_double(r.rmse) << ',' << csv::format_double(r.rmse_se)
      << ',' << csv::format_double(r.edm) << ',' << csv::format_double(r.edm_se)
      << ',' << csv::format_double(r.edv) << ',' << csv::format_double(r.edv_se)
      << ',' << r.paths << ',' << r.steps << ',' << r.bundles_hash << ",\""
      << r.status << "\"\n";
  }
  require(f.good(), ErrorCode::io, "report: write failed: " + path);
}

std::string format_report(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-18s %6s %9s %10s %10s %10s %10s %s\n",
                "method", "size", "wall[s]", "rmse", "rmse_se", "edm", "edv",
                "status");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line),
                  "%-18s %6d %9.2f %10.4g %10.4g %10.4g %10.4g %s\n",
                  r.method.c_str(), r.size, r.wall_s, r.rmse, r.rmse_se, r.edm,
                  r.edv, r.status.c_str());
    out << line;
  }
  return out.str();
}

}  // namespace zakai::bench
