#include "zakai.h"

#include <cstring>
#include <string>

#include "zakai/adaptive.hpp"
#include "zakai/bench.hpp"
#include "zakai/config.hpp"
#include "zakai/csv.hpp"
#include "zakai/galerkin.hpp"
#include "zakai/multidim.hpp"

using namespace zakai;

struct zk_config {
  config::RunConfig cfg;
};

struct zk_bundle {
  model::PathBundle bundle;
};

struct zk_table {
  enum class Kind { Estimates1d, EstimatesMd, Report } kind;
  std::vector<galerkin::EstimateRow> est;
  bool adaptive_columns = false;
  std::vector<multidim::MdEstimateRow> est_md;
  std::vector<bench::ReportRow> report;

  std::vector<std::string> col_names;
  std::vector<std::vector<double>> values;  // row-major numeric view
  std::vector<std::string> labels;
  std::vector<std::string> statuses;

  void build_view();
};

void zk_table::build_view() {
  col_names.clear();
  values.clear();
  labels.clear();
  statuses.clear();
  switch (kind) {
    case Kind::Estimates1d: {
      col_names = {"t",         "mean",    "variance", "log_scale",
                   "neg_mass_fraction", "rebased"};
      if (adaptive_columns) {
        col_names.push_back("mu_basis");
        col_names.push_back("sigma_basis");
      }
      for (const auto& r : est) {
        std::vector<double> row = {r.t,         r.mean,     r.variance,
                                   r.log_scale, r.neg_mass, double(r.rebased)};
        if (adaptive_columns) {
          row.push_back(r.mu_basis);
          row.push_back(r.sigma_basis);
        }
        values.push_back(std::move(row));
        labels.emplace_back();
        statuses.emplace_back();
      }
      break;
    }
    case Kind::EstimatesMd: {
      const int d = est_md.empty() ? 0 : int(est_md.front().mean.size());
      col_names = {"t"};
      for (int i = 1; i <= d; ++i) col_names.push_back("mean_" + std::to_string(i));
      for (int i = 1; i <= d; ++i) col_names.push_back("var_" + std::to_string(i));
      col_names.push_back("log_scale");
      col_names.push_back("rebased");
      for (const auto& r : est_md) {
        std::vector<double> row = {r.t};
        for (int i = 0; i < d; ++i) row.push_back(r.mean(i));
        for (int i = 0; i < d; ++i) row.push_back(r.variance(i));
        row.push_back(r.log_scale);
        row.push_back(double(r.rebased));
        values.push_back(std::move(row));
        labels.emplace_back();
        statuses.emplace_back();
      }
      break;
    }
    case Kind::Report: {
      col_names = {"size",   "wall_s", "rmse",  "rmse_se", "edm",
                   "edm_se", "edv",    "edv_se", "paths",   "steps"};
      for (const auto& r : report) {
        values.push_back({double(r.size), r.wall_s, r.rmse, r.rmse_se, r.edm,
                          r.edm_se, r.edv, r.edv_se, double(r.paths),
                          double(r.steps)});
        labels.push_back(r.method);
        statuses.push_back(r.status);
      }
      break;
    }
  }
}

namespace {

thread_local std::string g_last_error;

zk_status map_error(const Error& e) {
  g_last_error = e.what();
  switch (e.code()) {
    case ErrorCode::invalid_argument:
      return ZK_ERR_INVALID;
    case ErrorCode::divergence:
    case ErrorCode::degenerate_state:
    case ErrorCode::mass_loss:
      return ZK_ERR_DIVERGED;
    case ErrorCode::io:
      return ZK_ERR_IO;
  }
  return ZK_ERR_INTERNAL;
}

template <typename Fn>
zk_status guarded(Fn&& fn) {
  try {
    fn();
    return ZK_OK;
  } catch (const Error& e) {
    return map_error(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ZK_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return ZK_ERR_INTERNAL;
  }
}

zk_status invalid(const char* msg) {
  g_last_error = msg;
  return ZK_ERR_INVALID;
}

}  // namespace

extern "C" {

const char* zk_version(void) { return "1.0.0"; }

const char* zk_last_error(void) { return g_last_error.c_str(); }

zk_status zk_config_create(zk_config** out) {
  if (!out) return invalid("zk_config_create: null output");
  return guarded([&] { *out = new zk_config{}; });
}

zk_status zk_config_load(const char* path, zk_config** out) {
  if (!path || !out) return invalid("zk_config_load: null argument");
  return guarded([&] { *out = new zk_config{config::parse_file(path)}; });
}

zk_status zk_config_set(zk_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return invalid("zk_config_set: null argument");
  return guarded([&] { config::apply_override(cfg->cfg, key, value); });
}

void zk_config_free(zk_config* cfg) { delete cfg; }

zk_status zk_simulate(const zk_config* cfg, zk_bundle** out) {
  if (!cfg || !out) return invalid("zk_simulate: null argument");
  return guarded([&] {
    config::validate(cfg->cfg);
    const model::ModelSpec spec = config::build_model(cfg->cfg);
    *out = new zk_bundle{model::simulate_bundle(spec, cfg->cfg.dt,
                                                cfg->cfg.steps(), cfg->cfg.seed)};
  });
}

zk_status zk_bundle_read_csv(const char* path, zk_bundle** out) {
  if (!path || !out) return invalid("zk_bundle_read_csv: null argument");
  return guarded([&] { *out = new zk_bundle{csv::read_bundle(path)}; });
}

zk_status zk_bundle_write_csv(const zk_bundle* bundle, const char* path) {
  if (!bundle || !path) return invalid("zk_bundle_write_csv: null argument");
  return guarded([&] { csv::write_bundle(path, bundle->bundle); });
}

int zk_bundle_steps(const zk_bundle* bundle) {
  return bundle ? bundle->bundle.steps() : 0;
}

int zk_bundle_dim(const zk_bundle* bundle) {
  return bundle ? bundle->bundle.dim_x() : 0;
}

void zk_bundle_free(zk_bundle* bundle) { delete bundle; }

zk_status zk_filter(const zk_config* cfg, const zk_bundle* bundle,
                    zk_table** out) {
  if (!cfg || !bundle || !out) return invalid("zk_filter: null argument");
  return guarded([&] {
    const auto& c = cfg->cfg;
    config::validate(c);
    const model::ModelSpec spec = config::build_model(c);
    auto table = std::make_unique<zk_table>();
    if (spec.dim_x == 1) {
      galerkin::RunOptions opt;
      opt.quad_nodes = c.quad_nodes;
      if (c.adaptive) {
        table->est = adaptive::run_aga(spec, adaptive::initial_basis(spec, c.n),
                                       c.method, bundle->bundle, c.aga, opt);
      } else {
        hermite::BasisSpec basis;
        basis.family = c.family;
        basis.n = c.n;
        basis.mu_basis = c.basis_mu;
        basis.sigma_basis = c.basis_sigma;
        const auto coeff_table = hermite::build_coeff_table(
            c.family == hermite::BasisFamily::Hermite
                ? std::min(hermite::kMaxTableDegree, c.n + 1)
                : 1);
        const Eigen::VectorXd q0 =
            galerkin::project_initial(spec, basis, coeff_table);
        table->est =
            galerkin::run_filter(spec, basis, c.method, bundle->bundle, q0, opt);
      }
      table->kind = zk_table::Kind::Estimates1d;
      table->adaptive_columns = c.adaptive;
    } else {
      multidim::MdRunOptions opt;
      opt.quad_nodes = c.quad_nodes;
      opt.adaptive = c.adaptive;
      opt.aga = c.aga;
      const auto basis = multidim::initial_basis_md(spec, c.n);
      table->est_md =
          multidim::run_filter_md(spec, basis, c.method, bundle->bundle, opt);
      table->kind = zk_table::Kind::EstimatesMd;
    }
    table->build_view();
    *out = table.release();
  });
}

static zk_status run_report(
    const zk_config* cfg, zk_table** out,
    std::vector<bench::ReportRow> (*runner)(const config::RunConfig&)) {
  if (!cfg || !out) return invalid("null argument");
  return guarded([&] {
    auto table = std::make_unique<zk_table>();
    table->kind = zk_table::Kind::Report;
    table->report = runner(cfg->cfg);
    table->build_view();
    *out = table.release();
  });
}

zk_status zk_benchmark(const zk_config* cfg, zk_table** out) {
  return run_report(cfg, out, &bench::run_experiment);
}

zk_status zk_convergence(const zk_config* cfg, zk_table** out) {
  return run_report(cfg, out, &bench::run_convergence);
}

zk_status zk_stability(const zk_config* cfg, zk_table** out) {
  return run_report(cfg, out, &bench::run_stability);
}

size_t zk_table_rows(const zk_table* table) {
  return table ? table->values.size() : 0;
}

size_t zk_table_cols(const zk_table* table) {
  return table ? table->col_names.size() : 0;
}

const char* zk_table_col_name(const zk_table* table, size_t col) {
  if (!table || col >= table->col_names.size()) return "";
  return table->col_names[col].c_str();
}

double zk_table_value(const zk_table* table, size_t row, size_t col) {
  if (!table || row >= table->values.size() || col >= table->values[row].size())
    return 0.0;
  return table->values[row][col];
}

const char* zk_table_row_label(const zk_table* table, size_t row) {
  if (!table || row >= table->labels.size()) return "";
  return table->labels[row].c_str();
}

const char* zk_table_row_status(const zk_table* table, size_t row) {
  if (!table || row >= table->statuses.size()) return "";
  return table->statuses[row].c_str();
}

zk_status zk_table_write_csv(const zk_table* table, const char* path) {
  if (!table || !path) return invalid("zk_table_write_csv: null argument");
  return guarded([&] {
    switch (table->kind) {
      case zk_table::Kind::Estimates1d:
        csv::write_estimates(path, table->est, table->adaptive_columns);
        break;
      case zk_table::Kind::EstimatesMd:
        csv::write_estimates_md(path, table->est_md);
        break;
      case zk_table::Kind::Report:
        bench::write_report_csv(path, table->report);
        break;
    }
  });
}

zk_status zk_table_format(const zk_table* table, char** out) {
  if (!table || !out) return invalid("zk_table_format: null argument");
  return guarded([&] {
    std::string text;
    if (table->kind == zk_table::Kind::Report) {
      text = bench::format_report(table->report);
    } else {
      for (size_t c = 0; c < table->col_names.size(); ++c)
        text += (c ? "," : "") + table->col_names[c];
      text += "\n";
      text += "(" + std::to_string(table->values.size()) + " rows)\n";
    }
    char* buf = new char[text.size() + 1];
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out = buf;
  });
}

void zk_string_free(char* s) { delete[] s; }

void zk_table_free(zk_table* table) { delete table; }

}  // extern "C"
