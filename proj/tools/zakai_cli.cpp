// Command-line front end; talks to the library exclusively through the C API.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zakai.h"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_path;
  std::string in_path;
  std::vector<std::string> overrides;  // "section.key=value"
  // Spec'd shortcuts; mapped onto config overrides when supplied.
  std::string seed, n, method, particles, dt, paths;
  bool adaptive = false;
  bool fixed = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool wants_in) {
  cmd->add_option("--config", f.config_path, "configuration file (INI-style)");
  cmd->add_option("--out", f.out_path, "output CSV path");
  if (wants_in)
    cmd->add_option("--in", f.in_path, "input path bundle CSV (from simulate)");
  cmd->add_option("--seed", f.seed, "override rng.seed");
  cmd->add_option("--n", f.n, "override filter.n (basis size)");
  cmd->add_option("--method", f.method, "override filter.method (em|su)");
  cmd->add_flag("--adaptive", f.adaptive, "enable the adaptive basis");
  cmd->add_flag("--fixed", f.fixed, "disable the adaptive basis");
  cmd->add_option("--particles", f.particles, "override pf.particles");
  cmd->add_option("--dt", f.dt, "override time.dt");
  cmd->add_option("--paths", f.paths, "override bench.paths");
  cmd->add_option("--set", f.overrides,
                  "extra overrides as section.key=value (repeatable)");
}

int fail_with(zk_status status, const char* what) {
  std::fprintf(stderr, "zakai: %s: %s\n", what, zk_last_error());
  return status == ZK_ERR_DIVERGED ? 2 : 1;
}

using ConfigPtr = std::unique_ptr<zk_config, decltype(&zk_config_free)>;

int load_config(const CommonFlags& f, ConfigPtr& cfg) {
  zk_config* raw = nullptr;
  zk_status st = f.config_path.empty() ? zk_config_create(&raw)
                                       : zk_config_load(f.config_path.c_str(), &raw);
  if (st != ZK_OK) return fail_with(st, "config");
  cfg = ConfigPtr(raw, &zk_config_free);

  auto set = [&](const char* key, const std::string& value) -> int {
    if (value.empty()) return 0;
    const zk_status s = zk_config_set(cfg.get(), key, value.c_str());
    return s == ZK_OK ? 0 : fail_with(s, key);
  };
  if (int rc = set("rng.seed", f.seed)) return rc;
  if (int rc = set("filter.n", f.n)) return rc;
  if (int rc = set("filter.method", f.method)) return rc;
  if (int rc = set("pf.particles", f.particles)) return rc;
  if (int rc = set("time.dt", f.dt)) return rc;
  if (int rc = set("bench.paths", f.paths)) return rc;
  if (f.adaptive)
    if (int rc = set("filter.adaptive", "true")) return rc;
  if (f.fixed)
    if (int rc = set("filter.adaptive", "false")) return rc;
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "zakai: --set expects section.key=value, got '%s'\n",
                   kv.c_str());
      return 1;
    }
    const zk_status s = zk_config_set(cfg.get(), kv.substr(0, eq).c_str(),
                                      kv.substr(eq + 1).c_str());
    if (s != ZK_OK) return fail_with(s, kv.c_str());
  }
  return 0;
}

int write_table(zk_table* table, const std::string& out_path, bool print) {
  std::unique_ptr<zk_table, decltype(&zk_table_free)> guard(table, &zk_table_free);
  if (print) {
    char* text = nullptr;
    if (zk_table_format(table, &text) == ZK_OK) {
      std::fputs(text, stdout);
      zk_string_free(text);
    }
  }
  if (!out_path.empty()) {
    const zk_status st = zk_table_write_csv(table, out_path.c_str());
    if (st != ZK_OK) return fail_with(st, "writing output");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "zakai - spectral Galerkin solver for nonlinear filtering with mixed\n"
      "diffusive and point-process observations.\n\n"
      "Configuration files are INI-style \"[section]\" + \"key = value\" lines;\n"
      "sections: model, time, filter, pf, rng, bench, convergence, stability.\n"
      "See the README for the full key list and CSV schemas."};
  app.require_subcommand(1);

  CommonFlags sim_f, fil_f, ben_f, con_f, sta_f;
  auto* sim = app.add_subcommand("simulate",
                                 "simulate a signal/observation path bundle");
  add_common(sim, sim_f, false);
  auto* fil = app.add_subcommand("filter", "run the filter over a bundle CSV");
  add_common(fil, fil_f, true);
  auto* ben = app.add_subcommand("benchmark",
                                 "RMSE/EDM/EDV comparison across methods");
  add_common(ben, ben_f, false);
  auto* con = app.add_subcommand("convergence", "basis-size sweep");
  add_common(con, con_f, false);
  auto* sta = app.add_subcommand("stability", "time-step sweep (SU vs EM)");
  add_common(sta, sta_f, false);

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) {
    if (sim_f.out_path.empty()) {
      std::fprintf(stderr, "zakai: simulate requires --out\n");
      return 1;
    }
    ConfigPtr cfg(nullptr, &zk_config_free);
    if (int rc = load_config(sim_f, cfg)) return rc;
    zk_bundle* bundle = nullptr;
    zk_status st = zk_simulate(cfg.get(), &bundle);
    if (st != ZK_OK) return fail_with(st, "simulate");
    st = zk_bundle_write_csv(bundle, sim_f.out_path.c_str());
    zk_bundle_free(bundle);
    if (st != ZK_OK) return fail_with(st, "writing bundle");
    return 0;
  }

  if (fil->parsed()) {
    if (fil_f.in_path.empty() || fil_f.out_path.empty()) {
      std::fprintf(stderr, "zakai: filter requires --in and --out\n");
      return 1;
    }
    ConfigPtr cfg(nullptr, &zk_config_free);
    if (int rc = load_config(fil_f, cfg)) return rc;
    zk_bundle* bundle = nullptr;
    zk_status st = zk_bundle_read_csv(fil_f.in_path.c_str(), &bundle);
    if (st != ZK_OK) return fail_with(st, "reading bundle");
    zk_table* table = nullptr;
    st = zk_filter(cfg.get(), bundle, &table);
    zk_bundle_free(bundle);
    if (st != ZK_OK) return fail_with(st, "filter");
    return write_table(table, fil_f.out_path, false);
  }

  const CommonFlags* flags = nullptr;
  zk_status (*runner)(const zk_config*, zk_table**) = nullptr;
  const char* what = nullptr;
  if (ben->parsed()) {
    flags = &ben_f;
    runner = &zk_benchmark;
    what = "benchmark";
  } else if (con->parsed()) {
    flags = &con_f;
    runner = &zk_convergence;
    what = "convergence";
  } else {
    flags = &sta_f;
    runner = &zk_stability;
    what = "stability";
  }
  ConfigPtr cfg(nullptr, &zk_config_free);
  if (int rc = load_config(*flags, cfg)) return rc;
  zk_table* table = nullptr;
  const zk_status st = runner(cfg.get(), &table);
  if (st != ZK_OK) return fail_with(st, what);
  return write_table(table, flags->out_path, true);
}
