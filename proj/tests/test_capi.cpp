// Exercises the shared-library C surface end to end: config handling,
// simulate -> CSV round trip -> filter -> tables, and error-code mapping.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "zakai.h"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name)
      : path("capi_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("config lifecycle and validation errors") {
  zk_config* cfg = nullptr;
  REQUIRE(zk_config_create(&cfg) == ZK_OK);
  CHECK(zk_config_set(cfg, "filter.n", "12") == ZK_OK);
  CHECK(zk_config_set(cfg, "filter.n", "not_a_number") == ZK_ERR_INVALID);
  CHECK(std::string(zk_last_error()).find("filter.n") != std::string::npos);
  CHECK(zk_config_set(cfg, "filter.unknown_key", "1") == ZK_ERR_INVALID);
  CHECK(zk_config_set(nullptr, "filter.n", "1") == ZK_ERR_INVALID);
  zk_config_free(cfg);

  zk_config* missing = nullptr;
  CHECK(zk_config_load("does_not_exist.cfg", &missing) == ZK_ERR_IO);
}

TEST_CASE("simulate, round-trip the bundle CSV, filter, and inspect tables") {
  zk_config* cfg = nullptr;
  REQUIRE(zk_config_create(&cfg) == ZK_OK);
  REQUIRE(zk_config_set(cfg, "time.T", "0.02") == ZK_OK);
  REQUIRE(zk_config_set(cfg, "time.dt", "1e-4") == ZK_OK);
  REQUIRE(zk_config_set(cfg, "filter.n", "8") == ZK_OK);
  REQUIRE(zk_config_set(cfg, "rng.seed", "123") == ZK_OK);

  zk_bundle* bundle = nullptr;
  REQUIRE(zk_simulate(cfg, &bundle) == ZK_OK);
  CHECK(zk_bundle_steps(bundle) == 200);
  CHECK(zk_bundle_dim(bundle) == 1);

  TempFile csv1("bundle1.csv"), csv2("bundle2.csv");
  REQUIRE(zk_bundle_write_csv(bundle, csv1.path.c_str()) == ZK_OK);
  zk_bundle* reread = nullptr;
  REQUIRE(zk_bundle_read_csv(csv1.path.c_str(), &reread) == ZK_OK);
  REQUIRE(zk_bundle_write_csv(reread, csv2.path.c_str()) == ZK_OK);
  CHECK(slurp(csv1.path) == slurp(csv2.path));  // lossless number format

  zk_table* est = nullptr;
  REQUIRE(zk_filter(cfg, reread, &est) == ZK_OK);
  CHECK(zk_table_rows(est) == 201);
  CHECK(std::string(zk_table_col_name(est, 0)) == "t");
  CHECK(std::string(zk_table_col_name(est, 1)) == "mean");
  // Estimate at t=0 is the projected initial law.
  CHECK(zk_table_value(est, 0, 1) == doctest::Approx(5.0).epsilon(1e-4));

  TempFile est_csv("estimates.csv");
  REQUIRE(zk_table_write_csv(est, est_csv.path.c_str()) == ZK_OK);
  const std::string text = slurp(est_csv.path);
  CHECK(text.rfind("t,mean,variance,log_scale,neg_mass_fraction,rebased", 0) ==
        0);

  zk_table_free(est);
  zk_bundle_free(reread);
  zk_bundle_free(bundle);
  zk_config_free(cfg);
}

TEST_CASE("benchmark through the C API with report table access") {
  zk_config* cfg = nullptr;
  REQUIRE(zk_config_create(&cfg) == ZK_OK);
  REQUIRE(zk_config_set(cfg, "time.T", "0.02") == ZK_OK);
  REQUIRE(zk_config_set(cfg, "time.dt", "1e-3") == ZK_OK);
  REQUIRE(zk_config_set(cfg, "bench.paths", "2") == ZK_OK);
  REQUIRE(zk_config_set(cfg, "bench.burn_in", "0") == ZK_OK);
  REQUIRE(zk_config_set(cfg, "bench.reference_particles", "0") == ZK_OK);
  REQUIRE(zk_config_set(cfg, "bench.methods", "agah(em,n=6) pf(np=50)") == ZK_OK);

  zk_table* report = nullptr;
  REQUIRE(zk_benchmark(cfg, &report) == ZK_OK);
  REQUIRE(zk_table_rows(report) == 2);
  CHECK(std::string(zk_table_row_label(report, 0)) == "AGAH(EM) n=6");
  CHECK(std::string(zk_table_row_label(report, 1)) == "PF N=50");
  CHECK(std::string(zk_table_row_status(report, 0)) == "ok");

  char* rendered = nullptr;
  REQUIRE(zk_table_format(report, &rendered) == ZK_OK);
  CHECK(std::string(rendered).find("AGAH(EM) n=6") != std::string::npos);
  zk_string_free(rendered);
  zk_table_free(report);

  // Divergence maps onto the dedicated status code.
  REQUIRE(zk_config_set(cfg, "model.var0", "-1") == ZK_OK);
  zk_table* bad = nullptr;
  CHECK(zk_benchmark(cfg, &bad) == ZK_ERR_INVALID);
  zk_config_free(cfg);
}
