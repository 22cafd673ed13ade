#pragma once

#include <string>
#include <vector>

#include "zakai/adaptive.hpp"
#include "zakai/galerkin.hpp"
#include "zakai/model.hpp"

namespace zakai::config {

/// One benchmark method entry, e.g. gah(su,n=24), agah(em,n=12),
/// gag(em,n=30), pf(np=100).
struct MethodSpec {
  enum class Kind { GAH, AGAH, GAG, PF } kind = Kind::AGAH;
  galerkin::StepMethod stepper = galerkin::StepMethod::EM;
  int n = 12;          // basis size for the Galerkin methods
  int particles = 100; // particle count for PF

  std::string label() const;
};

MethodSpec parse_method(const std::string& text);

/// Full run configuration, from an INI-style file of [section] key=value
/// lines. Unknown sections or keys are rejected.
struct RunConfig {
  // [model]
  std::string model_kind = "linear";  // linear | linear_md
  model::LinearModelParams linear;
  model::LinearMdParams md;
  model::ClampBounds clamp;
  // [time]
  double T = 0.5;
  double dt = 1e-4;
  // [filter]
  hermite::BasisFamily family = hermite::BasisFamily::Hermite;
  int n = 12;
  galerkin::StepMethod method = galerkin::StepMethod::SU;
  bool adaptive = true;
  adaptive::AgaConfig aga;
  int quad_nodes = 0;
  // Location/scale of fixed (non-adaptive) bases; adaptive runs start from
  // the initial law instead.
  double basis_mu = 0.0;
  double basis_sigma = 1.0;
  // [pf]
  int particles = 100;
  // [rng]
  std::uint64_t seed = 1;
  // [bench]
  int paths = 20;
  std::vector<MethodSpec> methods;
  int reference_particles = 2000;
  double burn_in = 0.02;
  // [convergence]
  std::vector<int> n_list{8, 12, 24};
  // [stability]
  std::vector<double> dt_list{1e-4, 1e-3, 1e-2};

  int steps() const { return int(T / dt + 0.5); }
};

RunConfig parse_file(const std::string& path);
RunConfig parse_text(const std::string& text);

/// Applies a dotted override such as ("filter.n", "12").
void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value);

void validate(const RunConfig& cfg);

model::ModelSpec build_model(const RunConfig& cfg);

}  // namespace zakai::config
