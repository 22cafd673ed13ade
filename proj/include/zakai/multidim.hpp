#pragma once

#include "zakai/adaptive.hpp"
#include "zakai/galerkin.hpp"

namespace zakai::multidim {

/// Tensor-product Hermite basis: flat index 1..n^d in row-major order with
/// axis 1 most significant, each axis carrying its own location and scale.
struct TensorBasisSpec {
  int d = 1;
  int n_per_dim = 1;
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;

  int total() const {
    int m = 1;
    for (int k = 0; k < d; ++k) m *= n_per_dim;
    return m;
  }
};

/// Dense tensor bases refuse beyond this total size.
inline constexpr int kMaxTensorSize = 7776;

void validate(const TensorBasisSpec& spec);

/// flat = sum_k (i_k - 1) n^{d-k} + 1 and its inverse.
int tensor_index(const TensorBasisSpec& spec, const std::vector<int>& multi);
std::vector<int> tensor_multi(const TensorBasisSpec& spec, int flat);

double tensor_basis_eval(const TensorBasisSpec& spec, int flat,
                         const Eigen::VectorXd& x);

/// Per-axis one-dimensional basis.
hermite::BasisSpec axis_basis(const TensorBasisSpec& spec, int axis);

/// Assembly of the projected system on the tensor basis. Models carrying the
/// declared linear/quadratic structure are assembled from closed-form
/// one-dimensional blocks (Kronecker sums); general models fall back to
/// tensor quadrature, supported for d <= 2.
galerkin::CoefficientMatrices assemble_md(const model::ModelSpec& spec,
                                          const TensorBasisSpec& basis,
                                          const numerics::QuadratureRule& rule);

struct MdEstimateRow {
  double t = 0.0;
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;  // per-axis marginal variances
  double log_scale = 0.0;
  bool rebased = false;
};

struct MdRunOptions {
  int quad_nodes = 0;
  bool renormalize = true;
  bool adaptive = false;
  adaptive::AgaConfig aga;
};

/// Tensor basis located and scaled per axis by the model's initial law.
TensorBasisSpec initial_basis_md(const model::ModelSpec& spec, int n_per_dim);

/// d-dimensional filter run reusing the one-dimensional steppers; per-axis
/// moments come from the tensor factorization of (x_a^j, e_{i_1} x ... x e_{i_d}).
/// For d = 1 this is exactly the one-dimensional run.
std::vector<MdEstimateRow> run_filter_md(const model::ModelSpec& spec,
                                         const TensorBasisSpec& basis,
                                         galerkin::StepMethod method,
                                         const model::PathBundle& bundle,
                                         const MdRunOptions& options = {});

}  // namespace zakai::multidim
