#include "zakai/multidim.hpp"

#include <cmath>
#include <string>

namespace zakai::multidim {

using galerkin::CoefficientMatrices;
using hermite::BasisFamily;
using hermite::BasisSpec;
using model::ModelSpec;

void validate(const TensorBasisSpec& spec) {
  require(spec.d >= 1, ErrorCode::invalid_argument, "tensor basis: d must be >= 1");
  require(spec.n_per_dim >= 1, ErrorCode::invalid_argument,
          "tensor basis: n_per_dim must be >= 1");
  require(spec.mu.size() == spec.d && spec.sigma.size() == spec.d,
          ErrorCode::invalid_argument,
          "tensor basis: mu/sigma must have one entry per axis");
  require((spec.sigma.array() > 0.0).all(), ErrorCode::invalid_argument,
          "tensor basis: scales must be > 0");
  double m = 1;
  for (int k = 0; k < spec.d; ++k) m *= spec.n_per_dim;
  require(m <= double(kMaxTensorSize), ErrorCode::invalid_argument,
          "tensor basis: total size n^d exceeds the dense cap " +
              std::to_string(kMaxTensorSize));
}

hermite::BasisSpec axis_basis(const TensorBasisSpec& spec, int axis) {
  BasisSpec b;
  b.family = BasisFamily::Hermite;
  b.n = spec.n_per_dim;
  b.mu_basis = spec.mu(axis);
  b.sigma_basis = spec.sigma(axis);
  return b;
}

int tensor_index(const TensorBasisSpec& spec, const std::vector<int>& multi) {
  require(int(multi.size()) == spec.d, ErrorCode::invalid_argument,
          "tensor_index: multi-index size must equal d");
  int flat = 0;
  for (int k = 0; k < spec.d; ++k) {
    require(multi[k] >= 1 && multi[k] <= spec.n_per_dim,
            ErrorCode::invalid_argument,
            "tensor_index: component " + std::to_string(k + 1) + " out of range");
    flat = flat * spec.n_per_dim + (multi[k] - 1);
  }
  return flat + 1;
}

std::vector<int> tensor_multi(const TensorBasisSpec& spec, int flat) {
  require(flat >= 1 && flat <= spec.total(), ErrorCode::invalid_argument,
          "tensor_multi: flat index out of range");
  std::vector<int> multi(spec.d);
  int rest = flat - 1;
  for (int k = spec.d - 1; k >= 0; --k) {
    multi[k] = rest % spec.n_per_dim + 1;
    rest /= spec.n_per_dim;
  }
  return multi;
}

double tensor_basis_eval(const TensorBasisSpec& spec, int flat,
                         const Eigen::VectorXd& x) {
  require(x.size() == spec.d, ErrorCode::invalid_argument,
          "tensor_basis_eval: point dimension must equal d");
  const std::vector<int> multi = tensor_multi(spec, flat);
  double v = 1.0;
  for (int k = 0; k < spec.d; ++k)
    v *= hermite::basis_eval(axis_basis(spec, k), multi[k], x(k));
  return v;
}

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Kronecker product over all axes with the given per-axis factors (nullptr
// meaning identity); axis 1 is the most significant, matching tensor_index.
Eigen::MatrixXd kron_axes(const TensorBasisSpec& spec,
                          const std::vector<const Eigen::MatrixXd*>& factors) {
  const Eigen::MatrixXd eye =
      Eigen::MatrixXd::Identity(spec.n_per_dim, spec.n_per_dim);
  Eigen::MatrixXd out = Eigen::MatrixXd::Ones(1, 1);
  for (int k = 0; k < spec.d; ++k)
    out = kron(out, factors[k] ? *factors[k] : eye);
  return out;
}

// One-dimensional closed-form blocks on the adapted axis basis (c, s), all
// indexed M(j,i) = (e_i, op e_j) like the scalar module. Derived from the
// ladder relations; exact.
struct AxisBlocks {
  Eigen::MatrixXd X;    // (e_i, x e_j)
  Eigen::MatrixXd X2;   // (e_i, x^2 e_j)
  Eigen::MatrixXd D1;   // (e_i, d/dx e_j)
  Eigen::MatrixXd XD1;  // (e_i, x d/dx e_j)
  Eigen::MatrixXd D2;   // (e_i, d^2/dx^2 e_j)
};

AxisBlocks axis_blocks(int n, double c, double s) {
  AxisBlocks b;
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, n);    // (e_i, y e_j)
  Eigen::MatrixXd Y2 = Eigen::MatrixXd::Zero(n, n);   // (e_i, y^2 e_j)
  Eigen::MatrixXd G1 = Eigen::MatrixXd::Zero(n, n);   // (e_i, e_j'(y))
  Eigen::MatrixXd G1y = Eigen::MatrixXd::Zero(n, n);  // (e_i, y e_j'(y))
  Eigen::MatrixXd G2 = Eigen::MatrixXd::Zero(n, n);   // (e_i, e_j''(y))
  for (int j = 1; j <= n; ++j) {
    const double rj = std::sqrt(double(j));
    const double rjm1 = std::sqrt(double(j - 1));
    const double rup = std::sqrt(double(j) * (j + 1));
    const double rdn = std::sqrt(double((j - 1) * (j - 2)));
    if (j + 1 <= n) Y(j - 1, j) = rj;
    if (j - 1 >= 1) Y(j - 1, j - 2) = rjm1;
    Y2(j - 1, j - 1) = 2.0 * j - 1.0;
    if (j + 2 <= n) Y2(j - 1, j + 1) = rup;
    if (j - 2 >= 1) Y2(j - 1, j - 3) = rdn;
    if (j + 1 <= n) G1(j - 1, j) = -0.5 * rj;
    if (j - 1 >= 1) G1(j - 1, j - 2) = 0.5 * rjm1;
    G1y(j - 1, j - 1) = -0.5;
    if (j + 2 <= n) G1y(j - 1, j + 1) = -0.5 * rup;
    if (j - 2 >= 1) G1y(j - 1, j - 3) = 0.5 * rdn;
    G2(j - 1, j - 1) = 0.25 * (1.0 - 2.0 * j);
    if (j + 2 <= n) G2(j - 1, j + 1) = 0.25 * rup;
    if (j - 2 >= 1) G2(j - 1, j - 3) = 0.25 * rdn;
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  b.X = c * I + s * Y;
  b.X2 = c * c * I + 2.0 * c * s * Y + s * s * Y2;
  b.D1 = G1 / s;
  b.XD1 = (c / s) * G1 + G1y;
  b.D2 = G2 / (s * s);
  return b;
}

CoefficientMatrices assemble_structured(const model::LinearMdParams& p,
                                        const TensorBasisSpec& basis) {
  const int d = basis.d;
  const int m = basis.total();
  const int l = int(p.obs.rows());

  std::vector<AxisBlocks> blocks(d);
  for (int k = 0; k < d; ++k)
    blocks[k] = axis_blocks(basis.n_per_dim, basis.mu(k), basis.sigma(k));

  CoefficientMatrices out;
  out.basis.family = BasisFamily::Hermite;
  out.basis.n = m;
  out.A = Eigen::MatrixXd::Zero(m, m);
  out.C = Eigen::MatrixXd::Zero(m, m);
  out.D = Eigen::MatrixXd::Identity(m, m);
  out.B.assign(l, Eigen::MatrixXd::Zero(m, m));

  std::vector<const Eigen::MatrixXd*> f(d, nullptr);

  // Drift sum_i b_{ik} x_k d/dx_i.
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) {
      const double coef = p.drift(i, k);
      if (coef == 0.0) continue;
      std::fill(f.begin(), f.end(), nullptr);
      if (i == k) {
        f[i] = &blocks[i].XD1;
      } else {
        f[i] = &blocks[i].D1;
        f[k] = &blocks[k].X;
      }
      out.A += coef * kron_axes(basis, f);
    }

  // Diffusion (1/2) a_{ij} d^2/dx_i dx_j with constant a = diffusion diffusion^T.
  const Eigen::MatrixXd a = p.diffusion * p.diffusion.transpose();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double coef = 0.5 * a(i, j);
      if (coef == 0.0) continue;
      std::fill(f.begin(), f.end(), nullptr);
      if (i == j) {
        f[i] = &blocks[i].D2;
      } else {
        f[i] = &blocks[i].D1;
        f[j] = &blocks[j].D1;
      }
      out.A += coef * kron_axes(basis, f);
    }

  // Observation channels h_l(x) = sum_k H(l,k) x_k.
  for (int c = 0; c < l; ++c)
    for (int k = 0; k < d; ++k) {
      const double coef = p.obs(c, k);
      if (coef == 0.0) continue;
      std::fill(f.begin(), f.end(), nullptr);
      f[k] = &blocks[k].X;
      out.B[c] += coef * kron_axes(basis, f);
    }

  // Intensity lambda(x) - 1 = (lambda0 - 1) + sum_k lambda_k x_k^2.
  out.C.diagonal().array() += p.lambda0 - 1.0;
  for (int k = 0; k < d; ++k) {
    const double coef = p.lambda_quad(k);
    if (coef == 0.0) continue;
    std::fill(f.begin(), f.end(), nullptr);
    f[k] = &blocks[k].X2;
    out.C += coef * kron_axes(basis, f);
  }
  return out;
}

CoefficientMatrices assemble_tensor_quadrature(
    const ModelSpec& spec, const TensorBasisSpec& basis,
    const numerics::QuadratureRule& rule) {
  require(basis.d <= 2, ErrorCode::invalid_argument,
          "assemble_md: tensor-quadrature fallback supports d <= 2; declare "
          "the linear/quadratic model structure for higher dimensions");
  const int d = basis.d, n = basis.n_per_dim, m = basis.total();
  const int l = spec.dim_z;

  CoefficientMatrices out;
  out.basis.family = BasisFamily::Hermite;
  out.basis.n = m;
  out.A = Eigen::MatrixXd::Zero(m, m);
  out.C = Eigen::MatrixXd::Zero(m, m);
  out.D = Eigen::MatrixXd::Zero(m, m);
  out.B.assign(l, Eigen::MatrixXd::Zero(m, m));

  // Per-axis mapped nodes plus value/derivative tables at every node.
  struct AxisData {
    numerics::MappedRule q;
    // [node][index], values up to n+2 and derivatives up to n.
    std::vector<std::vector<double>> v, d1, d2;
  };
  std::vector<AxisData> ax(d);
  for (int k = 0; k < d; ++k) {
    const BasisSpec ab = axis_basis(basis, k);
    ax[k].q = numerics::map_rule(rule, ab.mu_basis, ab.sigma_basis);
    const size_t nn = ax[k].q.x.size();
    ax[k].v.resize(nn);
    ax[k].d1.resize(nn);
    ax[k].d2.resize(nn);
    std::vector<double> vals(n + 2);
    const double inv_s = 1.0 / ab.sigma_basis;
    for (size_t t = 0; t < nn; ++t) {
      hermite::basis_eval_all(ab, n + 2, ax[k].q.x[t], vals.data());
      ax[k].v[t].assign(vals.begin(), vals.end());
      ax[k].d1[t].resize(n);
      ax[k].d2[t].resize(n);
      for (int j = 1; j <= n; ++j) {
        const double lo = j >= 2 ? std::sqrt(double(j - 1)) * vals[j - 2] : 0.0;
        ax[k].d1[t][j - 1] =
            0.5 * inv_s * (lo - std::sqrt(double(j)) * vals[j]);
        const double lo2 =
            j >= 3 ? std::sqrt(double((j - 1) * (j - 2))) * vals[j - 3] : 0.0;
        ax[k].d2[t][j - 1] = 0.25 * inv_s * inv_s *
                             (lo2 + (1.0 - 2.0 * j) * vals[j - 1] +
                              std::sqrt(double(j) * (j + 1)) * vals[j + 1]);
      }
    }
  }

  std::vector<size_t> node(d, 0);
  Eigen::VectorXd x(d);
  std::vector<int> multi_iorder(d), multi_j(d);
  while (true) {
    double factor = 1.0;
    for (int k = 0; k < d; ++k) {
      factor *= ax[k].q.factor[node[k]];
      x(k) = ax[k].q.x[node[k]];
    }
    if (factor != 0.0) {
      const Eigen::VectorXd bx = spec.drift(x);
      const Eigen::MatrixXd sx = spec.diffusion(x);
      const Eigen::MatrixXd axx = sx * sx.transpose();
      const Eigen::VectorXd hx = spec.obs_fn(x);
      const double lam1 = spec.intensity(x) - 1.0;

      // All tensor basis values and the generator applied to each of them.
      Eigen::VectorXd ev(m), lev(m);
      for (int J = 1; J <= m; ++J) {
        int rest = J - 1;
        for (int k = d - 1; k >= 0; --k) {
          multi_j[k] = rest % n + 1;
          rest /= n;
        }
        double prod = 1.0;
        for (int k = 0; k < d; ++k) prod *= ax[k].v[node[k]][multi_j[k] - 1];
        ev(J - 1) = prod;

        double le = 0.0;
        for (int i = 0; i < d; ++i) {
          double term = bx(i);
          double grad = ax[i].d1[node[i]][multi_j[i] - 1];
          for (int k = 0; k < d; ++k)
            if (k != i) grad *= ax[k].v[node[k]][multi_j[k] - 1];
          le += term * grad;
          for (int j2 = 0; j2 < d; ++j2) {
            const double coef = 0.5 * axx(i, j2);
            if (coef == 0.0) continue;
            double hess;
            if (i == j2) {
              hess = ax[i].d2[node[i]][multi_j[i] - 1];
              for (int k = 0; k < d; ++k)
                if (k != i) hess *= ax[k].v[node[k]][multi_j[k] - 1];
            } else {
              hess = ax[i].d1[node[i]][multi_j[i] - 1] *
                     ax[j2].d1[node[j2]][multi_j[j2] - 1];
              for (int k = 0; k < d; ++k)
                if (k != i && k != j2) hess *= ax[k].v[node[k]][multi_j[k] - 1];
            }
            le += coef * hess;
          }
        }
        lev(J - 1) = le;
      }

      for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
          const double w = factor * ev(i);
          out.A(j, i) += w * lev(j);
          out.C(j, i) += w * lam1 * ev(j);
          out.D(j, i) += w * ev(j);
          for (int c = 0; c < l; ++c) out.B[c](j, i) += w * hx(c) * ev(j);
        }
    }

    int k = d - 1;
    while (k >= 0 && ++node[k] == ax[k].q.x.size()) node[k--] = 0;
    if (k < 0) break;
  }

  require(out.D.allFinite() && out.D.diagonal().minCoeff() > 0.0,
          ErrorCode::invalid_argument,
          "assemble_md: quadrature underflow, no node carries basis mass");
  return out;
}

}  // namespace

CoefficientMatrices assemble_md(const ModelSpec& spec,
                                const TensorBasisSpec& basis,
                                const numerics::QuadratureRule& rule) {
  validate(basis);
  require(spec.dim_x == basis.d, ErrorCode::invalid_argument,
          "assemble_md: model dimension must equal basis dimension");
  if (basis.d == 1)
    return galerkin::assemble_quadrature(spec, axis_basis(basis, 0), rule);
  if (spec.linear_md) return assemble_structured(*spec.linear_md, basis);
  return assemble_tensor_quadrature(spec, basis, rule);
}

TensorBasisSpec initial_basis_md(const ModelSpec& spec, int n_per_dim) {
  TensorBasisSpec b;
  b.d = spec.dim_x;
  b.n_per_dim = n_per_dim;
  b.mu = spec.mu0;
  b.sigma = spec.cov0.diagonal().cwiseSqrt();
  return b;
}

namespace {

// Per-axis unnormalized moment weights against the adapted axis bases:
// a0[k](i) = (1, e_i), a1[k](i) = (x, e_i), a2[k](i) = (x^2, e_i).
struct MdMoments {
  std::vector<Eigen::VectorXd> a0, a1, a2;
  // Flattened weight vectors over the full tensor basis.
  Eigen::VectorXd W0;
  std::vector<Eigen::VectorXd> W1, W2;
};

MdMoments md_moments(const TensorBasisSpec& basis,
                     const galerkin::MomentVectors& mv) {
  const int d = basis.d, n = basis.n_per_dim, m = basis.total();
  MdMoments out;
  out.a0.resize(d);
  out.a1.resize(d);
  out.a2.resize(d);
  for (int k = 0; k < d; ++k) {
    const double c = basis.mu(k), s = basis.sigma(k), rs = std::sqrt(s);
    out.a0[k] = rs * mv.w0;
    out.a1[k] = rs * (c * mv.w0 + s * mv.w1);
    out.a2[k] = rs * (c * c * mv.w0 + 2.0 * c * s * mv.w1 + s * s * mv.w2);
  }
  out.W0.resize(m);
  out.W1.assign(d, Eigen::VectorXd(m));
  out.W2.assign(d, Eigen::VectorXd(m));
  std::vector<int> multi(d, 1);
  for (int J = 0; J < m; ++J) {
    int rest = J;
    for (int k = d - 1; k >= 0; --k) {
      multi[k] = rest % n;
      rest /= n;
    }
    double w0 = 1.0;
    for (int k = 0; k < d; ++k) w0 *= out.a0[k](multi[k]);
    out.W0(J) = w0;
    for (int a = 0; a < d; ++a) {
      double w1 = 1.0, w2 = 1.0;
      for (int k = 0; k < d; ++k) {
        w1 *= k == a ? out.a1[k](multi[k]) : out.a0[k](multi[k]);
        w2 *= k == a ? out.a2[k](multi[k]) : out.a0[k](multi[k]);
      }
      out.W1[a](J) = w1;
      out.W2[a](J) = w2;
    }
  }
  return out;
}

struct MdEstimate {
  Eigen::VectorXd mean, variance;
};

MdEstimate md_estimate(const Eigen::VectorXd& psi, const MdMoments& mm, int d,
                       double t) {
  const double norm = psi.dot(mm.W0);
  require(std::isfinite(norm) && std::abs(norm) > 1e-12 * psi.norm(),
          ErrorCode::degenerate_state,
          "run_filter_md: vanishing normalizer at t = " + std::to_string(t));
  MdEstimate est;
  est.mean.resize(d);
  est.variance.resize(d);
  for (int a = 0; a < d; ++a) {
    est.mean(a) = psi.dot(mm.W1[a]) / norm;
    est.variance(a) = psi.dot(mm.W2[a]) / norm - est.mean(a) * est.mean(a);
  }
  return est;
}

// Mode-k contraction psi <- (I x ... x P x ... x I) psi with P acting on
// axis k (n x n), matching the row-major flat layout.
Eigen::VectorXd apply_axis(const Eigen::VectorXd& psi, const Eigen::MatrixXd& P,
                           int d, int n, int axis) {
  int inner = 1;
  for (int k = axis + 1; k < d; ++k) inner *= n;
  int outer = 1;
  for (int k = 0; k < axis; ++k) outer *= n;
  Eigen::VectorXd out(psi.size());
  Eigen::VectorXd slice(n), mapped(n);
  for (int o = 0; o < outer; ++o)
    for (int in = 0; in < inner; ++in) {
      const int base = o * n * inner + in;
      for (int j = 0; j < n; ++j) slice(j) = psi(base + j * inner);
      mapped = P * slice;
      for (int j = 0; j < n; ++j) out(base + j * inner) = mapped(j);
    }
  return out;
}

// Per-axis basis transition: projection of the expansion onto the tensor
// basis with updated (mu_k, sigma_k), as a product of one-dimensional
// transfer matrices.
Eigen::VectorXd rebase_md(const Eigen::VectorXd& psi,
                          const TensorBasisSpec& old_basis,
                          const TensorBasisSpec& new_basis,
                          const numerics::QuadratureRule& rule, double t) {
  const int d = old_basis.d, n = old_basis.n_per_dim;
  Eigen::VectorXd out = psi;
  std::vector<double> old_vals(n), new_vals(n);
  for (int k = 0; k < d; ++k) {
    const BasisSpec ob = axis_basis(old_basis, k);
    const BasisSpec nb = axis_basis(new_basis, k);
    if (ob.mu_basis == nb.mu_basis && ob.sigma_basis == nb.sigma_basis)
      continue;
    const numerics::MappedRule q =
        numerics::map_rule(rule, nb.mu_basis, nb.sigma_basis);
    Eigen::MatrixXd transfer = Eigen::MatrixXd::Zero(n, n);
    for (size_t s = 0; s < q.x.size(); ++s) {
      if (q.factor[s] == 0.0) continue;
      hermite::basis_eval_all(ob, n, q.x[s], old_vals.data());
      hermite::basis_eval_all(nb, n, q.x[s], new_vals.data());
      for (int i = 0; i < n; ++i) {
        const double w = q.factor[s] * new_vals[i];
        for (int j = 0; j < n; ++j) transfer(i, j) += w * old_vals[j];
      }
    }
    out = apply_axis(out, transfer, d, n, k);
  }
  const double before = psi.squaredNorm(), after = out.squaredNorm();
  require(before > 0.0 && after >= 0.5 * before, ErrorCode::mass_loss,
          "run_filter_md: basis transition at t = " + std::to_string(t) +
              " retains only " + std::to_string(100.0 * after / before) +
              "% of the L2 mass");
  return out;
}

std::vector<MdEstimateRow> run_md_1d(const ModelSpec& spec,
                                     const TensorBasisSpec& basis,
                                     galerkin::StepMethod method,
                                     const model::PathBundle& bundle,
                                     const MdRunOptions& options) {
  const BasisSpec b1 = axis_basis(basis, 0);
  galerkin::RunOptions ro;
  ro.quad_nodes = options.quad_nodes;
  ro.renormalize = options.renormalize;
  std::vector<galerkin::EstimateRow> rows;
  if (options.adaptive) {
    rows = adaptive::run_aga(spec, b1, method, bundle, options.aga, ro);
  } else {
    const auto table = hermite::build_coeff_table(
        std::min(hermite::kMaxTableDegree, b1.n + 1));
    const Eigen::VectorXd q0 = galerkin::project_initial(spec, b1, table);
    rows = galerkin::run_filter(spec, b1, method, bundle, q0, ro);
  }
  std::vector<MdEstimateRow> out(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    out[i].t = rows[i].t;
    out[i].mean = Eigen::VectorXd::Constant(1, rows[i].mean);
    out[i].variance = Eigen::VectorXd::Constant(1, rows[i].variance);
    out[i].log_scale = rows[i].log_scale;
    out[i].rebased = rows[i].rebased;
  }
  return out;
}

}  // namespace

std::vector<MdEstimateRow> run_filter_md(const ModelSpec& spec,
                                         const TensorBasisSpec& basis,
                                         galerkin::StepMethod method,
                                         const model::PathBundle& bundle,
                                         const MdRunOptions& options) {
  validate(basis);
  require(spec.dim_x == basis.d, ErrorCode::invalid_argument,
          "run_filter_md: model dimension must equal basis dimension");
  if (basis.d == 1) return run_md_1d(spec, basis, method, bundle, options);

  const int d = basis.d, n = basis.n_per_dim;
  require(n + 1 <= hermite::kMaxTableDegree, ErrorCode::invalid_argument,
          "run_filter_md: n_per_dim too large for the moment tables");
  require(!options.adaptive || spec.linear_md, ErrorCode::invalid_argument,
          "run_filter_md: adaptive runs need the declared model structure");

  const auto table = hermite::build_coeff_table(n + 1);
  const galerkin::MomentVectors mv = galerkin::moment_vectors(table, n);
  const int nodes = options.quad_nodes > 0 ? options.quad_nodes
                                           : numerics::default_node_count(n);
  const numerics::QuadratureRule rule = numerics::gauss_hermite(nodes);

  TensorBasisSpec cur = basis;
  CoefficientMatrices mats = assemble_md(spec, cur, rule);
  numerics::GramSolver gram(mats.D, true);  // Hermite tensor basis, D = I
  MdMoments mm = md_moments(cur, mv);

  // Initial coefficients: the Gaussian initial law factorizes over axes, so
  // the tensor projection is the outer product of per-axis projections.
  Eigen::VectorXd psi;
  {
    std::vector<Eigen::VectorXd> per_axis(d);
    for (int k = 0; k < d; ++k) {
      const double s = cur.sigma(k);
      const auto c = hermite::project_gaussian(
          table, (spec.mu0(k) - cur.mu(k)) / s, spec.cov0(k, k) / (s * s), n);
      per_axis[k] = Eigen::Map<const Eigen::VectorXd>(c.data(), n) / std::sqrt(s);
    }
    const int m = cur.total();
    psi.resize(m);
    std::vector<int> multi(d);
    for (int J = 0; J < m; ++J) {
      int rest = J;
      for (int k = d - 1; k >= 0; --k) {
        multi[k] = rest % n;
        rest /= n;
      }
      double v = 1.0;
      for (int k = 0; k < d; ++k) v *= per_axis[k](multi[k]);
      psi(J) = v;
    }
  }

  double log_scale = 0.0;
  const double dt = bundle.dt;
  Eigen::MatrixXd su_prop;
  if (method == galerkin::StepMethod::SU && bundle.steps() > 0)
    su_prop = numerics::matrix_exp((mats.A - mats.C) * dt);

  const numerics::QuadratureRule proj_rule =
      options.adaptive ? numerics::gauss_hermite(options.aga.projection_rule_nodes)
                       : numerics::QuadratureRule{};
  Eigen::VectorXd last_sigma = cur.sigma;
  int rebases = 0;

  std::vector<MdEstimateRow> rows;
  rows.reserve(bundle.steps() + 1);
  auto emit = [&](const MdEstimate& est, double t, bool rebased) {
    MdEstimateRow row;
    row.t = t;
    row.mean = est.mean;
    row.variance = est.variance;
    row.log_scale = log_scale;
    row.rebased = rebased;
    rows.push_back(row);
  };
  emit(md_estimate(psi, mm, d, 0.0), bundle.times.empty() ? 0.0 : bundle.times[0],
       false);

  for (int k = 1; k <= bundle.steps(); ++k) {
    const Eigen::VectorXd dz = bundle.dz.row(k - 1).transpose();
    const int dn = bundle.dn[k - 1];
    psi = method == galerkin::StepMethod::EM
              ? galerkin::em_kernel(mats, gram, psi, dz, dn, dt)
              : galerkin::su_kernel(mats, su_prop, psi, dz, dn, dt);
    const double t = bundle.times[k];
    require(psi.allFinite(), ErrorCode::divergence,
            "run_filter_md: diverged at t = " + std::to_string(t) + " (step " +
                std::to_string(k) + ")");
    if (options.renormalize) {
      const double r = psi.norm();
      require(r > 0.0, ErrorCode::divergence,
              "run_filter_md: collapsed to zero at step " + std::to_string(k));
      psi /= r;
      log_scale += std::log(r);
    }

    const MdEstimate est = md_estimate(psi, mm, d, t);
    bool rebased = false;
    if (options.adaptive) {
      bool trigger = false;
      Eigen::VectorXd target_sigma(d);
      for (int a = 0; a < d; ++a) {
        if (est.variance(a) >= 0.0) {
          const double sd = std::sqrt(est.variance(a));
          if (sd > 0.0) last_sigma(a) = sd;
          target_sigma(a) = sd > 0.0 ? sd : last_sigma(a);
          if (std::abs(est.mean(a) - cur.mu(a)) >
                  options.aga.threshold_mu * cur.sigma(a) ||
              std::abs(sd / cur.sigma(a) - 1.0) > options.aga.threshold_sigma)
            trigger = true;
        } else {
          target_sigma(a) = last_sigma(a);
          trigger = true;
        }
      }
      if (trigger) {
        ++rebases;
        require(rebases <= options.aga.max_rebases, ErrorCode::invalid_argument,
                "run_filter_md: exceeded max_rebases at t = " + std::to_string(t));
        TensorBasisSpec next = cur;
        next.mu = est.mean;
        next.sigma = target_sigma;
        psi = rebase_md(psi, cur, next, proj_rule, t);
        cur = next;
        mats = assemble_md(spec, cur, rule);
        mm = md_moments(cur, mv);
        if (method == galerkin::StepMethod::SU)
          su_prop = numerics::matrix_exp((mats.A - mats.C) * dt);
        rebased = true;
      }
    }
    emit(est, t, rebased);
  }
  return rows;
}

}  // namespace zakai::multidim
