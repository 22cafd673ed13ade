#include "zakai/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

namespace zakai::numerics {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

QuadratureRule gauss_hermite(int m) {
  require(m >= 1 && m <= kMaxQuadratureNodes, ErrorCode::invalid_argument,
          "gauss_hermite: node count must be in [1," +
              std::to_string(kMaxQuadratureNodes) + "]");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k < m; ++k) {
    const double b = std::sqrt(double(k));
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(m);
  rule.weights.resize(m);
  for (int k = 0; k < m; ++k) {
    rule.nodes[k] = es.eigenvalues()(k);
    const double v0 = es.eigenvectors()(0, k);
    rule.weights[k] = v0 * v0;  // first moment of phi is 1
  }
  return rule;
}

MappedRule map_rule(const QuadratureRule& rule, double center, double scale) {
  require(scale > 0.0, ErrorCode::invalid_argument, "map_rule: scale must be > 0");
  const double pref = scale * std::sqrt(2.0) * std::sqrt(2.0 * kPi);
  MappedRule out;
  const size_t m = rule.nodes.size();
  out.x.resize(m);
  out.factor.resize(m);
  for (size_t k = 0; k < m; ++k) {
    const double u = rule.nodes[k];
    const double w = rule.weights[k];
    out.x[k] = center + scale * std::sqrt(2.0) * u;
    if (w <= 0.0) {
      out.factor[k] = 0.0;  // underflowed tail weight: contribution negligible
    } else {
      const double e = 0.5 * u * u;
      // w*exp(e) can hit inf*tiny for very large rules; route through logs there.
      const double f = e < 700.0 ? pref * w * std::exp(e)
                                 : pref * std::exp(std::log(w) + e);
      // The true w e^{u^2/2} never exceeds O(1); far-tail weights below the
      // eigensolver's accuracy floor come out as noise that explodes under
      // the exponential. Those nodes carry no real mass, so drop them.
      out.factor[k] = (std::isfinite(f) && f <= 50.0 * pref) ? f : 0.0;
    }
  }
  return out;
}

double inner_product(const std::function<double(double)>& f,
                     const std::function<double(double)>& g,
                     const QuadratureRule& rule, double center, double scale) {
  const MappedRule m = map_rule(rule, center, scale);
  double acc = 0.0;
  for (size_t k = 0; k < m.x.size(); ++k)
    if (m.factor[k] != 0.0) acc += m.factor[k] * f(m.x[k]) * g(m.x[k]);
  return acc;
}

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& M) {
  require(M.rows() == M.cols(), ErrorCode::invalid_argument,
          "matrix_exp: matrix must be square");
  require(M.rows() <= 4096, ErrorCode::invalid_argument,
          "matrix_exp: dimension exceeds 4096");
  require(M.allFinite(), ErrorCode::invalid_argument,
          "matrix_exp: non-finite entries");

  const int n = int(M.rows());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  // theta_13 threshold for the degree-13 Pade approximant.
  const double theta13 = 5.371920351148152;
  const double norm1 = M.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13)
    squarings = int(std::ceil(std::log2(norm1 / theta13)));
  const Eigen::MatrixXd A = M / std::exp2(double(squarings));

  static const double b[14] = {64764752532480000.0, 32382376266240000.0,
                               7771770303897600.0,  1187353796428800.0,
                               129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,
                               1323241920.0,        40840800.0,
                               960960.0,            16380.0,
                               182.0,               1.0};

  const Eigen::MatrixXd A2 = A * A;
  const Eigen::MatrixXd A4 = A2 * A2;
  const Eigen::MatrixXd A6 = A4 * A2;
  const Eigen::MatrixXd U =
      A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 +
           b[3] * A2 + b[1] * I);
  const Eigen::MatrixXd V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) +
                            b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;

  Eigen::MatrixXd R = (V - U).partialPivLu().solve(V + U);
  for (int s = 0; s < squarings; ++s) R = R * R;
  return R;
}

GramSolve solve_gram(const Eigen::MatrixXd& D, const Eigen::MatrixXd& V) {
  require(D.rows() == D.cols(), ErrorCode::invalid_argument,
          "solve_gram: D must be square");
  require(D.rows() == V.rows(), ErrorCode::invalid_argument,
          "solve_gram: shape mismatch between D and V");
  const int n = int(D.rows());

  // Plain lower Cholesky; kept manual so a failure can name the pivot.
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double diag = D(j, j);
    for (int k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag))
      fail(ErrorCode::invalid_argument,
           "solve_gram: Cholesky failed at row " + std::to_string(j + 1) +
               " (smallest pivot " + std::to_string(diag) +
               "); basis is numerically dependent");
    L(j, j) = std::sqrt(diag);
    for (int i = j + 1; i < n; ++i) {
      double s = D(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / L(j, j);
    }
  }

  double dmax = L(0, 0), dmin = L(0, 0);
  for (int j = 1; j < n; ++j) {
    dmax = std::max(dmax, L(j, j));
    dmin = std::min(dmin, L(j, j));
  }

  GramSolve out;
  out.condition_estimate = (dmax / dmin) * (dmax / dmin);
  out.solution = L.triangularView<Eigen::Lower>().solve(V);
  L.transpose().triangularView<Eigen::Upper>().solveInPlace(out.solution);
  return out;
}

GramSolver::GramSolver(const Eigen::MatrixXd& D, bool assume_identity) {
  if (assume_identity) {
    identity_ = true;
    return;
  }
  identity_ = false;
  llt_.compute(D);
  require(llt_.info() == Eigen::Success, ErrorCode::invalid_argument,
          "GramSolver: Gram matrix is not positive definite");
}

Eigen::VectorXd GramSolver::solve(const Eigen::VectorXd& v) const {
  if (identity_) return v;
  return llt_.solve(v);
}

}  // namespace zakai::numerics
