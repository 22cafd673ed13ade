#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "zakai/errors.hpp"

namespace zakai::numerics {

/// Probabilists' Gauss-Hermite rule: int f(x) phi(x) dx ~ sum w_k f(x_k),
/// phi the standard normal density. Weights sum to 1.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline constexpr int kMaxQuadratureNodes = 512;

/// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite family
/// (zero diagonal, off-diagonal sqrt(k)).
QuadratureRule gauss_hermite(int m);

/// Default node count for inner products against a basis of size n.
inline int default_node_count(int n) { return std::max(2 * n + 40, 120); }

/// Change of variables shared by every L2 inner product here. With
/// x_k = center + scale*sqrt(2)*u_k the plain Lebesgue integral becomes
///   int F(x) dx ~ scale*sqrt(2)*sqrt(2pi) * sum_k w_k e^{u_k^2/2} F(x_k),
/// exact up to the rule degree whenever F = (Gaussian kernel of one basis
/// function at (center, scale)) * polynomial, i.e. F(x) = P(x) e^{-u^2/2}.
struct MappedRule {
  std::vector<double> x;       // transformed nodes
  std::vector<double> factor;  // scale*sqrt(2)*sqrt(2pi)*w_k*e^{u_k^2/2}
};

MappedRule map_rule(const QuadratureRule& rule, double center, double scale);

/// int f(x) g(x) dx by the mapped rule above.
double inner_product(const std::function<double(double)>& f,
                     const std::function<double(double)>& g,
                     const QuadratureRule& rule, double center, double scale);

/// exp(M) by scaling-and-squaring with the degree-13 Pade approximant.
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& M);

struct GramSolve {
  Eigen::MatrixXd solution;   // D^{-1} V
  double condition_estimate;  // cheap spectral estimate from the Cholesky factor
};

/// Solves D X = V for symmetric positive definite D by Cholesky; fails with a
/// diagnostic naming the smallest pivot when D is numerically dependent.
GramSolve solve_gram(const Eigen::MatrixXd& D, const Eigen::MatrixXd& V);

/// Reusable factorization for repeated right-hand sides (stepper hot path).
class GramSolver {
 public:
  GramSolver() = default;  // identity
  explicit GramSolver(const Eigen::MatrixXd& D, bool assume_identity = false);
  bool identity() const { return identity_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;

 private:
  bool identity_ = true;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace zakai::numerics
