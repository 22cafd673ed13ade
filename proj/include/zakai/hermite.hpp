#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <vector>

#include "zakai/errors.hpp"

namespace zakai::hermite {

using BigInt = boost::multiprecision::cpp_int;

/// Exact coefficient tables for the probabilists' Hermite polynomials
/// f_0 = 1, f_1 = x, f_{i+1}(x) = x f_i(x) - i f_{i-1}(x).
///
/// theta[i][k]: f_i(x) = sum_k theta[i][k] x^k
/// iota[i][k]:  x^i    = sum_k iota[i][k]  f_k(x)   (all entries >= 0)
///
/// Rows are built in exact integer arithmetic and converted to double once;
/// iota[m][0] equals the m-th standard normal moment (m-1)!! for even m.
struct HermiteCoeffTable {
  int max_degree = 0;
  std::vector<std::vector<BigInt>> theta;
  std::vector<std::vector<BigInt>> iota;
  std::vector<std::vector<double>> theta_d;
  std::vector<std::vector<double>> iota_d;
  std::vector<double> factorial;  // 0! .. max_degree!
};

/// Entries above this degree are not exactly convertible in a way that keeps
/// the downstream moment formulas at full double accuracy; higher degrees are
/// rejected rather than silently degraded.
inline constexpr int kMaxTableDegree = 40;

HermiteCoeffTable build_coeff_table(int max_degree);

enum class BasisFamily { Hermite, Gaussian };

/// Location/scale family of L2(R) bases.
///
/// Hermite: e_i^{mu,sigma}(x) = sigma^{-1/2} e_i((x-mu)/sigma) with
///   e_i(y) = sqrt(phi(y)/(i-1)!) f_{i-1}(y), phi the standard normal
///   density; orthonormal for every (mu, sigma).
/// Gaussian: n normal densities with centers equispaced on
///   [mu-4sigma, mu+4sigma] and common width equal to the spacing
///   (linearly independent, not orthogonal).
struct BasisSpec {
  BasisFamily family = BasisFamily::Hermite;
  int n = 1;
  double mu_basis = 0.0;
  double sigma_basis = 1.0;
};

void validate(const BasisSpec& spec);

/// Center/width of the i-th Gaussian bump (1-based i).
double gaussian_center(const BasisSpec& spec, int i);
double gaussian_width(const BasisSpec& spec);

/// e_i^{mu,sigma}(x), 1 <= i <= spec.n.
double basis_eval(const BasisSpec& spec, int i, double x);

/// Evaluates e_1..e_count at x into out (out must hold count doubles).
/// count may exceed spec.n (the family extends naturally); used by the
/// assembly code which needs degrees up to n+2.
void basis_eval_all(const BasisSpec& spec, int count, double x, double* out);

/// Moment weight (x^j, e_i) of the unadapted Hermite basis,
///   (x^j, e_i) = sqrt(2) 2^{j/2} (2pi)^{1/4} / sqrt((i-1)!)
///                * sum_k theta[i-1][k] 2^{k/2} iota[k+j][0].
/// The 2^{j/2} factor comes from the substitution x = sqrt(2) u that maps the
/// half-width Gaussian kernel of e_i onto phi; without it the identity fails
/// direct integration for every odd j (regression-pinned in the tests).
double moment_weight(const HermiteCoeffTable& table, int j, int i);

/// Projection ((q0,e_1),...,(q0,e_n)) of the N(mu0, var0) density onto the
/// unadapted Hermite basis, in closed form.
std::vector<double> project_gaussian(const HermiteCoeffTable& table, double mu0,
                                     double var0, int n);

}  // namespace zakai::hermite
