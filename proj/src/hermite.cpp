#include "zakai/hermite.hpp"

#include <cmath>
#include <string>

namespace zakai::hermite {

namespace {
constexpr double kPi = 3.14159265358979323846;
const double kInvTwoPiQuarter = std::pow(2.0 * kPi, -0.25);  // (2pi)^{-1/4}
}  // namespace

HermiteCoeffTable build_coeff_table(int max_degree) {
  require(max_degree >= 0, ErrorCode::invalid_argument,
          "build_coeff_table: max_degree must be >= 0");
  require(max_degree <= kMaxTableDegree, ErrorCode::invalid_argument,
          "build_coeff_table: max_degree " + std::to_string(max_degree) +
              " exceeds the exact-arithmetic cap " +
              std::to_string(kMaxTableDegree));

  HermiteCoeffTable t;
  t.max_degree = max_degree;
  t.theta.resize(max_degree + 1);
  t.iota.resize(max_degree + 1);

  // theta by the three-term recurrence f_{i+1} = x f_i - i f_{i-1}.
  t.theta[0] = {BigInt(1)};
  if (max_degree >= 1) t.theta[1] = {BigInt(0), BigInt(1)};
  for (int i = 1; i < max_degree; ++i) {
    std::vector<BigInt> next(i + 2, BigInt(0));
    for (int k = 0; k <= i; ++k) next[k + 1] += t.theta[i][k];
    for (int k = 0; k < i; ++k) next[k] -= BigInt(i) * t.theta[i - 1][k];
    t.theta[i + 1] = std::move(next);
  }

  // iota by back-substitution: the f_k are monic, so peeling the leading
  // coefficient from x^m downwards stays in the integers.
  for (int m = 0; m <= max_degree; ++m) {
    std::vector<BigInt> c(m + 1, BigInt(0));
    c[m] = 1;
    std::vector<BigInt> row(m + 1, BigInt(0));
    for (int k = m; k >= 0; --k) {
      row[k] = c[k];
      if (row[k] != 0)
        for (int r = 0; r <= k; ++r) c[r] -= row[k] * t.theta[k][r];
    }
    t.iota[m] = std::move(row);
  }

  t.theta_d.resize(max_degree + 1);
  t.iota_d.resize(max_degree + 1);
  for (int i = 0; i <= max_degree; ++i) {
    t.theta_d[i].resize(i + 1);
    t.iota_d[i].resize(i + 1);
    for (int k = 0; k <= i; ++k) {
      t.theta_d[i][k] = t.theta[i][k].convert_to<double>();
      t.iota_d[i][k] = t.iota[i][k].convert_to<double>();
    }
  }

  t.factorial.resize(max_degree + 1);
  BigInt f = 1;
  t.factorial[0] = 1.0;
  for (int i = 1; i <= max_degree; ++i) {
    f *= i;
    t.factorial[i] = f.convert_to<double>();
  }
  return t;
}

void validate(const BasisSpec& spec) {
  require(spec.n >= 1, ErrorCode::invalid_argument, "basis: n must be >= 1");
  require(spec.sigma_basis > 0.0, ErrorCode::invalid_argument,
          "basis: sigma_basis must be > 0");
}

double gaussian_width(const BasisSpec& spec) {
  if (spec.n == 1) return spec.sigma_basis;
  return 8.0 * spec.sigma_basis / (spec.n - 1);
}

double gaussian_center(const BasisSpec& spec, int i) {
  if (spec.n == 1) return spec.mu_basis;
  return spec.mu_basis - 4.0 * spec.sigma_basis + (i - 1) * gaussian_width(spec);
}

namespace {

// e_1..e_count at y (unadapted), by the value recurrence
// e_{i+1}(y) = (y e_i(y) - sqrt(i-1) e_{i-1}(y)) / sqrt(i), e_0 := 0.
// Stable for all degrees used here; avoids factorials entirely.
void hermite_values(int count, double y, double* out) {
  double prev = 0.0;
  double cur = kInvTwoPiQuarter * std::exp(-0.25 * y * y);  // e_1
  for (int i = 1; i <= count; ++i) {
    out[i - 1] = cur;
    double next = (y * cur - std::sqrt(double(i - 1)) * prev) / std::sqrt(double(i));
    prev = cur;
    cur = next;
  }
}

}  // namespace

void basis_eval_all(const BasisSpec& spec, int count, double x, double* out) {
  if (spec.family == BasisFamily::Hermite) {
    const double y = (x - spec.mu_basis) / spec.sigma_basis;
    hermite_values(count, y, out);
    const double s = 1.0 / std::sqrt(spec.sigma_basis);
    for (int i = 0; i < count; ++i) out[i] *= s;
  } else {
    const double w = gaussian_width(spec);
    const double norm = 1.0 / (w * std::sqrt(2.0 * kPi));
    for (int i = 1; i <= count; ++i) {
      const double z = (x - gaussian_center(spec, i)) / w;
      out[i - 1] = norm * std::exp(-0.5 * z * z);
    }
  }
}

double basis_eval(const BasisSpec& spec, int i, double x) {
  validate(spec);
  require(i >= 1 && i <= spec.n, ErrorCode::invalid_argument,
          "basis_eval: index " + std::to_string(i) + " out of range [1," +
              std::to_string(spec.n) + "]");
  std::vector<double> vals(i);
  basis_eval_all(spec, i, x, vals.data());
  return vals[i - 1];
}

double moment_weight(const HermiteCoeffTable& table, int j, int i) {
  require(j >= 0 && i >= 1, ErrorCode::invalid_argument,
          "moment_weight: need j >= 0, i >= 1");
  require(i - 1 + j <= table.max_degree, ErrorCode::invalid_argument,
          "moment_weight: degree " + std::to_string(i - 1 + j) +
              " exceeds table max_degree " + std::to_string(table.max_degree));

  // Parity: theta[i-1][k] = 0 unless k = i-1 (mod 2), iota[k+j][0] = 0 unless
  // k+j even, so an odd integrand yields an exact zero.
  if ((i - 1 + j) % 2 != 0) return 0.0;

  // Keep the sum exact as long as possible: split over the parity of k so the
  // 2^{k/2} factor stays integral, with a single sqrt(2) applied at the end.
  BigInt even_sum = 0, odd_sum = 0;
  for (int k = 0; k <= i - 1; ++k) {
    const BigInt& th = table.theta[i - 1][k];
    if (th == 0) continue;
    const BigInt& io = table.iota[k + j][0];
    if (io == 0) continue;
    if (k % 2 == 0)
      even_sum += th * io * (BigInt(1) << (k / 2));
    else
      odd_sum += th * io * (BigInt(1) << ((k - 1) / 2));
  }
  const double sum = even_sum.convert_to<double>() +
                     std::sqrt(2.0) * odd_sum.convert_to<double>();
  const double pref = std::sqrt(2.0) * std::exp2(0.5 * j) /
                      (kInvTwoPiQuarter * std::sqrt(table.factorial[i - 1]));
  return pref * sum;
}

std::vector<double> project_gaussian(const HermiteCoeffTable& table, double mu0,
                                     double var0, int n) {
  require(var0 > 0.0, ErrorCode::invalid_argument,
          "project_gaussian: var0 must be > 0");
  require(n >= 1 && n - 1 <= table.max_degree, ErrorCode::invalid_argument,
          "project_gaussian: n out of range for this table");

  // (q0, e_j) = (2pi)^{-1/4} / (sigma0 sqrt((j-1)!)) int exp(-(x-mu0)^2/(2 var0)
  //             - x^2/4) f_{j-1}(x) dx.  Completing the square,
  //   (x-mu0)^2/(2 var0) + x^2/4 = (x-a)^2/(2 b^2) - d
  // with 1/(2b^2) = (2+var0)/(4 var0), a/b^2 = mu0/var0, hence
  //   b = sqrt(2 var0/(2+var0)),  a = 2 mu0/(2+var0),
  //   d = a^2/(2b^2) - mu0^2/(2 var0) = -mu0^2 / (2 (2+var0)).
  // Substituting x = a + b u then gives
  //   (q0, e_j) = (2pi)^{-1/4} e^d b / (sigma0 sqrt((j-1)!)) * A0(j-1, a, b),
  //   A0(m,a,b) = int phi(u) f_m(a + b u) du
  //             = sum_{r=0}^{m} sum_{k=r}^{m} theta[m][k] C(k,r) a^{k-r} b^r iota[r][0],
  // since expanding f_m(a+bu) in powers of u and re-expanding each power in
  // the f_r picks out the f_0 coefficient under the phi-integral.
  const double a = 2.0 * mu0 / (2.0 + var0);
  const double b = std::sqrt(2.0 * var0 / (2.0 + var0));
  const double d = -mu0 * mu0 / (2.0 * (2.0 + var0));
  const double sigma0 = std::sqrt(var0);

  // Pascal triangle up to n-1 (exact in double for the degrees allowed here).
  std::vector<std::vector<double>> binom(n);
  for (int k = 0; k < n; ++k) {
    binom[k].resize(k + 1);
    binom[k][0] = binom[k][k] = 1.0;
    for (int r = 1; r < k; ++r) binom[k][r] = binom[k - 1][r - 1] + binom[k - 1][r];
  }

  std::vector<double> out(n);
  for (int j = 1; j <= n; ++j) {
    const int m = j - 1;
    double a0 = 0.0;
    for (int r = 0; r <= m; ++r) {
      const double iota_r0 = table.iota_d[r][0];
      if (iota_r0 == 0.0) continue;
      double inner = 0.0;
      for (int k = r; k <= m; ++k) {
        const double th = table.theta_d[m][k];
        if (th == 0.0) continue;
        inner += th * binom[k][r] * std::pow(a, double(k - r));
      }
      a0 += inner * std::pow(b, double(r)) * iota_r0;
    }
    out[j - 1] = kInvTwoPiQuarter * std::exp(d) * b /
                 (sigma0 * std::sqrt(table.factorial[m])) * a0;
  }
  return out;
}

}  // namespace zakai::hermite
