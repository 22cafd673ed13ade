#include "zakai/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace zakai::csv {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    require(pos == s.size(), ErrorCode::io, "csv: trailing junk in " + where);
    return v;
  } catch (const Error&) {
    throw;
  } catch (...) {
    fail(ErrorCode::io, "csv: cannot parse number '" + s + "' in " + where);
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::io, "csv: cannot open for writing: " + path);
  return f;
}

}  // namespace

void write_bundle(const std::string& path, const model::PathBundle& bundle) {
  auto f = open_out(path);
  const int d = bundle.dim_x(), l = bundle.dim_z();
  f << "t";
  for (int i = 1; i <= d; ++i) f << ",x_" << i;
  for (int i = 1; i <= l; ++i) f << ",dz_" << i;
  f << ",dn\n";
  for (int k = 0; k < int(bundle.times.size()); ++k) {
    f << format_double(bundle.times[k]);
    for (int i = 0; i < d; ++i) f << ',' << format_double(bundle.x(k, i));
    // Row k carries the increments over [t_{k-1}, t_k]; none at t_0.
    for (int i = 0; i < l; ++i)
      f << ',' << format_double(k == 0 ? 0.0 : bundle.dz(k - 1, i));
    f << ',' << (k == 0 ? 0 : bundle.dn[k - 1]) << "\n";
  }
  require(f.good(), ErrorCode::io, "csv: write failed: " + path);
}

model::PathBundle read_bundle(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::io, "csv: cannot open for reading: " + path);
  std::string line;
  require(bool(std::getline(f, line)), ErrorCode::io, "csv: empty file " + path);
  const auto header = split(line, ',');
  int d = 0, l = 0;
  require(!header.empty() && header[0] == "t" && header.back() == "dn",
          ErrorCode::io, "csv: unexpected bundle header in " + path);
  for (const auto& h : header) {
    if (h.rfind("x_", 0) == 0) ++d;
    if (h.rfind("dz_", 0) == 0) ++l;
  }
  require(d >= 1 && l >= 1 && int(header.size()) == 2 + d + l, ErrorCode::io,
          "csv: malformed bundle header in " + path);

  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    require(int(cells.size()) == 2 + d + l, ErrorCode::io,
            "csv: wrong column count in " + path);
    std::vector<double> row(cells.size());
    for (size_t i = 0; i < cells.size(); ++i)
      row[i] = parse_double(cells[i], path);
    rows.push_back(std::move(row));
  }
  require(rows.size() >= 2, ErrorCode::io,
          "csv: bundle needs at least two grid points: " + path);

  const int K = int(rows.size()) - 1;
  model::PathBundle b;
  b.times.resize(K + 1);
  b.x.resize(K + 1, d);
  b.dz.resize(K, l);
  b.dn.resize(K);
  for (int k = 0; k <= K; ++k) {
    b.times[k] = rows[k][0];
    for (int i = 0; i < d; ++i) b.x(k, i) = rows[k][1 + i];
    if (k >= 1) {
      for (int i = 0; i < l; ++i) b.dz(k - 1, i) = rows[k][1 + d + i];
      b.dn[k - 1] = int(rows[k][1 + d + l]);
      require(b.dn[k - 1] >= 0, ErrorCode::io,
              "csv: negative event count in " + path);
    }
  }
  b.dt = K >= 1 ? b.times[1] - b.times[0] : 0.0;
  for (int k = 1; k <= K; ++k)
    require(std::abs((b.times[k] - b.times[k - 1]) - b.dt) <=
                1e-9 * std::max(1.0, std::abs(b.dt)),
            ErrorCode::io, "csv: time grid is not equidistant in " + path);
  return b;
}

void write_estimates(const std::string& path,
                     const std::vector<galerkin::EstimateRow>& rows,
                     bool adaptive_columns) {
  auto f = open_out(path);
  f << "t,mean,variance,log_scale,neg_mass_fraction,rebased";
  if (adaptive_columns) f << ",mu_basis,sigma_basis";
  f << "\n";
  for (const auto& r : rows) {
    f << format_double(r.t) << ',' << format_double(r.mean) << ','
      << format_double(r.variance) << ',' << format_double(r.log_scale) << ','
      << format_double(r.neg_mass) << ',' << (r.rebased ? 1 : 0);
    if (adaptive_columns)
      f << ',' << format_double(r.mu_basis) << ','
        << format_double(r.sigma_basis);
    f << "\n";
  }
  require(f.good(), ErrorCode::io, "csv: write failed: " + path);
}

void write_estimates_md(const std::string& path,
                        const std::vector<multidim::MdEstimateRow>& rows) {
  auto f = open_out(path);
  const int d = rows.empty() ? 0 : int(rows.front().mean.size());
  f << "t";
  for (int i = 1; i <= d; ++i) f << ",mean_" << i;
  for (int i = 1; i <= d; ++i) f << ",var_" << i;
  f << ",log_scale,rebased\n";
  for (const auto& r : rows) {
    f << format_double(r.t);
    for (int i = 0; i < d; ++i) f << ',' << format_double(r.mean(i));
    for (int i = 0; i < d; ++i) f << ',' << format_double(r.variance(i));
    f << ',' << format_double(r.log_scale) << ',' << (r.rebased ? 1 : 0) << "\n";
  }
  require(f.good(), ErrorCode::io, "csv: write failed: " + path);
}

}  // namespace zakai::csv
