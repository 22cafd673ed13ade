#include "zakai/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace zakai::config {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

double to_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    require(pos == v.size(), ErrorCode::invalid_argument,
            "config: bad number for " + key + ": '" + v + "'");
    return x;
  } catch (const Error&) {
    throw;
  } catch (...) {
    fail(ErrorCode::invalid_argument,
         "config: bad number for " + key + ": '" + v + "'");
  }
}

long long to_int(const std::string& v, const std::string& key) {
  const double x = to_double(v, key);
  require(x == std::floor(x), ErrorCode::invalid_argument,
          "config: " + key + " must be an integer");
  return (long long)(x);
}

bool to_bool(const std::string& v, const std::string& key) {
  const std::string s = lower(trim(v));
  if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "off" || s == "no") return false;
  fail(ErrorCode::invalid_argument, "config: bad boolean for " + key);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

Eigen::MatrixXd parse_matrix(const std::string& v, const std::string& key) {
  // Rows separated by ';', entries by ','.
  const auto row_texts = split(v, ';');
  std::vector<std::vector<double>> rows;
  for (const auto& rt : row_texts) {
    if (trim(rt).empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(rt, ','))
      row.push_back(to_double(trim(cell), key));
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::invalid_argument, "config: empty matrix " + key);
  const size_t cols = rows[0].size();
  for (const auto& r : rows)
    require(r.size() == cols, ErrorCode::invalid_argument,
            "config: ragged matrix " + key);
  Eigen::MatrixXd m(rows.size(), cols);
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  return m;
}

Eigen::VectorXd parse_vector(const std::string& v, const std::string& key) {
  const Eigen::MatrixXd m = parse_matrix(v, key);
  require(m.rows() == 1 || m.cols() == 1, ErrorCode::invalid_argument,
          "config: " + key + " must be a vector");
  return m.rows() == 1 ? Eigen::VectorXd(m.row(0).transpose())
                       : Eigen::VectorXd(m.col(0));
}

}  // namespace

std::string MethodSpec::label() const {
  const char* step = stepper == galerkin::StepMethod::EM ? "EM" : "SU";
  switch (kind) {
    case Kind::GAH:
      return "GAH(" + std::string(step) + ") n=" + std::to_string(n);
    case Kind::AGAH:
      return "AGAH(" + std::string(step) + ") n=" + std::to_string(n);
    case Kind::GAG:
      return "GAG(" + std::string(step) + ") n=" + std::to_string(n);
    case Kind::PF:
      return "PF N=" + std::to_string(particles);
  }
  return "?";
}

MethodSpec parse_method(const std::string& text) {
  const std::string s = lower(trim(text));
  const auto open = s.find('(');
  require(open != std::string::npos && s.back() == ')',
          ErrorCode::invalid_argument,
          "config: method must look like name(args): '" + text + "'");
  const std::string name = trim(s.substr(0, open));
  const std::string args = s.substr(open + 1, s.size() - open - 2);

  MethodSpec m;
  if (name == "gah")
    m.kind = MethodSpec::Kind::GAH;
  else if (name == "agah")
    m.kind = MethodSpec::Kind::AGAH;
  else if (name == "gag")
    m.kind = MethodSpec::Kind::GAG;
  else if (name == "pf")
    m.kind = MethodSpec::Kind::PF;
  else
    fail(ErrorCode::invalid_argument, "config: unknown method '" + name + "'");

  for (const auto& raw : split(args, ',')) {
    const std::string a = trim(raw);
    if (a.empty()) continue;
    if (a == "em") {
      m.stepper = galerkin::StepMethod::EM;
    } else if (a == "su") {
      m.stepper = galerkin::StepMethod::SU;
    } else {
      const auto eq = a.find('=');
      require(eq != std::string::npos, ErrorCode::invalid_argument,
              "config: bad method argument '" + a + "'");
      const std::string k = trim(a.substr(0, eq));
      const std::string v = trim(a.substr(eq + 1));
      if (k == "n")
        m.n = int(to_int(v, "method n"));
      else if (k == "np")
        m.particles = int(to_int(v, "method np"));
      else
        fail(ErrorCode::invalid_argument, "config: bad method key '" + k + "'");
    }
  }
  require(m.kind != MethodSpec::Kind::GAG ||
              m.stepper == galerkin::StepMethod::EM,
          ErrorCode::invalid_argument,
          "config: gag supports only the em stepper (non-orthonormal basis)");
  return m;
}

void apply_override(RunConfig& cfg, const std::string& dotted,
                    const std::string& value) {
  const auto dot = dotted.find('.');
  require(dot != std::string::npos, ErrorCode::invalid_argument,
          "config: override key must be section.key: '" + dotted + "'");
  const std::string section = lower(trim(dotted.substr(0, dot)));
  const std::string key = lower(trim(dotted.substr(dot + 1)));
  const std::string v = trim(value);

  if (section == "model") {
    if (key == "kind") {
      const std::string k = lower(v);
      require(k == "linear" || k == "linear_md", ErrorCode::invalid_argument,
              "config: model.kind must be linear or linear_md");
      cfg.model_kind = k;
    } else if (key == "b")
      cfg.linear.b = to_double(v, dotted);
    else if (key == "sigma")
      cfg.linear.sigma = to_double(v, dotted);
    else if (key == "h")
      cfg.linear.h = to_double(v, dotted);
    else if (key == "lambda")
      cfg.linear.lambda = to_double(v, dotted);
    else if (key == "mu0")
      cfg.linear.mu0 = to_double(v, dotted);
    else if (key == "var0")
      cfg.linear.var0 = to_double(v, dotted);
    else if (key == "lambda_min")
      cfg.clamp.lambda_min = to_double(v, dotted);
    else if (key == "lambda_max")
      cfg.clamp.lambda_max = to_double(v, dotted);
    else if (key == "drift")
      cfg.md.drift = parse_matrix(v, dotted);
    else if (key == "diffusion")
      cfg.md.diffusion = parse_matrix(v, dotted);
    else if (key == "obs")
      cfg.md.obs = parse_matrix(v, dotted);
    else if (key == "lambda_quad")
      cfg.md.lambda_quad = parse_vector(v, dotted);
    else if (key == "lambda0")
      cfg.md.lambda0 = to_double(v, dotted);
    else if (key == "mu0_vec")
      cfg.md.mu0 = parse_vector(v, dotted);
    else if (key == "var0_vec")
      cfg.md.var0 = parse_vector(v, dotted);
    else
      fail(ErrorCode::invalid_argument, "config: unknown key " + dotted);
  } else if (section == "time") {
    if (key == "t")
      cfg.T = to_double(v, dotted);
    else if (key == "dt")
      cfg.dt = to_double(v, dotted);
    else
      fail(ErrorCode::invalid_argument, "config: unknown key " + dotted);
  } else if (section == "filter") {
    if (key == "family") {
      const std::string f = lower(v);
      if (f == "hermite")
        cfg.family = hermite::BasisFamily::Hermite;
      else if (f == "gaussian")
        cfg.family = hermite::BasisFamily::Gaussian;
      else
        fail(ErrorCode::invalid_argument,
             "config: filter.family must be hermite or gaussian");
    } else if (key == "n")
      cfg.n = int(to_int(v, dotted));
    else if (key == "method") {
      const std::string s = lower(v);
      if (s == "em")
        cfg.method = galerkin::StepMethod::EM;
      else if (s == "su")
        cfg.method = galerkin::StepMethod::SU;
      else
        fail(ErrorCode::invalid_argument, "config: filter.method must be em or su");
    } else if (key == "adaptive")
      cfg.adaptive = to_bool(v, dotted);
    else if (key == "threshold_mu")
      cfg.aga.threshold_mu = to_double(v, dotted);
    else if (key == "threshold_sigma")
      cfg.aga.threshold_sigma = to_double(v, dotted);
    else if (key == "max_rebases")
      cfg.aga.max_rebases = int(to_int(v, dotted));
    else if (key == "projection_nodes")
      cfg.aga.projection_rule_nodes = int(to_int(v, dotted));
    else if (key == "quad_nodes")
      cfg.quad_nodes = int(to_int(v, dotted));
    else if (key == "basis_mu")
      cfg.basis_mu = to_double(v, dotted);
    else if (key == "basis_sigma")
      cfg.basis_sigma = to_double(v, dotted);
    else
      fail(ErrorCode::invalid_argument, "config: unknown key " + dotted);
  } else if (section == "pf") {
    if (key == "particles")
      cfg.particles = int(to_int(v, dotted));
    else
      fail(ErrorCode::invalid_argument, "config: unknown key " + dotted);
  } else if (section == "rng") {
    if (key == "seed")
      cfg.seed = std::uint64_t(to_int(v, dotted));
    else
      fail(ErrorCode::invalid_argument, "config: unknown key " + dotted);
  } else if (section == "bench") {
    if (key == "paths")
      cfg.paths = int(to_int(v, dotted));
    else if (key == "methods") {
      cfg.methods.clear();
      // Entries are name(args) separated by whitespace or ';'.
      std::string cur;
      int depth = 0;
      auto flush = [&]() {
        const std::string t = trim(cur);
        if (!t.empty()) cfg.methods.push_back(parse_method(t));
        cur.clear();
      };
      for (char c : v) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if ((c == ';' || std::isspace(static_cast<unsigned char>(c))) &&
            depth == 0) {
          flush();
        } else {
          cur += c;
        }
      }
      flush();
      require(!cfg.methods.empty(), ErrorCode::invalid_argument,
              "config: bench.methods is empty");
    } else if (key == "reference_particles")
      cfg.reference_particles = int(to_int(v, dotted));
    else if (key == "burn_in")
      cfg.burn_in = to_double(v, dotted);
    else
      fail(ErrorCode::invalid_argument, "config: unknown key " + dotted);
  } else if (section == "convergence") {
    if (key == "n_list") {
      cfg.n_list.clear();
      for (const auto& cell : split(v, ','))
        cfg.n_list.push_back(int(to_int(trim(cell), dotted)));
    } else
      fail(ErrorCode::invalid_argument, "config: unknown key " + dotted);
  } else if (section == "stability") {
    if (key == "dt_list") {
      cfg.dt_list.clear();
      for (const auto& cell : split(v, ','))
        cfg.dt_list.push_back(to_double(trim(cell), dotted));
    } else
      fail(ErrorCode::invalid_argument, "config: unknown key " + dotted);
  } else {
    fail(ErrorCode::invalid_argument, "config: unknown section '" + section + "'");
  }
}

RunConfig parse_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', ErrorCode::invalid_argument,
              "config: bad section header at line " + std::to_string(lineno));
      section = lower(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::invalid_argument,
            "config: expected key=value at line " + std::to_string(lineno));
    require(!section.empty(), ErrorCode::invalid_argument,
            "config: key outside any [section] at line " + std::to_string(lineno));
    apply_override(cfg, section + "." + trim(line.substr(0, eq)),
                   trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig parse_file(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::io, "config: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_text(buf.str());
}

void validate(const RunConfig& cfg) {
  require(cfg.T > 0.0 && cfg.dt > 0.0 && cfg.steps() >= 1,
          ErrorCode::invalid_argument, "config: need T > 0, dt > 0");
  require(cfg.linear.sigma > 0.0, ErrorCode::invalid_argument,
          "config: model.sigma must be > 0");
  require(cfg.linear.lambda >= 0.0, ErrorCode::invalid_argument,
          "config: model.lambda must be >= 0");
  require(cfg.linear.var0 > 0.0, ErrorCode::invalid_argument,
          "config: model.var0 must be > 0");
  require(cfg.clamp.lambda_min > 0.0 &&
              cfg.clamp.lambda_max > cfg.clamp.lambda_min,
          ErrorCode::invalid_argument, "config: bad intensity clamp bounds");
  if (cfg.family == hermite::BasisFamily::Hermite) {
    require(cfg.n >= 1 && cfg.n + 1 <= hermite::kMaxTableDegree,
            ErrorCode::invalid_argument,
            "config: filter.n must be in [1," +
                std::to_string(hermite::kMaxTableDegree - 1) + "]");
  } else {
    require(cfg.n >= 1 && cfg.n <= 60, ErrorCode::invalid_argument,
            "config: gaussian basis size capped at 60 (Gram conditioning)");
    require(cfg.method == galerkin::StepMethod::EM, ErrorCode::invalid_argument,
            "config: the su stepper requires the hermite family");
    require(!cfg.adaptive, ErrorCode::invalid_argument,
            "config: adaptive runs require the hermite family");
  }
  require(cfg.quad_nodes == 0 ||
              (cfg.quad_nodes >= 2 && cfg.quad_nodes <= 512),
          ErrorCode::invalid_argument,
          "config: filter.quad_nodes must be 0 (auto) or in [2,512]");
  require(cfg.basis_sigma > 0.0, ErrorCode::invalid_argument,
          "config: filter.basis_sigma must be > 0");
  adaptive::validate(cfg.aga);
  require(cfg.particles >= 2, ErrorCode::invalid_argument,
          "config: pf.particles must be >= 2");
  require(cfg.paths >= 1, ErrorCode::invalid_argument,
          "config: bench.paths must be >= 1");
  require(cfg.burn_in >= 0.0, ErrorCode::invalid_argument,
          "config: bench.burn_in must be >= 0");
  require(cfg.reference_particles == 0 || cfg.reference_particles >= 2,
          ErrorCode::invalid_argument,
          "config: bench.reference_particles must be 0 (off) or >= 2");
}

model::ModelSpec build_model(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.model_kind == "linear") return model::make_linear_model(cfg.linear, cfg.clamp);
  return model::make_linear_md_model(cfg.md, cfg.clamp);
}

}  // namespace zakai::config
