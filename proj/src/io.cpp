#include "fracsmp/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace fracsmp::io {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(Errc::IoError, "cannot create output directory '" + dir.string() + "'" +
                                   (ec ? ": " + ec.message() : std::string()));
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string matrix_csv(const MatrixX<double>& m) {
  std::string out = "n,k,value\n";
  for (Eigen::Index n = 0; n < m.rows(); ++n) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      if (m(n, k) == 0.0) continue;
      out += std::to_string(n) + "," + std::to_string(k) + "," + format_double(m(n, k)) + "\n";
    }
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) parts.push_back(cur);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& field, int line) {
  const std::string t = trim(field);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    std::ostringstream os;
    os << "line " << line << ": '" << t << "' is not a number";
    throw Error(Errc::ConfigError, os.str());
  }
  return v;
}

std::vector<std::string> nonblank_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(trim(line));
  return lines;
}

}  // namespace

MatrixX<double> parse_matrix_csv(const std::string& text) {
  const auto lines = nonblank_lines(text);
  std::size_t first = 0;
  while (first < lines.size() && lines[first].empty()) ++first;
  if (first == lines.size()) throw Error(Errc::ConfigError, "covariance file is empty");

  if (lines[first] == "n,k,value") {
    std::vector<std::tuple<long, long, double>> entries;
    long size = 0;
    for (std::size_t i = first + 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto f = split(lines[i], ',');
      if (f.size() != 3) throw Error(Errc::ConfigError, "line " + std::to_string(i + 1) + ": expected n,k,value");
      const double n = parse_number(f[0], int(i + 1)), k = parse_number(f[1], int(i + 1));
      if (n < 0 || k < 0 || n != std::floor(n) || k != std::floor(k)) {
        throw Error(Errc::ConfigError, "line " + std::to_string(i + 1) + ": indices must be non-negative integers");
      }
      entries.emplace_back(long(n), long(k), parse_number(f[2], int(i + 1)));
      size = std::max({size, long(n) + 1, long(k) + 1});
    }
    MatrixX<double> m = MatrixX<double>::Zero(size, size);
    for (const auto& [n, k, v] : entries) m(n, k) = v;
    return m;
  }

  std::vector<std::vector<double>> rows;
  for (std::size_t i = first; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<double> row;
    for (const auto& f : split(lines[i], ',')) row.push_back(parse_number(f, int(i + 1)));
    rows.push_back(std::move(row));
  }
  MatrixX<double> m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw Error(Errc::ConfigError, "ragged covariance rows");
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

std::string lattice_paths_csv(const Lattice& lat) {
  std::string out = "path_index,stage,eta,xi,probability\n";
  const int depth = lat.depth();
  const auto& prob = lat.probabilities(depth);
  for (Eigen::Index p = 0; p < prob.size(); ++p) {
    for (int n = 0; n < depth; ++n) {
      const auto node = Eigen::Index(std::size_t(p) / ipow(lat.order(), depth - n - 1));
      out += std::to_string(p) + "," + std::to_string(n) + "," + format_double(lat.white_value(n)[node]) + "," +
             format_double(lat.noise_value(n)[node]) + "," + format_double(prob(p)) + "\n";
    }
  }
  return out;
}

std::string process_csv(const std::vector<Adapted>& stages, const Lattice& lat) {
  std::string out = "stage,node_index,value,probability\n";
  for (std::size_t n = 0; n < stages.size(); ++n) {
    const auto& v = stages[n];
    const auto& prob = lat.probabilities(v.level());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      out += std::to_string(n) + "," + std::to_string(i) + "," + format_double(v[i]) + "," + format_double(prob(i)) + "\n";
    }
  }
  return out;
}

ControlProcess parse_control_csv(const std::string& text, const Lattice& lat, int horizon) {
  const auto lines = nonblank_lines(text);
  if (lines.empty() || lines[0].rfind("stage,node_index,value", 0) != 0) {
    throw Error(Errc::ConfigError, "control CSV must start with 'stage,node_index,value'");
  }
  ControlProcess u;
  std::vector<std::vector<bool>> seen;
  for (int n = 0; n < horizon; ++n) {
    u.stages.push_back(Adapted::constant(lat.order(), 0.0, n));
    seen.emplace_back(std::size_t(u.stages.back().size()), false);
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() < 3) throw Error(Errc::ConfigError, "line " + std::to_string(i + 1) + ": expected stage,node_index,value");
    const double stage = parse_number(f[0], int(i + 1));
    const double node = parse_number(f[1], int(i + 1));
    if (stage < 0 || stage >= horizon || stage != std::floor(stage)) {
      throw Error(Errc::ConfigError, "line " + std::to_string(i + 1) + ": stage out of range");
    }
    const auto& st = u.stages[std::size_t(stage)];
    if (node < 0 || node >= double(st.size()) || node != std::floor(node)) {
      throw Error(Errc::ConfigError, "line " + std::to_string(i + 1) + ": node_index out of range");
    }
    u.stages[std::size_t(stage)][Eigen::Index(node)] = parse_number(f[2], int(i + 1));
    seen[std::size_t(stage)][std::size_t(node)] = true;
  }
  for (int n = 0; n < horizon; ++n)
    for (bool s : seen[n])
      if (!s) throw Error(Errc::ConfigError, "control CSV misses nodes of stage " + std::to_string(n));
  return u;
}

std::string bsde_csv(const BsdeSolution& sol, const Lattice& lat) {
  std::string out = "stage,node_index,Y,Z,R_mean_check,R_eta_check\n";
  const int N = static_cast<int>(sol.Z.size());
  for (int n = 0; n <= N; ++n) {
    const Adapted& y = sol.Y[n];
    if (n < N) {
      const auto checks = residual_checks(sol, n, lat);
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        out += std::to_string(n) + "," + std::to_string(i) + "," + format_double(y[i]) + "," +
               format_double(sol.Z[n][i]) + "," + format_double(checks.mean[i]) + "," + format_double(checks.eta[i]) + "\n";
      }
    } else {
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        out += std::to_string(n) + "," + std::to_string(i) + "," + format_double(y[i]) + ",0,0,0\n";
      }
    }
  }
  return out;
}

std::string stationarity_csv(const StationarityReport& rep) {
  std::string out = "stage,node_index,rho,u_star,classification,violation\n";
  for (const auto& e : rep.entries) {
    out += std::to_string(e.stage) + "," + std::to_string(e.node) + "," + format_double(e.rho) + "," +
           format_double(e.control) + "," + (e.pass ? "pass" : "fail") + "," + format_double(e.violation) + "\n";
  }
  return out;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "iter,J,step,worst_residual\n";
  for (const auto& r : trace) {
    out += std::to_string(r.iter) + "," + format_double(r.cost) + "," + format_double(r.step) + "," +
           format_double(r.worst_residual) + "\n";
  }
  return out;
}

Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    const std::size_t offset = e.byte == 0 ? 0 : std::min<std::size_t>(e.byte - 1, text.size());
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < offset; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::ostringstream os;
    os << source << ":" << line << ":" << column << ": malformed JSON (" << e.what() << ")";
    throw Error(Errc::ConfigError, os.str());
  }
}

namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& context) {
  if (!j.is_object()) throw Error(Errc::ConfigError, context + " must be a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw Error(Errc::ConfigError, context + ": unknown key '" + key + "'");
  }
}

const Json& require(const Json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) throw Error(Errc::ConfigError, context + ": missing key '" + key + "'");
  return j.at(key);
}

double number(const Json& v, const std::string& what) {
  if (!v.is_number()) throw Error(Errc::ConfigError, what + " must be a number");
  return v.get<double>();
}

long integer(const Json& v, const std::string& what) {
  if (!v.is_number_integer()) throw Error(Errc::ConfigError, what + " must be an integer");
  return v.get<long>();
}

std::vector<double> numbers(const Json& v, const std::string& what) {
  if (!v.is_array()) throw Error(Errc::ConfigError, what + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(number(e, what + " entry"));
  return out;
}

std::vector<double> sized(const Json& j, const char* key, std::size_t size, const std::string& context, bool exact) {
  if (!j.contains(key)) return std::vector<double>(size, 0.0);
  auto v = numbers(j.at(key), context + "." + key);
  if (exact ? v.size() != size : v.size() > size) {
    std::ostringstream os;
    os << context << "." << key << " has " << v.size() << " entries, expected " << (exact ? "" : "at most ") << size;
    throw Error(Errc::ConfigError, os.str());
  }
  v.resize(size, 0.0);
  return v;
}

void read_run_settings(const Json& j, RunSettings& run, const std::string& context) {
  if (j.contains("hurst")) run.hurst = number(j.at("hurst"), context + ".hurst");
  if (!(run.hurst > 0.0 && run.hurst < 1.0)) throw Error(Errc::ConfigError, context + ".hurst must lie in (0,1)");
  if (j.contains("quadrature_order")) run.quadrature_order = int(integer(j.at("quadrature_order"), context + ".quadrature_order"));
  if (j.contains("seed")) {
    const auto& s = j.at("seed");
    if (!s.is_number_unsigned()) throw Error(Errc::ConfigError, context + ".seed must be a non-negative integer");
    run.seed = s.get<std::uint64_t>();
  }
}

int horizon_of(const Json& j, const std::string& context) {
  const long n = integer(require(j, "horizon", context), context + ".horizon");
  if (n < 1 || n > 64) throw Error(Errc::ConfigError, context + ".horizon must be in [1,64]");
  return int(n);
}

}  // namespace

ModelConfig parse_model_config(const Json& j) {
  const std::string ctx = "config";
  reject_unknown(j, {"horizon", "initial_state", "model", "control_set", "hurst", "quadrature_order", "seed",
                     "tolerance", "max_iter"},
                 ctx);
  ModelConfig cfg;
  const int N = horizon_of(j, ctx);
  const double x0 = number(require(j, "initial_state", ctx), ctx + ".initial_state");
  read_run_settings(j, cfg.run, ctx);

  ControlSet set = ControlSet::unconstrained();
  if (j.contains("control_set")) {
    const auto& cs = j.at("control_set");
    if (cs.is_string() && cs.get<std::string>() == "unconstrained") {
    } else if (cs.is_object()) {
      reject_unknown(cs, {"box"}, ctx + ".control_set");
      const auto box = numbers(require(cs, "box", ctx + ".control_set"), ctx + ".control_set.box");
      if (box.size() != 2 || !(box[0] <= box[1])) throw Error(Errc::ConfigError, "control_set.box must be [lo, hi] with lo <= hi");
      set = ControlSet::box(box[0], box[1]);
    } else {
      throw Error(Errc::ConfigError, "control_set must be \"unconstrained\" or {\"box\":[lo,hi]}");
    }
  }

  const auto& m = require(j, "model", ctx);
  if (!m.is_object() || !m.contains("type") || !m.at("type").is_string()) {
    throw Error(Errc::ConfigError, "config.model must be an object with a string 'type'");
  }
  const std::string type = m.at("type").get<std::string>();
  if (type == "lq") {
    reject_unknown(m, {"type", "A", "B", "C", "D", "Q", "R", "G"}, ctx + ".model");
    LqSpec spec;
    spec.horizon = N;
    spec.x = x0;
    const auto n = std::size_t(N);
    spec.A = sized(m, "A", n, ctx + ".model", true);
    spec.B = sized(m, "B", n, ctx + ".model", true);
    spec.C = sized(m, "C", n, ctx + ".model", true);
    spec.D = sized(m, "D", n, ctx + ".model", true);
    spec.Q = sized(m, "Q", n, ctx + ".model", true);
    spec.R = numbers(require(m, "R", ctx + ".model"), ctx + ".model.R");
    spec.G = number(require(m, "G", ctx + ".model"), ctx + ".model.G");
    cfg.model = lq_model(spec);
    cfg.lq = spec;
  } else if (type == "sin_drift") {
    reject_unknown(m, {"type", "c"}, ctx + ".model");
    const double c = m.contains("c") ? number(m.at("c"), ctx + ".model.c") : 0.5;
    cfg.model = sin_drift_model(N, x0, c);
  } else {
    throw Error(Errc::ConfigError, "unknown model type '" + type + "' (expected lq or sin_drift)");
  }
  cfg.model.control_set = set;
  if (j.contains("tolerance")) cfg.optimizer.tolerance = number(j.at("tolerance"), ctx + ".tolerance");
  if (j.contains("max_iter")) cfg.optimizer.max_iter = int(integer(j.at("max_iter"), ctx + ".max_iter"));
  return cfg;
}

LqConfig parse_lq_config(const Json& j) {
  const std::string ctx = "config";
  reject_unknown(j, {"horizon", "A", "B", "C", "D", "Q", "R", "G", "x", "hurst", "quadrature_order", "seed", "damping",
                     "tolerance", "max_iter", "trials", "starts"},
                 ctx);
  LqConfig cfg;
  auto& s = cfg.spec;
  s.horizon = horizon_of(j, ctx);
  const auto n = std::size_t(s.horizon);
  s.A = sized(j, "A", n, ctx, true);
  s.B = sized(j, "B", n, ctx, true);
  s.C = sized(j, "C", n, ctx, true);
  s.D = sized(j, "D", n, ctx, true);
  s.Q = sized(j, "Q", n, ctx, true);
  s.R = numbers(require(j, "R", ctx), ctx + ".R");
  s.G = number(require(j, "G", ctx), ctx + ".G");
  s.x = number(require(j, "x", ctx), ctx + ".x");
  read_run_settings(j, cfg.run, ctx);
  if (j.contains("damping")) cfg.options.damping = number(j.at("damping"), ctx + ".damping");
  if (j.contains("tolerance")) cfg.options.tolerance = number(j.at("tolerance"), ctx + ".tolerance");
  if (j.contains("max_iter")) cfg.options.max_iter = int(integer(j.at("max_iter"), ctx + ".max_iter"));
  if (j.contains("trials")) cfg.trials = int(integer(j.at("trials"), ctx + ".trials"));
  if (j.contains("starts")) cfg.starts = int(integer(j.at("starts"), ctx + ".starts"));
  if (cfg.starts < 2) throw Error(Errc::ConfigError, "config.starts must be >= 2");
  if (cfg.trials < 0) throw Error(Errc::ConfigError, "config.trials must be >= 0");
  s.validate();
  return cfg;
}

bool LinearCoefficients::zero_at(int n) const {
  const auto i = std::size_t(n - 1);
  return y[i] == 0.0 && z[i] == 0.0 && c[i] == 0.0;
}

BsdeConfig parse_bsde_config(const Json& j) {
  const std::string ctx = "config";
  reject_unknown(j, {"horizon", "hurst", "quadrature_order", "seed", "terminal", "f", "g"}, ctx);
  BsdeConfig cfg;
  cfg.horizon = horizon_of(j, ctx);
  read_run_settings(j, cfg.run, ctx);
  const auto n = std::size_t(cfg.horizon);
  const Json empty = Json::object();

  const Json& t = j.contains("terminal") ? j.at("terminal") : empty;
  reject_unknown(t, {"constant", "xi", "eta", "xi_sq"}, ctx + ".terminal");
  cfg.constant = t.contains("constant") ? number(t.at("constant"), ctx + ".terminal.constant") : 0.0;
  cfg.xi = sized(t, "xi", n, ctx + ".terminal", false);
  cfg.eta = sized(t, "eta", n, ctx + ".terminal", false);
  cfg.xi_sq = sized(t, "xi_sq", n, ctx + ".terminal", false);

  for (const char* name : {"f", "g"}) {
    const Json& d = j.contains(name) ? j.at(name) : empty;
    const std::string dctx = ctx + "." + name;
    reject_unknown(d, {"y", "z", "const"}, dctx);
    LinearCoefficients lc{sized(d, "y", n, dctx, true), sized(d, "z", n, dctx, true), sized(d, "const", n, dctx, true)};
    (std::string(name) == "f" ? cfg.f : cfg.g) = std::move(lc);
  }
  return cfg;
}

Lattice bsde_lattice(const BsdeConfig& cfg) {
  const int depth = cfg.g.zero_at(cfg.horizon) ? cfg.horizon : cfg.horizon + 1;
  const auto basis = whiten(fgn_covariance(HurstParameter(cfg.run.hurst), depth));
  return Lattice(depth, gauss_hermite(cfg.run.quadrature_order), basis);
}

DriverSpec make_driver(const BsdeConfig& cfg, const Lattice& lat) {
  const int N = cfg.horizon;
  DriverSpec d;
  d.horizon = N;
  Adapted y = lat.constant(cfg.constant, N);
  for (int k = 0; k < N; ++k) {
    const Adapted& xi = lat.noise_value(k);
    y = y + cfg.xi[k] * xi + cfg.eta[k] * lat.white_value(k) + cfg.xi_sq[k] * (xi * xi);
  }
  d.terminal = y;
  auto linear = [](LinearCoefficients lc) {
    return [lc = std::move(lc)](int n, std::size_t, double yv, double zv) {
      const auto i = std::size_t(n - 1);
      return lc.y[i] * yv + lc.z[i] * zv + lc.c[i];
    };
  };
  d.f = linear(cfg.f);
  d.g = linear(cfg.g);
  d.terminal_noise_free = cfg.g.zero_at(N);
  return d;
}

}  // namespace fracsmp::io
