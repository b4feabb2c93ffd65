#include "fracsmp/dynamics.hpp"

#include <cmath>
#include <sstream>

namespace fracsmp {

ControlSet ControlSet::box(double lo, double hi) {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    std::ostringstream os;
    os << "invalid box [" << lo << "," << hi << "]";
    throw Error(Errc::InvalidArgument, os.str());
  }
  ControlSet s;
  s.box_ = true;
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

namespace {

void check_derivative(const char* name, double analytic, double fd, int n, double x, double u) {
  if (std::abs(analytic - fd) > 1e-5 * std::max(1.0, std::abs(analytic))) {
    std::ostringstream os;
    os << name << " at (n=" << n << ", x=" << x << ", u=" << u << ") is " << analytic
       << " but central differences give " << fd;
    throw Error(Errc::DerivativeMismatch, os.str());
  }
}

void require_finite(const Adapted& v, const char* what, int n) {
  if (!v.all_finite()) {
    std::ostringstream os;
    os << what << " at stage " << n << " is not finite";
    throw Error(Errc::NonFiniteValue, os.str());
  }
}

void require_control_levels(const ControlProcess& u, int horizon, const Lattice& lat) {
  if (u.horizon() != horizon) {
    std::ostringstream os;
    os << "control has " << u.horizon() << " stages, model horizon is " << horizon;
    throw Error(Errc::DepthMismatch, os.str());
  }
  if (lat.depth() < horizon) {
    std::ostringstream os;
    os << "lattice depth " << lat.depth() << " is below the horizon " << horizon;
    throw Error(Errc::DepthMismatch, os.str());
  }
  for (int n = 0; n < horizon; ++n) {
    if (u.stages[n].level() != n || u.stages[n].order() != lat.order()) {
      std::ostringstream os;
      os << "control stage " << n << " is at level " << u.stages[n].level();
      throw Error(Errc::LevelMismatch, os.str());
    }
  }
}

}  // namespace

void validate_model(const ModelSpec& m, std::uint64_t seed) {
  if (m.horizon < 1) throw Error(Errc::InvalidSpec, "model horizon must be >= 1");
  const ModelSpec::StageFn* stage_fns[] = {&m.drift,       &m.diffusion,   &m.running_cost,
                                           &m.drift_x,     &m.drift_u,     &m.diffusion_x,
                                           &m.diffusion_u, &m.running_cost_x, &m.running_cost_u};
  for (const auto* f : stage_fns)
    if (!*f) throw Error(Errc::InvalidSpec, "model '" + m.name + "' is missing a coefficient callable");
  if (!m.terminal_cost || !m.terminal_cost_x) throw Error(Errc::InvalidSpec, "model is missing Phi or Phi_x");

  check_terminal_condition(m, seed);

  SplitMix64 rng(seed);
  const int N = m.horizon;
  for (int i = 0; i < 16; ++i) {
    const double x = rng.uniform(-2.0, 2.0);
    const double u = m.control_set.is_box() ? rng.uniform(m.control_set.lower(), m.control_set.upper())
                                            : rng.uniform(-2.0, 2.0);
    const int n = static_cast<int>(rng.next() % std::uint64_t(N));
    const double hx = 1e-6 * std::max(1.0, std::abs(x));
    const double hu = 1e-6 * std::max(1.0, std::abs(u));
    auto dx = [&](const ModelSpec::StageFn& f) { return (f(n, x + hx, u) - f(n, x - hx, u)) / (2 * hx); };
    auto du = [&](const ModelSpec::StageFn& f) { return (f(n, x, u + hu) - f(n, x, u - hu)) / (2 * hu); };
    check_derivative("b_x", m.drift_x(n, x, u), dx(m.drift), n, x, u);
    check_derivative("b_u", m.drift_u(n, x, u), du(m.drift), n, x, u);
    check_derivative("sigma_x", m.diffusion_x(n, x, u), dx(m.diffusion), n, x, u);
    check_derivative("sigma_u", m.diffusion_u(n, x, u), du(m.diffusion), n, x, u);
    check_derivative("l_x", m.running_cost_x(n, x, u), dx(m.running_cost), n, x, u);
    check_derivative("l_u", m.running_cost_u(n, x, u), du(m.running_cost), n, x, u);
    const double phi_fd = (m.terminal_cost(x + hx) - m.terminal_cost(x - hx)) / (2 * hx);
    check_derivative("Phi_x", m.terminal_cost_x(x), phi_fd, N, x, u);
  }
}

void check_terminal_condition(const ModelSpec& m, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const int N = m.horizon;
  const ModelSpec::StageFn* fns[] = {&m.drift, &m.diffusion, &m.running_cost,
                                     &m.drift_x, &m.diffusion_x, &m.running_cost_x};
  for (int i = 0; i < 16; ++i) {
    const double x = rng.uniform(-2.0, 2.0);
    const double u = m.control_set.is_box() ? rng.uniform(m.control_set.lower(), m.control_set.upper())
                                            : rng.uniform(-2.0, 2.0);
    for (const auto* f : fns) {
      const double t = (*f)(N, x, u);
      if (std::abs(t) > 1e-14) {
        std::ostringstream os;
        os << "coefficients at stage N=" << N << " must vanish; got " << t << " at (x=" << x << ", u=" << u << ")";
        throw Error(Errc::TerminalConditionViolated, os.str());
      }
    }
  }
}

ControlProcess ControlProcess::constant(const Lattice& lat, int horizon, double value) {
  ControlProcess u;
  u.stages.reserve(horizon);
  for (int n = 0; n < horizon; ++n) u.stages.push_back(Adapted::constant(lat.order(), value, n));
  return u;
}

ControlProcess make_control(std::vector<Adapted> stages) {
  ControlProcess u;
  u.stages.reserve(stages.size());
  for (std::size_t n = 0; n < stages.size(); ++n) u.stages.push_back(stages[n].lifted(static_cast<int>(n)));
  return u;
}

ControlProcess random_control(const Lattice& lat, int horizon, double lo, double hi, std::uint64_t seed) {
  SplitMix64 rng(seed);
  ControlProcess u;
  for (int n = 0; n < horizon; ++n) {
    VectorX<double> vals(Eigen::Index(ipow(lat.order(), n)));
    for (Eigen::Index i = 0; i < vals.size(); ++i) vals(i) = rng.uniform(lo, hi);
    u.stages.emplace_back(lat.order(), n, std::move(vals));
  }
  return u;
}

namespace {

template <typename Op>
ControlProcess zip(const ControlProcess& u, const ControlProcess& v, Op op) {
  if (u.horizon() != v.horizon()) throw Error(Errc::DepthMismatch, "controls have different horizons");
  ControlProcess out;
  out.stages.reserve(u.stages.size());
  for (std::size_t n = 0; n < u.stages.size(); ++n) out.stages.push_back(op(u.stages[n], v.stages[n]));
  return out;
}

}  // namespace

ControlProcess operator+(const ControlProcess& u, const ControlProcess& v) {
  return zip(u, v, [](const Adapted& a, const Adapted& b) { return a + b; });
}

ControlProcess operator-(const ControlProcess& u, const ControlProcess& v) {
  return zip(u, v, [](const Adapted& a, const Adapted& b) { return a - b; });
}

ControlProcess operator*(double s, const ControlProcess& u) {
  ControlProcess out;
  for (const auto& a : u.stages) out.stages.push_back(s * a);
  return out;
}

double mean_square_distance(const Lattice& lat, const ControlProcess& u, const ControlProcess& v) {
  const auto d = u - v;
  double total = 0.0;
  for (const auto& a : d.stages) total += expectation(lat, a * a);
  return total;
}

double max_abs_distance(const ControlProcess& u, const ControlProcess& v) {
  const auto d = u - v;
  double worst = 0.0;
  for (const auto& a : d.stages) worst = std::max(worst, a.values().cwiseAbs().maxCoeff());
  return worst;
}

Adapted evaluate(const ModelSpec::StageFn& phi, int n, const Adapted& x, const Adapted& u) {
  return map(x, u, [&](double xv, double uv) { return phi(n, xv, uv); });
}

StateProcess forward(const ModelSpec& model, const ControlProcess& u, const Lattice& lat) {
  const int N = model.horizon;
  require_control_levels(u, N, lat);
  StateProcess x;
  x.stages.reserve(N + 1);
  x.stages.push_back(lat.constant(model.initial_state));
  for (int n = 0; n < N; ++n) {
    const Adapted& xn = x.stages[n];
    const Adapted drift = evaluate(model.drift, n, xn, u.stages[n]);
    const Adapted diffusion = evaluate(model.diffusion, n, xn, u.stages[n]);
    Adapted next = xn + drift + diffusion * lat.noise_value(n);
    require_finite(next, "state", n + 1);
    x.stages.push_back(std::move(next));
  }
  return x;
}

double cost(const ModelSpec& model, const ControlProcess& u, const StateProcess& x, const Lattice& lat) {
  const int N = model.horizon;
  require_control_levels(u, N, lat);
  if (static_cast<int>(x.stages.size()) != N + 1) throw Error(Errc::DepthMismatch, "state has the wrong horizon");
  double total = 0.0;
  for (int n = 0; n < N; ++n) total += expectation(lat, evaluate(model.running_cost, n, x.stages[n], u.stages[n]));
  total += expectation(lat, map(x.stages[N], [&](double xv) { return model.terminal_cost(xv); }));
  if (!std::isfinite(total)) throw Error(Errc::NonFiniteValue, "cost is not finite");
  return total;
}

double cost(const ModelSpec& model, const ControlProcess& u, const Lattice& lat) {
  return cost(model, u, forward(model, u, lat), lat);
}

VariationProcess variation(const ModelSpec& model, const ControlProcess& u_star, const StateProcess& x_star,
                           const ControlProcess& v, const Lattice& lat) {
  const int N = model.horizon;
  require_control_levels(u_star, N, lat);
  require_control_levels(v, N, lat);
  if (static_cast<int>(x_star.stages.size()) != N + 1) throw Error(Errc::DepthMismatch, "state has the wrong horizon");
  VariationProcess var;
  var.stages.reserve(N + 1);
  var.stages.push_back(lat.constant(0.0));
  for (int n = 0; n < N; ++n) {
    const Adapted& xn = x_star.stages[n];
    const Adapted& un = u_star.stages[n];
    const Adapted& vn = var.stages[n];
    const Adapted bx = evaluate(model.drift_x, n, xn, un);
    const Adapted bu = evaluate(model.drift_u, n, xn, un);
    const Adapted sx = evaluate(model.diffusion_x, n, xn, un);
    const Adapted su = evaluate(model.diffusion_u, n, xn, un);
    Adapted next = vn + bx * vn + bu * v.stages[n] + (sx * vn + su * v.stages[n]) * lat.noise_value(n);
    require_finite(next, "variation", n + 1);
    var.stages.push_back(std::move(next));
  }
  return var;
}

ControlProcess perturb(const ControlProcess& u_star, const ControlProcess& v, double eps,
                       const ControlSet& control_set) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw Error(Errc::InvalidArgument, "perturbation size must lie in [0,1]");
  ControlProcess out = u_star + eps * v;
  for (int n = 0; n < out.horizon(); ++n) {
    const auto& vals = out.stages[n].values();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
      if (!control_set.contains(vals(i))) {
        std::ostringstream os;
        os << "perturbed control " << vals(i) << " at stage " << n << ", node " << i << " leaves the control set";
        throw Error(Errc::OutOfControlSet, os.str());
      }
    }
  }
  return out;
}

double state_deviation(const Lattice& lat, const StateProcess& x_eps, const StateProcess& x_star) {
  double total = 0.0;
  for (std::size_t n = 0; n < x_star.stages.size(); ++n) {
    const Adapted d = x_eps.stages[n] - x_star.stages[n];
    total += expectation(lat, d * d);
  }
  return total;
}

double variation_error(const Lattice& lat, const StateProcess& x_eps, const StateProcess& x_star,
                       const VariationProcess& v, double eps) {
  double total = 0.0;
  for (std::size_t n = 0; n < x_star.stages.size(); ++n) {
    const Adapted d = (1.0 / eps) * (x_eps.stages[n] - x_star.stages[n]) - v.stages[n];
    total += expectation(lat, d * d);
  }
  return total;
}

ModelSpec sin_drift_model(int horizon, double initial_state, double c, ControlSet control_set) {
  ModelSpec m;
  m.name = "sin_drift";
  m.horizon = horizon;
  m.initial_state = initial_state;
  m.control_set = control_set;
  const int N = horizon;
  auto live = [N](int n) { return n < N; };
  m.drift = [=](int n, double x, double u) { return live(n) ? std::sin(x) + u : 0.0; };
  m.drift_x = [=](int n, double x, double) { return live(n) ? std::cos(x) : 0.0; };
  m.drift_u = [=](int n, double, double) { return live(n) ? 1.0 : 0.0; };
  m.diffusion = [=](int n, double, double u) { return live(n) ? c * u : 0.0; };
  m.diffusion_x = [](int, double, double) { return 0.0; };
  m.diffusion_u = [=](int n, double, double) { return live(n) ? c : 0.0; };
  m.running_cost = [=](int n, double, double u) { return live(n) ? 0.5 * u * u : 0.0; };
  m.running_cost_x = [](int, double, double) { return 0.0; };
  m.running_cost_u = [=](int n, double, double u) { return live(n) ? u : 0.0; };
  m.terminal_cost = [](double x) { return 0.5 * x * x; };
  m.terminal_cost_x = [](double x) { return x; };
  return m;
}

}  // namespace fracsmp
