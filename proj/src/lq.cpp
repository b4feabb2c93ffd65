#include "fracsmp/lq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fracsmp {

void LqSpec::validate() const {
  const auto N = static_cast<std::size_t>(horizon);
  if (horizon < 1) throw Error(Errc::InvalidSpec, "LQ horizon must be >= 1");
  const std::pair<const char*, const std::vector<double>*> seqs[] = {{"A", &A}, {"B", &B}, {"C", &C},
                                                                      {"D", &D}, {"Q", &Q}, {"R", &R}};
  for (const auto& [name, seq] : seqs) {
    if (seq->size() != N) {
      std::ostringstream os;
      os << name << " has " << seq->size() << " entries, horizon is " << horizon;
      throw Error(Errc::InvalidSpec, os.str());
    }
    for (double v : *seq)
      if (!std::isfinite(v)) throw Error(Errc::InvalidSpec, std::string(name) + " has a non-finite entry");
  }
  for (std::size_t n = 0; n < N; ++n) {
    if (Q[n] < 0.0) throw Error(Errc::InvalidSpec, "Q_n must be >= 0");
    if (!(R[n] > 0.0)) throw Error(Errc::InvalidSpec, "R_n must be > 0");
  }
  if (!(G >= 0.0) || !std::isfinite(G)) throw Error(Errc::InvalidSpec, "G must be >= 0");
  if (!std::isfinite(x)) throw Error(Errc::InvalidSpec, "initial state must be finite");
}

double LqSpec::min_control_weight() const { return *std::min_element(R.begin(), R.end()); }

ModelSpec lq_model(const LqSpec& spec) {
  spec.validate();
  ModelSpec m;
  m.name = "lq";
  m.horizon = spec.horizon;
  m.initial_state = spec.x;
  const int N = spec.horizon;
  const auto A = spec.A, B = spec.B, C = spec.C, D = spec.D, Q = spec.Q, R = spec.R;
  const double G = spec.G;
  m.drift = [=](int n, double x, double u) { return n < N ? A[n] * x + B[n] * u : 0.0; };
  m.drift_x = [=](int n, double, double) { return n < N ? A[n] : 0.0; };
  m.drift_u = [=](int n, double, double) { return n < N ? B[n] : 0.0; };
  m.diffusion = [=](int n, double x, double u) { return n < N ? C[n] * x + D[n] * u : 0.0; };
  m.diffusion_x = [=](int n, double, double) { return n < N ? C[n] : 0.0; };
  m.diffusion_u = [=](int n, double, double) { return n < N ? D[n] : 0.0; };
  m.running_cost = [=](int n, double x, double u) { return n < N ? 0.5 * (Q[n] * x * x + R[n] * u * u) : 0.0; };
  m.running_cost_x = [=](int n, double x, double) { return n < N ? Q[n] * x : 0.0; };
  m.running_cost_u = [=](int n, double, double u) { return n < N ? R[n] * u : 0.0; };
  m.terminal_cost = [G](double x) { return 0.5 * G * x * x; };
  m.terminal_cost_x = [G](double x) { return G * x; };
  return m;
}

Lattice lq_lattice(const LqSpec& spec, const WhiteningBasis<double>& basis, const QuadratureRule<double>& rule) {
  if (basis.size() < spec.horizon + 1) {
    throw Error(Errc::DepthMismatch, "LQ lattices use a whitening basis of size N+1");
  }
  return Lattice(spec.horizon, rule, basis);
}

ControlProcess lq_candidate(const LqSpec& spec, const BsdeSolution& adjoint, const Lattice& lat) {
  const auto& b = lat.basis().b;
  ControlProcess u;
  u.stages.reserve(spec.horizon);
  for (int n = 0; n < spec.horizon; ++n) {
    const Adapted& p = adjoint.Y[n];
    const Adapted& q = adjoint.Z[n];
    const Adapted bracket = spec.B[n] * p + spec.D[n] * p * noise_prediction(lat, n) + b(n, n) * spec.D[n] * q;
    u.stages.push_back((-1.0 / spec.R[n]) * bracket);
  }
  return u;
}

namespace {

double weighted_norm(const LqSpec& spec, const ControlProcess& d, const Lattice& lat) {
  double total = 0.0;
  for (int n = 0; n < spec.horizon; ++n) total += spec.R[n] * expectation(lat, d.stages[n] * d.stages[n]);
  return std::sqrt(total);
}

}  // namespace

LqSolution lq_fixed_point(const LqSpec& spec, const Lattice& lat, const LqOptions& options) {
  return lq_fixed_point(spec, lat, ControlProcess::constant(lat, spec.horizon, 0.0), options);
}

LqSolution lq_fixed_point(const LqSpec& spec, const Lattice& lat, const ControlProcess& start,
                          const LqOptions& options) {
  const ModelSpec model = lq_model(spec);
  if (!(options.damping > 0.0 && options.damping <= 1.0)) {
    throw Error(Errc::InvalidArgument, "damping must lie in (0,1]");
  }
  LqSolution sol;
  sol.damping = options.damping;
  ControlProcess u = start;
  double previous_norm = std::numeric_limits<double>::infinity();

  for (int it = 0;; ++it) {
    StateProcess x = forward(model, u, lat);
    BsdeSolution adjoint = solve_adjoint(model, u, x, lat);
    const ControlProcess diff = lq_candidate(spec, adjoint, lat) - u;
    const double residual = max_abs_distance(diff, ControlProcess::constant(lat, spec.horizon, 0.0));
    sol.residual_history.push_back(residual);
    sol.cost_history.push_back(cost(model, u, x, lat));

    if (residual <= options.tolerance) {
      sol.cost = sol.cost_history.back();
      sol.control = std::move(u);
      sol.state = std::move(x);
      sol.adjoint = std::move(adjoint);
      sol.iterations = it;
      sol.residual = residual;
      return sol;
    }
    if (it >= options.max_iter) {
      std::ostringstream os;
      os.precision(6);
      os << "fixed point not reached after " << options.max_iter << " iterations; last residual " << residual
         << " (tolerance " << options.tolerance << ", damping " << sol.damping << ")";
      throw Error(Errc::NotConverged, os.str());
    }

    const double norm = weighted_norm(spec, diff, lat);
    if (options.adaptive_damping && norm > previous_norm * (1.0 + 1e-9)) sol.damping *= 0.5;
    previous_norm = norm;
    u = u + sol.damping * diff;
  }
}

double one_step_closed_form(const LqSpec& spec) {
  if (spec.horizon != 1) {
    std::ostringstream os;
    os << "closed form needs horizon 1, got " << spec.horizon;
    throw Error(Errc::WrongHorizon, os.str());
  }
  spec.validate();
  const double A = spec.A[0], B = spec.B[0], C = spec.C[0], D = spec.D[0], R = spec.R[0], G = spec.G;
  return -G * ((1.0 + A) * B + C * D) * spec.x / (R + G * (B * B + D * D));
}

SufficiencyReport verify_sufficiency(const LqSpec& spec, const ControlProcess& u_star, const Lattice& lat,
                                     int trials, std::uint64_t seed) {
  const ModelSpec model = lq_model(spec);
  SufficiencyReport rep;
  rep.optimal_cost = cost(model, u_star, lat);
  rep.min_gain = std::numeric_limits<double>::infinity();
  rep.worst_quadratic_gap = std::numeric_limits<double>::infinity();
  SplitMix64 seeds(seed);
  for (int t = 0; t < trials; ++t) {
    const ControlProcess v = random_control(lat, spec.horizon, -1.0, 1.0, seeds.next());
    for (double eps : {1.0, 0.1, 0.01}) {
      const ControlProcess u = perturb(u_star, v, eps);
      SufficiencyTrial tr;
      tr.trial = t;
      tr.eps = eps;
      tr.cost = cost(model, u, lat);
      tr.gain = tr.cost - rep.optimal_cost;
      const ControlProcess du = u - u_star;
      for (int n = 0; n < spec.horizon; ++n) tr.quadratic += 0.5 * spec.R[n] * expectation(lat, du.stages[n] * du.stages[n]);
      tr.pass = tr.gain >= -1e-10 && tr.gain - tr.quadratic >= -1e-9;
      rep.pass = rep.pass && tr.pass;
      rep.min_gain = std::min(rep.min_gain, tr.gain);
      rep.worst_quadratic_gap = std::min(rep.worst_quadratic_gap, tr.gain - tr.quadratic);
      rep.trials.push_back(tr);
    }
  }
  if (rep.trials.empty()) rep.min_gain = rep.worst_quadratic_gap = 0.0;
  return rep;
}

UniquenessReport verify_uniqueness(const LqSpec& spec, const Lattice& lat, const std::vector<ControlProcess>& starts,
                                   const LqOptions& options) {
  if (starts.size() < 2) throw Error(Errc::InvalidArgument, "uniqueness needs at least two starts");
  const ModelSpec model = lq_model(spec);
  const double theta = spec.min_control_weight();
  UniquenessReport rep;
  rep.worst_parallelogram_slack = std::numeric_limits<double>::infinity();

  std::vector<ControlProcess> limits;
  for (const auto& s : starts) {
    LqSolution sol = lq_fixed_point(spec, lat, s, options);
    rep.iterations.push_back(sol.iterations);
    rep.costs.push_back(sol.cost);
    limits.push_back(std::move(sol.control));
  }
  for (std::size_t i = 1; i < limits.size(); ++i) {
    rep.max_spread = std::max(rep.max_spread, max_abs_distance(limits[0], limits[i]));
  }

  for (std::size_t i = 0; i < starts.size(); ++i) {
    for (std::size_t j = i + 1; j < starts.size(); ++j) {
      const ControlProcess mid = 0.5 * (starts[i] + starts[j]);
      const double lhs = cost(model, starts[i], lat) + cost(model, starts[j], lat);
      const double rhs = 2.0 * cost(model, mid, lat) + 0.25 * theta * mean_square_distance(lat, starts[i], starts[j]);
      rep.worst_parallelogram_slack = std::min(rep.worst_parallelogram_slack, lhs - rhs);
    }
  }
  rep.pass = rep.max_spread <= 1e-6 && rep.worst_parallelogram_slack >= -1e-9;
  return rep;
}

UniquenessReport verify_uniqueness(const LqSpec& spec, const Lattice& lat, int starts, std::uint64_t seed,
                                   const LqOptions& options) {
  std::vector<ControlProcess> controls;
  controls.push_back(ControlProcess::constant(lat, spec.horizon, 0.0));
  SplitMix64 seeds(seed);
  for (int i = 1; i < starts; ++i) controls.push_back(random_control(lat, spec.horizon, -2.0, 2.0, seeds.next()));
  return verify_uniqueness(spec, lat, controls, options);
}

}  // namespace fracsmp
