#include "degdiff/solver.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <ostream>

#include "degdiff/errors.hpp"
#include "degdiff/simd/kernels.hpp"

namespace degdiff::solver {
namespace {

using Vec = std::vector<double>;

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double two_norm(std::span<const double> v) { return std::sqrt(simd::dot(v, v)); }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Relaxed-system residual at a candidate u+. mu+ is eliminated exactly from
// the second equation, so only the first block needs to vanish.
struct ChEval {
  Vec mu;
  Vec r;
  Vec dxi;
  double norm_inf = 0.0;
  double norm_two = 0.0;
};

class ChResidual {
 public:
  ChResidual(const fem::FemOperators& ops, const ChParams& p, const Vec& u_old, const Vec& f)
      : ops_(ops), p_(p), u_old_(u_old), f_(f), pi_slope_(graphs::pi_eps_slope(p.pi, p.eps)) {}

  ChEval operator()(const Vec& u) const {
    const std::size_t n = u.size();
    const auto& m = ops_.lumped_mass();
    ChEval e;
    e.mu.resize(n);
    e.r.resize(n);
    e.dxi.resize(n);
    Vec xi(n);
    graphs::yosida_batch(p_.graph, p_.lambda, u, xi, e.dxi);
    const Vec au = ops_.robin().apply(u);
    for (std::size_t i = 0; i < n; ++i) {
      const double rate = (u[i] - u_old_[i]) / p_.tau;
      e.mu[i] = p_.lambda * rate + p_.eps * au[i] / m[i] + xi[i] + pi_slope_ * u[i] - f_[i];
    }
    ops_.robin().apply(e.mu, e.r);
    for (std::size_t i = 0; i < n; ++i) e.r[i] += m[i] * (u[i] - u_old_[i]) / p_.tau;
    e.norm_inf = inf_norm(e.r);
    e.norm_two = two_norm(e.r);
    return e;
  }

  // d r1 / d u = diag(m/tau) + A Q,  Q = (lambda/tau + dxi + pi') I + eps diag(1/m) A
  linalg::BandMatrix jacobian(const Vec& dxi) const {
    const std::size_t n = dxi.size();
    const auto& a = ops_.robin();
    const auto& m = ops_.lumped_mass();
    auto q = [&](std::size_t k, std::size_t j) {
      double v = p_.eps * a.at(k, j) / m[k];
      if (k == j) v += p_.lambda / p_.tau + dxi[k] + pi_slope_;
      return v;
    };
    linalg::BandMatrix jac(n, 2, 2);
    for (std::size_t i = 0; i < n; ++i) {
      jac(i, i) += m[i] / p_.tau;
      const std::size_t k0 = i == 0 ? 0 : i - 1;
      const std::size_t k1 = std::min(n - 1, i + 1);
      for (std::size_t k = k0; k <= k1; ++k) {
        const double aik = a.at(i, k);
        const std::size_t j0 = k == 0 ? 0 : k - 1;
        const std::size_t j1 = std::min(n - 1, k + 1);
        for (std::size_t j = j0; j <= j1; ++j) jac(i, j) += aik * q(k, j);
      }
    }
    return jac;
  }

  double scale() const {
    const auto& m = ops_.lumped_mass();
    double s = 0.0;
    for (std::size_t i = 0; i < u_old_.size(); ++i) s = std::max(s, std::abs(m[i] * u_old_[i]));
    return s / p_.tau + inf_norm(ops_.robin().apply(f_));
  }

 private:
  const fem::FemOperators& ops_;
  const ChParams& p_;
  const Vec& u_old_;
  const Vec& f_;
  double pi_slope_;
};

class LimitResidual {
 public:
  LimitResidual(const fem::FemOperators& ops, const linalg::Tridiag& a, const LimitParams& p,
                double tau, const Vec& u_old, const Vec& load)
      : ops_(ops), a_(a), p_(p), u_old_(u_old), load_(load), tau_(tau) {}

  struct Eval {
    Vec xi;
    Vec dxi;
    Vec r;
    double norm_inf = 0.0;
    double norm_two = 0.0;
  };

  Eval operator()(const Vec& u) const {
    const std::size_t n = u.size();
    const auto& m = ops_.lumped_mass();
    Eval e;
    e.xi.resize(n);
    e.dxi.resize(n);
    graphs::yosida_batch(p_.graph, p_.lambda_ref, u, e.xi, e.dxi);
    e.r = a_.apply(e.xi);
    for (std::size_t i = 0; i < n; ++i) e.r[i] += m[i] * (u[i] - u_old_[i]) / tau_ - load_[i];
    e.norm_inf = inf_norm(e.r);
    e.norm_two = two_norm(e.r);
    return e;
  }

  // diag(m/tau) + A diag(dxi): tridiagonal
  linalg::Tridiag jacobian(const Vec& dxi) const {
    const std::size_t n = dxi.size();
    const auto& m = ops_.lumped_mass();
    linalg::Tridiag jac = linalg::Tridiag::zeros(n);
    for (std::size_t i = 0; i < n; ++i) jac.diag[i] = m[i] / tau_ + a_.diag[i] * dxi[i];
    for (std::size_t i = 0; i + 1 < n; ++i) {
      jac.upper[i] = a_.upper[i] * dxi[i + 1];
      jac.lower[i] = a_.lower[i] * dxi[i];
    }
    return jac;
  }

  double scale() const {
    const auto& m = ops_.lumped_mass();
    double s = 0.0;
    for (std::size_t i = 0; i < u_old_.size(); ++i) s = std::max(s, std::abs(m[i] * u_old_[i]));
    return s / tau_ + inf_norm(load_);
  }

 private:
  const fem::FemOperators& ops_;
  const linalg::Tridiag& a_;
  const LimitParams& p_;
  const Vec& u_old_;
  const Vec& load_;
  double tau_;
};

// Damped Newton on a residual map with backtracking on the 2-norm. Once the
// tolerance is met one extra full step is taken, which drives the residual to
// roundoff and makes the discrete balance laws hold to machine precision.
template <class Residual, class Solve>
auto newton(const Residual& residual, Solve&& solve_linear, Vec u, double tol, int max_iter,
            const char* what) {
  auto ev = residual(u);
  int it = 0;
  bool polished = false;
  for (;;) {
    const bool converged = ev.norm_inf <= tol;
    if (converged && (polished || ev.norm_inf <= 1e-3 * tol)) break;
    if (it >= max_iter) {
      throw SolverError(fmt::format("{}: Newton did not converge in {} iterations (residual {:.3e})",
                                    what, max_iter, ev.norm_inf),
                        ev.norm_inf, it);
    }
    Vec delta(ev.r.begin(), ev.r.end());
    for (double& d : delta) d = -d;
    solve_linear(ev, delta);
    ++it;
    if (converged) {
      for (std::size_t i = 0; i < u.size(); ++i) u[i] += delta[i];
      auto next = residual(u);
      if (next.norm_inf <= ev.norm_inf) ev = std::move(next);
      else {
        for (std::size_t i = 0; i < u.size(); ++i) u[i] -= delta[i];
      }
      polished = true;
      continue;
    }
    double alpha = 1.0;
    Vec trial(u.size());
    bool accepted = false;
    decltype(ev) cand;
    for (int ls = 0; ls < 30; ++ls) {
      for (std::size_t i = 0; i < u.size(); ++i) trial[i] = u[i] + alpha * delta[i];
      cand = residual(trial);
      if (all_finite(cand.r) && cand.norm_two <= (1.0 - 1e-4 * alpha) * ev.norm_two) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      for (std::size_t i = 0; i < u.size(); ++i) trial[i] = u[i] + delta[i];
      cand = residual(trial);
      if (!all_finite(cand.r)) {
        throw SolverError(fmt::format("{}: Newton produced non-finite residual", what),
                          ev.norm_inf, it);
      }
    }
    u = trial;
    ev = std::move(cand);
  }
  return std::tuple{std::move(u), std::move(ev), it};
}

ChState ch_step_impl(const fem::FemOperators& ops, const ChParams& p, const ChState& state,
                     const fem::PrimalField& f_next) {
  const ChResidual residual(ops, p, state.u.values, f_next.values);
  const double tol = p.newton_tol * (1.0 + residual.scale());
  auto solve = [&](const ChEval& ev, Vec& rhs) {
    auto jac = residual.jacobian(ev.dxi);
    jac.solve_in_place(rhs);
  };
  auto [u, ev, iters] = newton(residual, solve, state.u.values, tol, p.newton_max, "ch_step");
  ChState next;
  next.u = fem::PrimalField{std::move(u), fem::FieldRole::v_function};
  next.mu = fem::PrimalField{std::move(ev.mu), fem::FieldRole::v_function};
  next.t = state.t + p.tau;
  next.step = state.step + 1;
  next.newton_iterations = iters;
  next.residual = ev.norm_inf;
  return next;
}

Vec nodal_yosida(const graphs::GraphSpec& graph, double lambda, const Vec& u) {
  Vec xi(u.size());
  Vec dxi(u.size());
  graphs::yosida_batch(graph, lambda, u, xi, dxi);
  return xi;
}

}  // namespace

void ChParams::validate() const {
  if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError(fmt::format("eps must lie in (0,1], got {}", eps));
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw ConfigError(fmt::format("lambda must lie in (0,1], got {}", lambda));
  }
  if (!(kappa > 0.0)) throw ConfigError(fmt::format("kappa must be positive, got {}", kappa));
  if (!(tau > 0.0) || !(T > 0.0) || tau > T) {
    throw ConfigError(fmt::format("need 0 < tau <= T, got tau={} T={}", tau, T));
  }
  if (!(newton_tol > 0.0) || newton_max < 1) throw ConfigError("invalid Newton settings");
  step_count(T, tau);
}

void LimitParams::validate() const {
  if (!(lambda_ref > 0.0)) throw ConfigError(fmt::format("lambda_ref must be positive, got {}", lambda_ref));
  if (!(tau > 0.0) || !(T > 0.0) || tau > T) {
    throw ConfigError(fmt::format("need 0 < tau <= T, got tau={} T={}", tau, T));
  }
  if (!(newton_tol > 0.0) || newton_max < 1) throw ConfigError("invalid Newton settings");
  step_count(T, tau);
}

int step_count(double T, double tau) {
  const double ratio = T / tau;
  const double steps = std::round(ratio);
  if (steps < 1.0 || std::abs(ratio - steps) > 1e-9 * steps) {
    throw ConfigError(fmt::format("T={} is not an integer multiple of tau={}", T, tau));
  }
  return static_cast<int>(steps);
}

void Trajectory::validate() const {
  const std::size_t n = times.size();
  if (n == 0) throw std::logic_error("trajectory is empty");
  if (u.size() != n || mu.size() != n || xi.size() != n || du.size() + 1 != n) {
    throw std::logic_error("trajectory snapshot counts differ");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(times[i] > times[i - 1])) throw std::logic_error("trajectory times not increasing");
  }
}

Forcing make_forcing(const fem::FemOperators& ops, BulkData g, BoundaryData h) {
  return [&ops, g = std::move(g), h = std::move(h)](double t) {
    return fem::build_f(ops, g(t), h(t));
  };
}

Forcing zero_forcing(const fem::FemOperators& ops) {
  const std::size_t n = ops.size();
  return [n](double) { return fem::PrimalField{Vec(n, 0.0), fem::FieldRole::v_function}; };
}

fem::PrimalField initial_smoothing(const fem::FemOperators& ops, const fem::PrimalField& u0,
                                   double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError(fmt::format("eps must lie in (0,1], got {}", eps));
  linalg::Tridiag lhs = ops.mass();
  lhs.add_scaled(std::sqrt(eps), ops.robin());
  auto rhs = ops.mass().apply(u0.values);
  linalg::TridiagFactor(lhs).solve_in_place(rhs);
  return fem::PrimalField{std::move(rhs), fem::FieldRole::v_function};
}

ChState ch_step(const fem::FemOperators& ops, const ChParams& params, const ChState& state,
                const fem::PrimalField& f_next) {
  if (ops.kappa() != params.kappa) {
    throw ConfigError(fmt::format("operators assembled with kappa={} but params say {}", ops.kappa(),
                                  params.kappa));
  }
  return ch_step_impl(ops, params, state, f_next);
}

Trajectory march_ch(const fem::FemOperators& ops, const ChParams& params,
                    const fem::PrimalField& u0e, const Forcing& f) {
  params.validate();
  if (ops.kappa() != params.kappa) {
    throw ConfigError(fmt::format("operators assembled with kappa={} but params say {}", ops.kappa(),
                                  params.kappa));
  }
  const int steps = step_count(params.T, params.tau);
  const auto& m = ops.lumped_mass();

  Trajectory traj;
  ChState state;
  state.u = u0e;
  {
    // mu at t=0 without the viscous term (no rate is available yet).
    const fem::PrimalField f0 = f(0.0);
    const Vec au = ops.robin().apply(u0e.values);
    const Vec xi0 = nodal_yosida(params.graph, params.lambda, u0e.values);
    const double ps = graphs::pi_eps_slope(params.pi, params.eps);
    Vec mu0(u0e.size());
    for (std::size_t i = 0; i < mu0.size(); ++i) {
      mu0[i] = params.eps * au[i] / m[i] + xi0[i] + ps * u0e[i] - f0[i];
    }
    state.mu = fem::PrimalField{std::move(mu0), fem::FieldRole::v_function};
    traj.times.push_back(0.0);
    traj.u.push_back(state.u.values);
    traj.mu.push_back(state.mu.values);
    traj.xi.push_back(xi0);
  }

  for (int n = 1; n <= steps; ++n) {
    const double t_next = n * params.tau;
    ChState next;
    try {
      next = ch_step_impl(ops, params, state, f(t_next));
    } catch (const SolverError&) {
      ChParams half = params;
      half.tau = 0.5 * params.tau;
      try {
        const ChState mid = ch_step_impl(ops, half, state, f(t_next - half.tau));
        next = ch_step_impl(ops, half, mid, f(t_next));
        next.newton_iterations = std::max(mid.newton_iterations, next.newton_iterations);
      } catch (const SolverError& e) {
        throw SolverError(fmt::format("march_ch: step {} (t={}) failed after tau halving: {}", n,
                                      t_next, e.what()),
                          e.residual(), e.iterations());
      }
      ++traj.step_retries;
    }
    next.t = t_next;
    next.step = n;
    traj.max_newton_iterations = std::max(traj.max_newton_iterations, next.newton_iterations);

    Vec du(next.u.size());
    for (std::size_t i = 0; i < du.size(); ++i) du[i] = (next.u[i] - state.u[i]) / params.tau;
    traj.times.push_back(t_next);
    traj.u.push_back(next.u.values);
    traj.mu.push_back(next.mu.values);
    traj.xi.push_back(nodal_yosida(params.graph, params.lambda, next.u.values));
    traj.du.push_back(std::move(du));
    state = std::move(next);
  }
  return traj;
}

Trajectory limit_march(const fem::FemOperators& ops, const LimitParams& params,
                       const BulkData& g, const BoundaryData& h, const fem::PrimalField& u0) {
  params.validate();
  const bool robin = params.scheme == BoundaryScheme::robin;
  if (robin && !(ops.kappa() > 0.0)) {
    throw ConfigError("limit_march: the Robin scheme needs kappa > 0");
  }
  const linalg::Tridiag& a = robin ? ops.robin() : ops.stiffness();
  const int steps = step_count(params.T, params.tau);

  auto load_at = [&](double t) {
    Vec load = ops.mass().apply(g(t).values);
    const auto hv = h(t);
    load.front() += hv[0];
    load.back() += hv[1];
    return load;
  };

  auto step = [&](const Vec& u_old, double tau, double t_next, int& iters) {
    const Vec load = load_at(t_next);
    const LimitResidual residual(ops, a, params, tau, u_old, load);
    const double tol = params.newton_tol * (1.0 + residual.scale());
    auto solve = [&](const LimitResidual::Eval& ev, Vec& rhs) {
      linalg::TridiagFactor(residual.jacobian(ev.dxi)).solve_in_place(rhs);
    };
    auto [u, ev, it] = newton(residual, solve, u_old, tol, params.newton_max, "limit_march");
    iters = it;
    return std::pair{std::move(u), std::move(ev.xi)};
  };

  Trajectory traj;
  Vec u = u0.values;
  Vec xi = nodal_yosida(params.graph, params.lambda_ref, u);
  traj.times.push_back(0.0);
  traj.u.push_back(u);
  traj.mu.push_back(xi);
  traj.xi.push_back(xi);

  for (int n = 1; n <= steps; ++n) {
    const double t_next = n * params.tau;
    int iters = 0;
    std::pair<Vec, Vec> next;
    try {
      next = step(u, params.tau, t_next, iters);
    } catch (const SolverError&) {
      try {
        int it_a = 0;
        const auto mid = step(u, 0.5 * params.tau, t_next - 0.5 * params.tau, it_a);
        next = step(mid.first, 0.5 * params.tau, t_next, iters);
        iters = std::max(iters, it_a);
      } catch (const SolverError& e) {
        throw SolverError(fmt::format("limit_march: step {} (t={}) failed after tau halving: {}", n,
                                      t_next, e.what()),
                          e.residual(), e.iterations());
      }
      ++traj.step_retries;
    }
    traj.max_newton_iterations = std::max(traj.max_newton_iterations, iters);
    Vec du(u.size());
    for (std::size_t i = 0; i < du.size(); ++i) du[i] = (next.first[i] - u[i]) / params.tau;
    u = std::move(next.first);
    traj.times.push_back(t_next);
    traj.u.push_back(u);
    traj.mu.push_back(next.second);
    traj.xi.push_back(std::move(next.second));
    traj.du.push_back(std::move(du));
  }
  return traj;
}

void write_trajectory_csv(std::ostream& out, const fem::Mesh1D& mesh, const Trajectory& traj) {
  out << "step,t,node_index,x,u,mu,xi\n";
  for (std::size_t n = 0; n < traj.num_snapshots(); ++n) {
    for (std::size_t i = 0; i < traj.u[n].size(); ++i) {
      fmt::print(out, "{},{},{},{},{},{},{}\n", n, traj.times[n], i, mesh.x(i), traj.u[n][i],
                 traj.mu[n][i], traj.xi[n][i]);
    }
  }
}

}  // namespace degdiff::solver
