#include "degdiff/analysis.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "degdiff/simd/kernels.hpp"

namespace degdiff::analysis {
namespace {

using Vec = std::vector<double>;

void require_same_grid(const solver::Trajectory& a, const solver::Trajectory& b) {
  if (a.times.size() != b.times.size()) {
    throw GridMismatchError(fmt::format("trajectories have {} and {} snapshots", a.times.size(),
                                        b.times.size()));
  }
  for (std::size_t n = 0; n < a.times.size(); ++n) {
    if (std::abs(a.times[n] - b.times[n]) > 1e-12 * std::max(1.0, std::abs(a.times[n]))) {
      throw GridMismatchError(fmt::format("time grids differ at snapshot {}", n));
    }
    if (a.u[n].size() != b.u[n].size()) throw GridMismatchError("spatial sizes differ");
  }
}

Vec diff(std::span<const double> x, std::span<const double> y) {
  Vec d(x.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] - y[i];
  return d;
}

double vstar_of_lumped(const fem::FemOperators& ops, std::span<const double> v) {
  fem::DualField load{Vec(v.begin(), v.end())};
  for (std::size_t i = 0; i < load.size(); ++i) load[i] *= ops.lumped_mass()[i];
  return fem::vstar_norm(ops, load);
}

double v_norm_sq(const fem::FemOperators& ops, std::span<const double> v) {
  const Vec fv = ops.robin().apply(v);
  return simd::dot(fv, v);
}

}  // namespace

std::array<double, 8> EnergyReport::values() const {
  return {int_du_vstar_sq, int_du_h_sq_lam, max_eps_u_v_sq, max_hat_beta_l1,
          max_u_h_sq,      int_mu_v_sq,     int_beta_h_sq,  int_eps_lap_sq};
}

EnergyReport energy_report(const fem::FemOperators& ops, const solver::Trajectory& traj,
                           const solver::ChParams& params) {
  traj.validate();
  EnergyReport r;
  const auto& m = ops.lumped_mass();
  for (std::size_t n = 0; n < traj.num_snapshots(); ++n) {
    const auto& u = traj.u[n];
    r.max_eps_u_v_sq = std::max(r.max_eps_u_v_sq, params.eps * v_norm_sq(ops, u));
    double l1 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      l1 += m[i] * std::abs(graphs::moreau_yosida(params.graph, params.lambda, u[i]));
    }
    r.max_hat_beta_l1 = std::max(r.max_hat_beta_l1, l1);
    r.max_u_h_sq = std::max(r.max_u_h_sq, fem::h_norm_sq(ops, u));
  }
  for (std::size_t n = 1; n < traj.num_snapshots(); ++n) {
    const double tau = traj.step_size(n);
    const auto& du = traj.du[n - 1];
    const double dv = vstar_of_lumped(ops, du);
    r.int_du_vstar_sq += tau * dv * dv;
    r.int_du_h_sq_lam += params.lambda * tau * fem::h_norm_sq(ops, du);
    r.int_mu_v_sq += tau * v_norm_sq(ops, traj.mu[n]);
    r.int_beta_h_sq += tau * fem::h_norm_sq(ops, traj.xi[n]);
    const auto lap = fem::robin_laplacian_apply(ops, fem::PrimalField{traj.u[n]});
    r.int_eps_lap_sq += tau * params.eps * params.eps * fem::h_norm_sq(ops, lap.values);
  }
  return r;
}

double discrete_energy(const fem::FemOperators& ops, const solver::ChParams& params,
                       std::span<const double> u) {
  const auto& m = ops.lumped_mass();
  double e = 0.5 * params.eps * v_norm_sq(ops, u);
  for (std::size_t i = 0; i < u.size(); ++i) {
    e += m[i] * (graphs::moreau_yosida(params.graph, params.lambda, u[i]) +
                 graphs::hat_pi_eps(params.pi, params.eps, u[i]));
  }
  return e;
}

LyapunovResult lyapunov_check(const fem::FemOperators& ops, const solver::Trajectory& traj,
                              const solver::ChParams& params, double slack) {
  LyapunovResult out;
  out.worst_violation = -std::numeric_limits<double>::infinity();
  for (const auto& u : traj.u) out.energy.push_back(discrete_energy(ops, params, u));
  for (std::size_t n = 1; n < out.energy.size(); ++n) {
    const double inc = out.energy[n] - out.energy[n - 1];
    if (inc > out.worst_violation) {
      out.worst_violation = inc;
      out.worst_step = n;
    }
    if (inc > slack) out.ok = false;
  }
  if (out.energy.size() < 2) out.worst_violation = 0.0;
  return out;
}

double cvstar_error(const fem::FemOperators& ops, const solver::Trajectory& a,
                    const solver::Trajectory& b) {
  require_same_grid(a, b);
  double worst = 0.0;
  for (std::size_t n = 0; n < a.num_snapshots(); ++n) {
    worst = std::max(worst, vstar_of_lumped(ops, diff(a.u[n], b.u[n])));
  }
  return worst;
}

double ch_error(const fem::FemOperators& ops, const solver::Trajectory& a,
                const solver::Trajectory& b) {
  require_same_grid(a, b);
  double worst = 0.0;
  for (std::size_t n = 0; n < a.num_snapshots(); ++n) {
    worst = std::max(worst, std::sqrt(fem::h_norm_sq(ops, diff(a.u[n], b.u[n]))));
  }
  return worst;
}

double duality_gap(const fem::FemOperators& ops, const solver::Trajectory& a,
                   const solver::Trajectory& b) {
  require_same_grid(a, b);
  double gap = 0.0;
  for (std::size_t n = 1; n < a.num_snapshots(); ++n) {
    gap += a.step_size(n) * fem::h_inner(ops, diff(a.xi[n], b.xi[n]), diff(a.u[n], b.u[n]));
  }
  return gap;
}

double l2h_error(const fem::FemOperators& ops, const solver::Trajectory& a,
                 const solver::Trajectory& b, Field field) {
  require_same_grid(a, b);
  const auto& fa = field == Field::u ? a.u : a.xi;
  const auto& fb = field == Field::u ? b.u : b.xi;
  double acc = 0.0;
  for (std::size_t n = 1; n < a.num_snapshots(); ++n) {
    acc += a.step_size(n) * fem::h_norm_sq(ops, diff(fa[n], fb[n]));
  }
  return acc;
}

double ch_flux_balance(const fem::FemOperators& ops, const solver::Trajectory& traj) {
  double worst = 0.0;
  const auto& m = ops.lumped_mass();
  for (std::size_t n = 1; n < traj.num_snapshots(); ++n) {
    const auto& du = traj.du[n - 1];
    const double storage = std::inner_product(m.begin(), m.end(), du.begin(), 0.0);
    const double flux = ops.kappa() * (traj.mu[n].front() + traj.mu[n].back());
    const double scale = std::max({1.0, std::abs(storage), std::abs(flux)});
    worst = std::max(worst, std::abs(storage + flux) / scale);
  }
  return worst;
}

double limit_flux_balance(const fem::FemOperators& ops, const solver::Trajectory& traj,
                          solver::BoundaryScheme scheme, const solver::BulkData& g,
                          const solver::BoundaryData& h) {
  double worst = 0.0;
  const auto& m = ops.lumped_mass();
  const double kappa = scheme == solver::BoundaryScheme::robin ? ops.kappa() : 0.0;
  for (std::size_t n = 1; n < traj.num_snapshots(); ++n) {
    const double t = traj.times[n];
    const auto& du = traj.du[n - 1];
    const double storage = std::inner_product(m.begin(), m.end(), du.begin(), 0.0);
    const double outflow = kappa * (traj.xi[n].front() + traj.xi[n].back());
    const Vec mg = ops.mass().apply(g(t).values);
    const auto hv = h(t);
    const double source = std::accumulate(mg.begin(), mg.end(), 0.0) + hv[0] + hv[1];
    const double scale =
        std::max({1.0, std::abs(storage), std::abs(outflow), std::abs(source)});
    worst = std::max(worst, std::abs(storage + outflow - source) / scale);
  }
  return worst;
}

RateFit fit_rate(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) {
    throw std::invalid_argument(fmt::format("fit_rate needs >= 3 points, got {}", points.size()));
  }
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& [p, e] : points) {
    if (!(p > 0.0) || !(e > 0.0) || !std::isfinite(p) || !std::isfinite(e)) {
      throw std::invalid_argument(fmt::format("fit_rate needs positive values, got ({}, {})", p, e));
    }
    sx += std::log(p);
    sy += std::log(e);
  }
  const double k = static_cast<double>(points.size());
  const double mx = sx / k;
  const double my = sy / k;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& [p, e] : points) {
    const double dx = std::log(p) - mx;
    const double dy = std::log(e) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_rate: parameter values are all equal");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

bool strictly_decreasing(std::span<const double> values) {
  for (std::size_t i = 1; i < values.size(); ++i) {
    const bool both_zero = values[i] == 0.0 && values[i - 1] == 0.0;
    if (!(values[i] < values[i - 1]) && !both_zero) return false;
  }
  return true;
}

void write_convergence_csv(std::ostream& out, const ConvergenceRecord& rec, bool header) {
  if (header) out << "sweep_id,scenario,param_name,param_value,cvstar_sq,duality_gap,l2h_xi_sq,slope,r2,error\n";
  const double slope = rec.fitted ? rec.fit.slope : std::nan("");
  const double r2 = rec.fitted ? rec.fit.r2 : std::nan("");
  for (std::size_t i = 0; i < rec.params.size(); ++i) {
    auto col = [](const std::vector<double>& v, std::size_t k) {
      return k < v.size() ? v[k] : std::nan("");
    };
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{}\n", rec.sweep_id, rec.scenario, rec.param_name,
               rec.params[i], col(rec.cvstar_sq, i), col(rec.duality_gap, i),
               col(rec.l2h_xi_sq, i), slope, r2, col(rec.error, i));
  }
}

void write_energy_header(std::ostream& out) {
  out << "scenario,eps,lambda";
  for (auto name : EnergyReport::kFieldNames) out << ',' << name;
  out << '\n';
}

void write_energy_row(std::ostream& out, std::string_view scenario, double eps, double lambda,
                      const EnergyReport& report) {
  fmt::print(out, "{},{},{}", scenario, eps, lambda);
  for (double v : report.values()) fmt::print(out, ",{}", v);
  out << '\n';
}

}  // namespace degdiff::analysis
