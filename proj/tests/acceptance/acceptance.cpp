// Acceptance run: one line per criterion, nonzero exit if any criterion fails.

#include <fmt/format.h>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "degdiff/analysis.hpp"
#include "degdiff/config.hpp"
#include "degdiff/experiments.hpp"
#include "degdiff/fem.hpp"
#include "degdiff/graphs.hpp"
#include "degdiff/run.hpp"
#include "degdiff/simd/kernels.hpp"
#include "degdiff/solver.hpp"

using namespace degdiff;
using fem::FemOperators;
using fem::Mesh1D;
using fem::PrimalField;
using Vec = std::vector<double>;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int jobs() { return static_cast<int>(std::clamp(std::thread::hardware_concurrency(), 1u, 16u)); }

Eigen::VectorXd ev(const Vec& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

// Hand-assembled P1 matrices on [0, 1].
struct Dense {
  Eigen::MatrixXd M, K, B;
  Eigen::VectorXd m;
};

Dense dense_p1(int cells) {
  const int n = cells + 1;
  const double h = 1.0 / cells;
  Dense d{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n),
          Eigen::VectorXd::Zero(n)};
  for (int e = 0; e < cells; ++e) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        d.M(e + a, e + b) += h / 6.0 * (a == b ? 2.0 : 1.0);
        d.K(e + a, e + b) += (a == b ? 1.0 : -1.0) / h;
      }
      d.m(e + a) += h / 2.0;
    }
  }
  d.B(0, 0) = 1.0;
  d.B(n - 1, n - 1) = 1.0;
  return d;
}

solver::ChParams ch_params(const experiments::Scenario& scn, double eps, double tau, double T) {
  solver::ChParams p;
  p.eps = eps;
  p.lambda = std::min(graphs::lambda_bar(scn.graph), eps * eps);
  p.kappa = scn.kappa;
  p.tau = tau;
  p.T = T;
  p.graph = scn.graph;
  p.pi = scn.pi;
  return p;
}

Verdict ac1() {
  const std::vector<graphs::GraphSpec> catalog{
      graphs::GraphSpec::identity(),          graphs::GraphSpec::cubic(),
      graphs::GraphSpec::stefan(1, 1, 1),     graphs::GraphSpec::stefan(0.5, 2.0, 3.0),
      graphs::GraphSpec::porous(2.0),         graphs::GraphSpec::porous(3.0),
      graphs::GraphSpec::fast(0.5),           graphs::GraphSpec::fast(0.25),
      graphs::GraphSpec::double_obstacle(0, 1), graphs::GraphSpec::penrose_fife()};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ur(-10.0, 10.0);
  std::uniform_real_distribution<double> ul(-4.0, 0.0);
  int samples = 0;
  int failures = 0;
  double worst_identity = 0.0;
  double worst_fd = 0.0;
  for (const auto& g : catalog) {
    for (int k = 0; k < 120; ++k, ++samples) {
      const double lambda = std::pow(10.0, ul(rng));
      const double r1 = ur(rng);
      const double r2 = ur(rng);
      const double j1 = graphs::resolvent(g, lambda, r1);
      const double j2 = graphs::resolvent(g, lambda, r2);
      const double b1 = graphs::yosida(g, lambda, r1);
      const double b2 = graphs::yosida(g, lambda, r2);
      const double id = std::abs(r1 - j1 - lambda * b1);
      worst_identity = std::max(worst_identity, id);
      bool ok = id <= 1e-10;
      ok = ok && std::abs(j1 - j2) <= std::abs(r1 - r2) * (1.0 + 1e-12) + 1e-14;
      ok = ok && std::abs(b1 - b2) <= std::abs(r1 - r2) / lambda * (1.0 + 1e-9) + 1e-9;
      const double env = graphs::moreau_yosida(g, lambda, r1);
      const double hb = graphs::hat_beta(g, r1);
      ok = ok && (!std::isfinite(hb) || env <= hb + 1e-12 * std::max(1.0, std::abs(hb)));
      // derivative of the envelope; step scaled with lambda keeps truncation below 1e-4
      const double d = 1e-4 * lambda;
      const double fd = (graphs::moreau_yosida(g, lambda, r1 + d) - graphs::moreau_yosida(g, lambda, r1 - d)) / (2 * d);
      const double fd_err = std::abs(fd - b1) / std::max(1.0, std::abs(b1));
      worst_fd = std::max(worst_fd, fd_err);
      ok = ok && fd_err <= 1e-4;
      if (!ok) ++failures;
    }
  }
  return {failures == 0 && samples >= 1000,
          fmt::format("{} samples over {} graphs, {} failing; max |r-J-lambda*beta| {:.1e}, max fd mismatch {:.1e}",
                      samples, catalog.size(), failures, worst_identity, worst_fd)};
}

Verdict ac2() {
  const int cells = 4;
  const double kappa = 0.8;
  const FemOperators ops(Mesh1D(0, 1, cells), kappa);
  const auto d = dense_p1(cells);
  const Eigen::MatrixXd F = d.K + kappa * d.B;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  Vec z(cells + 1), l(cells + 1);
  for (auto& v : z) v = ud(rng);
  for (auto& v : l) v = ud(rng);

  const double e_apply = rel(ev(fem::duality_map(ops, PrimalField{z}).values), F * ev(z));
  const Eigen::VectorXd zs = F.fullPivLu().solve(ev(l));
  const double e_solve = rel(ev(fem::duality_solve(ops, fem::DualField{l}).values), zs);
  const double vs_ref = std::sqrt(ev(l).dot(zs));
  const double e_vstar = std::abs(fem::vstar_norm(ops, fem::DualField{l}) - vs_ref) / vs_ref;

  // one relaxed step, identity graph, eliminated against the monolithic (u, mu) system
  solver::ChParams p;
  p.eps = 0.5;
  p.lambda = 0.3;
  p.kappa = kappa;
  p.tau = 0.1;
  p.T = 0.1;
  p.graph = graphs::GraphSpec::identity();
  p.pi = {graphs::SigmaKind::sqrt, 1.0};
  Vec f(cells + 1);
  for (auto& v : f) v = ud(rng);
  const int n = cells + 1;
  const Eigen::MatrixXd ML = d.m.asDiagonal();
  const double slope = 1.0 / (1.0 + p.lambda) - std::sqrt(p.eps);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  Eigen::VectorXd rhs(2 * n);
  S.block(0, 0, n, n) = ML / p.tau;
  S.block(0, n, n, n) = F;
  S.block(n, 0, n, n) = -(p.lambda / p.tau) * ML - p.eps * F - slope * ML;
  S.block(n, n, n, n) = ML;
  rhs.head(n) = ML * ev(z) / p.tau;
  rhs.tail(n) = -(p.lambda / p.tau) * ML * ev(z) - ML * ev(f);
  const Eigen::VectorXd x = S.fullPivLu().solve(rhs);
  solver::ChState s;
  s.u = PrimalField{z};
  s.mu = PrimalField{Vec(n, 0.0)};
  const auto next = solver::ch_step(ops, p, s, PrimalField{f});
  const double e_step = std::max(rel(ev(next.u.values), x.head(n)), rel(ev(next.mu.values), x.tail(n)));

  const double worst = std::max({e_apply, e_solve, e_vstar, e_step});
  return {worst <= 1e-10, fmt::format("rel errors: F-apply {:.1e}, F-solve {:.1e}, V* norm {:.1e}, ch_step {:.1e}",
                                      e_apply, e_solve, e_vstar, e_step)};
}

Verdict ac3() {
  double flux_ch = 0.0;
  double flux_lim = 0.0;
  double lyap = -1e300;
  double gap_min = 1e300;
  int newton = 0;
  bool finite = true;
  for (const auto& id : experiments::scenario_ids()) {
    const auto scn = experiments::make_scenario(id);
    const FemOperators ops(Mesh1D(scn.a, scn.b, 32), scn.kappa);
    const auto p = ch_params(scn, 0.1, 1e-2, 0.1);
    const auto u0e = solver::initial_smoothing(ops, scn.initial(ops.mesh()), p.eps);
    const auto ch = solver::march_ch(ops, p, u0e, solver::make_forcing(ops, scn.bulk(ops.mesh()), scn.boundary()));
    flux_ch = std::max(flux_ch, analysis::ch_flux_balance(ops, ch));

    solver::LimitParams lp;
    lp.graph = scn.graph;
    lp.tau = p.tau;
    lp.T = p.T;
    const auto lim = solver::limit_march(ops, lp, scn.bulk(ops.mesh()), scn.boundary(), u0e);
    flux_lim = std::max(flux_lim, analysis::limit_flux_balance(ops, lim, solver::BoundaryScheme::robin,
                                                               scn.bulk(ops.mesh()), scn.boundary()));
    gap_min = std::min(gap_min, analysis::duality_gap(ops, ch, lim));

    const auto free = solver::march_ch(ops, p, u0e, solver::zero_forcing(ops));
    lyap = std::max(lyap, analysis::lyapunov_check(ops, free, p, 1e-12).worst_violation);

    for (double v : analysis::energy_report(ops, ch, p).values()) finite = finite && std::isfinite(v) && v >= 0.0;
    newton = std::max({newton, ch.max_newton_iterations, lim.max_newton_iterations, free.max_newton_iterations});
  }
  const bool ok = flux_ch <= 1e-10 && flux_lim <= 1e-10 && lyap <= 1e-12 && gap_min >= -1e-10 && finite && newton <= 15;
  return {ok, fmt::format("S1-S5: flux balance relaxed {:.1e}, limit {:.1e}; max energy increase {:.1e}; "
                          "min duality gap {:.2e}; newton max {}",
                          flux_ch, flux_lim, lyap, gap_min, newton)};
}

double s1_error(int cells, double tau, double T) {
  const auto scn = experiments::make_scenario("S1");
  const FemOperators ops(Mesh1D(scn.a, scn.b, cells), scn.kappa);
  solver::LimitParams p;
  p.tau = tau;
  p.T = T;
  const auto traj = solver::limit_march(ops, p, scn.bulk(ops.mesh()), scn.boundary(), scn.initial(ops.mesh()));
  Vec d(ops.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = traj.u.back()[i] - scn.exact(ops.mesh().x(i), T);
  const auto md = ops.mass().apply(d);
  double e = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) e += md[i] * d[i];
  return std::sqrt(e);
}

Verdict ac4() {
  std::vector<double> et, es;
  for (double tau : {1.0 / 20, 1.0 / 40, 1.0 / 80}) et.push_back(s1_error(512, tau, 0.5));
  for (int n : {4, 8, 16}) es.push_back(s1_error(n, 1e-5, 0.1));
  const double t1 = std::log2(et[0] / et[1]);
  const double t2 = std::log2(et[1] / et[2]);
  const double s1 = std::log2(es[0] / es[1]);
  const double s2 = std::log2(es[1] / es[2]);
  const bool ok = std::abs(t1 - 1) <= 0.2 && std::abs(t2 - 1) <= 0.2 && std::abs(s1 - 2) <= 0.3 &&
                  std::abs(s2 - 2) <= 0.3;
  return {ok, fmt::format("temporal orders {:.3f}, {:.3f} (n=512, T=0.5); spatial orders {:.3f}, {:.3f} (tau=1e-5, T=0.1)",
                          t1, t2, s1, s2)};
}

experiments::Discretization sweep_disc() {
  experiments::Discretization d;
  d.n_cells = 64;
  d.tau = 1e-3;
  d.T = 0.1;
  d.jobs = jobs();
  return d;
}

const std::vector<double> kEps{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};

std::string slope_text(const analysis::ConvergenceRecord& r) {
  return fmt::format("{} slope {:.3f} (r2 {:.3f}), {}", r.scenario, r.fit.slope, r.fit.r2,
                     r.monotone ? "decreasing" : "NOT decreasing");
}

Verdict ac5() {
  const auto a = experiments::sweep_eps(experiments::make_scenario("S1"), sweep_disc(), kEps);
  const auto b = experiments::sweep_eps(experiments::make_scenario("S3"), sweep_disc(), kEps);
  const bool ok = a.fitted && b.fitted && a.monotone && b.monotone && a.fit.slope >= 0.23 && b.fit.slope >= 0.23;
  return {ok, fmt::format("{}; {}; need >= 0.23", slope_text(a), slope_text(b))};
}

Verdict ac6() {
  const auto a = experiments::sweep_eps(experiments::make_scenario("S4"), sweep_disc(), kEps);
  const bool ok = a.fitted && a.monotone && a.fit.slope >= 0.40;
  return {ok, fmt::format("{}; need >= 0.40", slope_text(a))};
}

Verdict ac7() {
  const auto a = experiments::sweep_kappa(experiments::make_scenario("S1"), sweep_disc(),
                                          std::vector<double>{0.2, 0.1, 0.05, 0.025});
  const bool ok = a.fitted && a.xi_fitted && a.fit.slope >= 1.8 && a.xi_fit.slope >= 1.8;
  return {ok, fmt::format("S1 slope of cvstar^2 + 2 gap {:.3f} (r2 {:.3f}), l2h xi slope {:.3f}; need >= 1.8",
                          a.fit.slope, a.fit.r2, a.xi_fit.slope)};
}

Verdict ac8() {
  const std::vector<double> eps{1e-1, 1e-2, 1e-3};
  const std::vector<double> lam{1e-2, 1e-3, 1e-4};
  bool ok = true;
  std::string detail;
  for (const char* id : {"S1", "S2"}) {
    const auto rep = experiments::uniform_bound_audit(experiments::make_scenario(id), sweep_disc(), eps, lam);
    ok = ok && rep.passes(10.0);
    std::size_t worst = 0;
    for (std::size_t k = 0; k < rep.ratios.size(); ++k) {
      if (rep.ratios[k] > rep.ratios[worst]) worst = k;
    }
    int failed_cells = 0;
    for (const auto& c : rep.cells) failed_cells += c.report ? 0 : 1;
    detail += fmt::format("{}{}: max ratio {:.2f} ({}), failed cells {}", detail.empty() ? "" : "; ", id,
                          rep.max_ratio, analysis::EnergyReport::kFieldNames[worst], failed_cells);
    if (rep.route == experiments::Route::a6) detail += fmt::format(", m4 ratio {:.2f}", rep.m4_ratio);
  }
  return {ok, detail + "; need <= 10"};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict ac9() {
  const auto s1 = experiments::make_scenario("S1");
  const auto d = sweep_disc();
  const auto u = experiments::uniqueness_probe(s1, d, 0.01, std::vector<double>{1e-3, 1e-4},
                                               std::vector<double>{3e-4, 1e-4});
  // a pair with distinct terminal lambdas
  const auto v = experiments::uniqueness_probe(s1, d, 0.01, std::vector<double>{1e-2, 1e-3, 1e-4},
                                               std::vector<double>{5e-3, 5e-4, 5e-5});

  const std::string text = R"(command = uniqueness
[scenario]
id = S1
[params]
eps = 0.01
[sweep]
lambda_list = 1e-2, 1e-3, 1e-4
lambda_list_b = 5e-3, 5e-4, 5e-5
)";
  const auto dir = std::filesystem::temp_directory_path();
  const auto a = dir / "degdiff_acceptance_a.csv";
  const auto b = dir / "degdiff_acceptance_b.csv";
  std::ostringstream sink;
  RunOptions oa;
  oa.out = a.string();
  RunOptions ob;
  ob.out = b.string();
  ob.jobs = jobs();
  const int ra = run(config::parse_config(text), oa, sink, sink);
  const int rb = run(config::parse_config(text), ob, sink, sink);
  const bool same = ra == kOk && rb == kOk && read_file(a) == read_file(b) && !read_file(a).empty();
  std::filesystem::remove(a);
  std::filesystem::remove(b);

  const bool ok = u.within_bound && v.within_bound && same;
  return {ok, fmt::format("paths {{1e-3,1e-4}} vs {{3e-4,1e-4}}: deviation {:.2e}, gap {:.2e}; "
                          "{{1e-2,1e-3,1e-4}} vs {{5e-3,5e-4,5e-5}}: deviation {:.2e}, gap {:.2e}; csv {}",
                          u.deviation, u.cauchy_gap, v.deviation, v.cauchy_gap,
                          same ? "byte-identical" : "DIFFERS")};
}

struct Criterion {
  const char* id;
  const char* title;
  double limit_s;  // 0: no runtime bound
  std::function<Verdict()> check;
};

}  // namespace

int main() {
  fmt::print("degdiff acceptance, kernels: {}\n", simd::isa_name(simd::active().isa));
  const std::vector<Criterion> criteria{
      {"AC1", "graph property suite", 5.0, ac1},
      {"AC2", "FEM dense-oracle equivalence", 1.0, ac2},
      {"AC3", "per-step structural identities", 30.0, ac3},
      {"AC4", "S1 temporal and spatial order", 0.0, ac4},
      {"AC5", "eps rate, general data (S1, S3)", 120.0, ac5},
      {"AC6", "eps rate, homogeneous boundary data (S4)", 120.0, ac6},
      {"AC7", "kappa rate (S1)", 60.0, ac7},
      {"AC8", "uniform-bound audit (S1, S2)", 120.0, ac8},
      {"AC9", "uniqueness probe and reproducible csv", 0.0, ac9},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s <= 0.0 || secs < c.limit_s;
    const bool pass = v.pass && in_time;
    if (!pass) ++failed;
    const std::string timing =
        c.limit_s > 0.0 ? fmt::format("{:.2f} s, limit {:g} s", secs, c.limit_s) : fmt::format("{:.2f} s", secs);
    fmt::print("[{}] {} {}: {} ({})\n", pass ? "PASS" : "FAIL", c.id, c.title, v.detail, timing);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
