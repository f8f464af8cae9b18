#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <sstream>

#include "degdiff/analysis.hpp"
#include "degdiff/errors.hpp"
#include "degdiff/experiments.hpp"
#include "degdiff/fem.hpp"
#include "degdiff/simd/kernels.hpp"
#include "degdiff/solver.hpp"

using namespace degdiff;
using fem::FemOperators;
using fem::Mesh1D;
using fem::PrimalField;
using Vec = std::vector<double>;

namespace {

Eigen::MatrixXd dense(const linalg::Tridiag& t) {
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - 1); j <= std::min(n - 1, i + 1); ++j) {
      d(i, j) = t.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  return d;
}

Eigen::VectorXd ev(const Vec& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

Vec random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Vec v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

solver::ChParams identity_params(double eps, double lambda, double kappa, double tau, double T) {
  solver::ChParams p;
  p.eps = eps;
  p.lambda = lambda;
  p.kappa = kappa;
  p.tau = tau;
  p.T = T;
  p.graph = graphs::GraphSpec::identity();
  p.pi = {graphs::SigmaKind::sqrt, 1.0};
  return p;
}

solver::BulkData zero_bulk(const Mesh1D& mesh) {
  return [n = mesh.num_nodes()](double) { return PrimalField{Vec(n, 0.0)}; };
}

solver::BoundaryData zero_boundary() {
  return [](double) { return std::array<double, 2>{0.0, 0.0}; };
}

}  // namespace

TEST_CASE("parameter validation") {
  auto p = identity_params(0.1, 0.1, 1.0, 0.01, 0.1);
  CHECK_NOTHROW(p.validate());
  p.eps = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = identity_params(0.1, 0.1, 1.0, 0.03, 0.1);
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = identity_params(0.1, 0.1, 1.0, 0.2, 0.1);
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK(solver::step_count(0.1, 1e-3) == 100);
}

TEST_CASE("zero state is a fixed point") {
  const FemOperators ops(Mesh1D(0, 1, 8), 1.0);
  const auto p = identity_params(0.2, 0.1, 1.0, 0.01, 0.1);
  solver::ChState s;
  s.u = PrimalField{Vec(9, 0.0)};
  s.mu = PrimalField{Vec(9, 0.0)};
  const auto next = solver::ch_step(ops, p, s, PrimalField{Vec(9, 0.0)});
  for (double v : next.u.values) CHECK(v == 0.0);
  for (double v : next.mu.values) CHECK(v == 0.0);

  const auto traj = solver::march_ch(ops, p, PrimalField{Vec(9, 0.0)}, solver::zero_forcing(ops));
  CHECK(traj.num_steps() == 10);
  for (const auto& u : traj.u) {
    for (double v : u) CHECK(v == 0.0);
  }
  const auto lim = solver::limit_march(ops, solver::LimitParams{}, zero_bulk(ops.mesh()), zero_boundary(),
                                       PrimalField{Vec(9, 0.0)});
  for (const auto& u : lim.u) {
    for (double v : u) CHECK(v == 0.0);
  }
}

TEST_CASE("one relaxed step matches a dense monolithic solve") {
  // identity graph, eps = lambda = kappa = 1, four cells
  const double eps = 1.0;
  const double lambda = 1.0;
  const double kappa = 1.0;
  const double tau = 0.05;
  const FemOperators ops(Mesh1D(0, 1, 4), kappa);
  const auto p = identity_params(eps, lambda, kappa, tau, tau);
  std::mt19937_64 rng(17);
  const Vec u = random_vec(rng, 5);
  const Vec f = random_vec(rng, 5);

  const Eigen::MatrixXd A = dense(ops.robin());
  const Eigen::VectorXd m = ev(ops.lumped_mass());
  const Eigen::MatrixXd ML = m.asDiagonal();
  const double c = 1.0 / (1.0 + lambda) - std::sqrt(eps);  // beta_lambda' + pi'
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(10, 10);
  Eigen::VectorXd rhs(10);
  S.block(0, 0, 5, 5) = ML / tau;
  S.block(0, 5, 5, 5) = A;
  S.block(5, 0, 5, 5) = -(lambda / tau) * ML - eps * A - c * ML;
  S.block(5, 5, 5, 5) = ML;
  rhs.head(5) = ML * ev(u) / tau;
  rhs.tail(5) = -(lambda / tau) * ML * ev(u) - ML * ev(f);
  const Eigen::VectorXd x = S.fullPivLu().solve(rhs);

  solver::ChState s;
  s.u = PrimalField{u};
  s.mu = PrimalField{Vec(5, 0.0)};
  const auto next = solver::ch_step(ops, p, s, PrimalField{f});
  CHECK((ev(next.u.values) - x.head(5)).norm() <= 1e-10 * x.head(5).norm());
  CHECK((ev(next.mu.values) - x.tail(5)).norm() <= 1e-10 * x.tail(5).norm());
}

TEST_CASE("ch_step refuses operators assembled with a different kappa") {
  const FemOperators ops(Mesh1D(0, 1, 4), 2.0);
  const auto p = identity_params(0.1, 0.1, 1.0, 0.01, 0.01);
  solver::ChState s;
  s.u = PrimalField{Vec(5, 0.0)};
  CHECK_THROWS_AS(solver::ch_step(ops, p, s, PrimalField{Vec(5, 0.0)}), ConfigError);
}

TEST_CASE("relaxed march conserves mass up to the boundary flux") {
  for (const auto& id : experiments::scenario_ids()) {
    const auto scn = experiments::make_scenario(id);
    const FemOperators ops(Mesh1D(0, 1, 32), scn.kappa);
    solver::ChParams p;
    p.eps = 0.05;
    p.lambda = 0.01;
    p.kappa = scn.kappa;
    p.tau = 1e-2;
    p.T = 0.1;
    p.graph = scn.graph;
    p.pi = scn.pi;
    const auto u0e = solver::initial_smoothing(ops, scn.initial(ops.mesh()), p.eps);
    const auto traj = solver::march_ch(ops, p, u0e, solver::make_forcing(ops, scn.bulk(ops.mesh()), scn.boundary()));
    CAPTURE(id);
    CHECK(analysis::ch_flux_balance(ops, traj) <= 1e-10);
    CHECK(traj.max_newton_iterations <= 15);
  }
}

TEST_CASE("linear relaxed march agrees with an eigen-decomposition oracle") {
  // With beta = identity the lumped scheme diagonalizes in the eigenbasis of
  // A v = nu M_L v, and each step maps a_k -> a_k / (1 + tau omega_k) with
  // omega_k = nu_k (eps nu_k + c) / (1 + lambda nu_k), c = 1/(1+lambda) - sqrt(eps).
  const double eps = 0.04;
  const double lambda = 0.02;
  const double kappa = 1.5;
  const FemOperators ops(Mesh1D(0, 1, 16), kappa);
  const Eigen::MatrixXd A = dense(ops.robin());
  const Eigen::VectorXd m = ev(ops.lumped_mass());
  const Eigen::MatrixXd ML = m.asDiagonal();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, ML);
  const Eigen::VectorXd nu = es.eigenvalues();
  const Eigen::MatrixXd V = es.eigenvectors();  // V^T M_L V = I
  const double c = 1.0 / (1.0 + lambda) - std::sqrt(eps);
  auto omega = [&](double n) { return n * (eps * n + c) / (1.0 + lambda * n); };

  std::mt19937_64 rng(99);
  const Vec u0 = random_vec(rng, ops.size());
  const Eigen::VectorXd a0 = V.transpose() * ML * ev(u0);
  const double T = 0.2;

  double prev_err = 0.0;
  for (double tau : {0.02, 0.01, 0.005}) {
    const auto p = identity_params(eps, lambda, kappa, tau, T);
    const auto traj = solver::march_ch(ops, p, PrimalField{u0}, solver::zero_forcing(ops));
    const int steps = solver::step_count(T, tau);
    Eigen::VectorXd a_disc = a0;
    Eigen::VectorXd a_cont = a0;
    for (Eigen::Index k = 0; k < nu.size(); ++k) {
      a_disc(k) = a0(k) * std::pow(1.0 / (1.0 + tau * omega(nu(k))), steps);
      a_cont(k) = a0(k) * std::exp(-omega(nu(k)) * T);
    }
    const Eigen::VectorXd u_disc = V * a_disc;
    const Eigen::VectorXd u_cont = V * a_cont;
    const Eigen::VectorXd uT = ev(traj.u.back());
    CHECK((uT - u_disc).norm() <= 1e-9 * u_disc.norm());
    const double err = (uT - u_cont).norm();
    if (prev_err > 0.0) CHECK(std::log2(prev_err / err) == doctest::Approx(1.0).epsilon(0.2));
    prev_err = err;
  }
}

TEST_CASE("S1 limit march tracks the manufactured solution at O(tau + h^2)") {
  const auto scn = experiments::make_scenario("S1");
  auto run_err = [&](int n, double tau, double T) {
    const FemOperators ops(Mesh1D(0, 1, n), scn.kappa);
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
  };
  // time: fine mesh, halve tau
  const double e1 = run_err(256, 0.05, 0.5);
  const double e2 = run_err(256, 0.025, 0.5);
  CHECK(std::log2(e1 / e2) == doctest::Approx(1.0).epsilon(0.2));
  // space: tiny tau, halve h
  const double s1 = run_err(8, 1e-4, 0.05);
  const double s2 = run_err(16, 1e-4, 0.05);
  CHECK(std::log2(s1 / s2) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("limit march balance laws") {
  for (const auto& id : experiments::scenario_ids()) {
    const auto scn = experiments::make_scenario(id);
    for (auto scheme : {solver::BoundaryScheme::robin, solver::BoundaryScheme::neumann}) {
      const bool robin = scheme == solver::BoundaryScheme::robin;
      const FemOperators ops(Mesh1D(0, 1, 32), robin ? scn.kappa : 0.0);
      solver::LimitParams p;
      p.scheme = scheme;
      p.graph = scn.graph;
      p.tau = 1e-2;
      p.T = 0.1;
      const auto traj = solver::limit_march(ops, p, scn.bulk(ops.mesh()), scn.boundary(), scn.initial(ops.mesh()));
      CAPTURE(id);
      CHECK(analysis::limit_flux_balance(ops, traj, scheme, scn.bulk(ops.mesh()), scn.boundary()) <= 1e-10);
      CHECK(traj.max_newton_iterations <= 15);
    }
  }
  const FemOperators neumann(Mesh1D(0, 1, 20), 0.0);
  solver::LimitParams p;
  CHECK_THROWS_AS(solver::limit_march(neumann, p, zero_bulk(neumann.mesh()), zero_boundary(),
                                      PrimalField{Vec(21, 0.0)}),
                  ConfigError);
}

TEST_CASE("Neumann march without data conserves mass") {
  const FemOperators ops(Mesh1D(0, 1, 24), 0.0);
  solver::LimitParams p;
  p.scheme = solver::BoundaryScheme::neumann;
  p.graph = graphs::GraphSpec::porous(2.0);
  p.tau = 0.01;
  p.T = 0.2;
  const auto u0 = fem::interpolate(ops.mesh(), [](double x) { return x < 0.4 ? 1.0 : 0.1; });
  const auto traj = solver::limit_march(ops, p, zero_bulk(ops.mesh()), zero_boundary(), u0);
  auto mass = [&](const Vec& u) {
    const auto mu = ops.mass().apply(u);
    double s = 0.0;
    for (double v : mu) s += v;
    return s;
  };
  const double m0 = mass(traj.u.front());
  for (const auto& u : traj.u) CHECK(mass(u) == doctest::Approx(m0).epsilon(1e-10));
}

TEST_CASE("limit problem contracts in V*") {
  const auto scn = experiments::make_scenario("S3");
  const FemOperators ops(Mesh1D(0, 1, 32), scn.kappa);
  solver::LimitParams p;
  p.graph = scn.graph;
  p.tau = 1e-2;
  p.T = 0.2;
  const auto u1 = scn.initial(ops.mesh());
  auto u2 = u1;
  for (std::size_t i = 0; i < u2.size(); ++i) u2[i] += 0.3 * std::sin(7.0 * ops.mesh().x(i));
  const auto t1 = solver::limit_march(ops, p, scn.bulk(ops.mesh()), scn.boundary(), u1);
  const auto t2 = solver::limit_march(ops, p, scn.bulk(ops.mesh()), scn.boundary(), u2);
  auto vstar_lumped = [&](const Vec& a, const Vec& b) {
    fem::DualField l{Vec(a.size())};
    for (std::size_t i = 0; i < a.size(); ++i) l[i] = ops.lumped_mass()[i] * (a[i] - b[i]);
    return fem::vstar_norm(ops, l);
  };
  double prev = vstar_lumped(t1.u.front(), t2.u.front());
  for (std::size_t n = 1; n < t1.num_snapshots(); ++n) {
    const double d = vstar_lumped(t1.u[n], t2.u[n]);
    CHECK(d <= prev + 1e-8);
    prev = d;
  }
}

TEST_CASE("initial smoothing") {
  const FemOperators neumann(Mesh1D(0, 1, 16), 0.0);
  for (double v : solver::initial_smoothing(neumann, PrimalField{Vec(17, 2.0)}, 0.1).values) {
    CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
  }
  const FemOperators ops(Mesh1D(0, 1, 16), 1.0);
  for (double v : solver::initial_smoothing(ops, PrimalField{Vec(17, 0.0)}, 0.1).values) CHECK(v == 0.0);

  // dense oracle with kappa > 0
  const Eigen::MatrixXd M = dense(ops.mass());
  const Eigen::MatrixXd F = dense(ops.robin());
  const Vec u0(17, 2.0);
  const Eigen::VectorXd want = (M + std::sqrt(0.1) * F).fullPivLu().solve(M * ev(u0));
  CHECK((ev(solver::initial_smoothing(ops, PrimalField{u0}, 0.1).values) - want).norm() <= 1e-12 * want.norm());

  const auto u = fem::interpolate(ops.mesh(), [](double x) { return x < 0.5 ? 1.0 : 0.0; });
  double prev = 1e300;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const auto s = solver::initial_smoothing(ops, u, eps);
    Vec d(u.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = s[i] - u[i];
    const double e = std::sqrt(fem::h_norm_sq(ops, d));
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("identical inputs give bit-identical trajectories") {
  const auto scn = experiments::make_scenario("S2");
  const FemOperators ops(Mesh1D(0, 1, 32), scn.kappa);
  solver::ChParams p;
  p.eps = 0.01;
  p.lambda = 1e-4;
  p.kappa = scn.kappa;
  p.tau = 1e-2;
  p.T = 0.1;
  p.graph = scn.graph;
  p.pi = scn.pi;
  auto run = [&] {
    const auto u0e = solver::initial_smoothing(ops, scn.initial(ops.mesh()), p.eps);
    return solver::march_ch(ops, p, u0e, solver::make_forcing(ops, scn.bulk(ops.mesh()), scn.boundary()));
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.u == b.u);
  CHECK(a.mu == b.mu);
  std::ostringstream sa;
  std::ostringstream sb;
  solver::write_trajectory_csv(sa, ops.mesh(), a);
  solver::write_trajectory_csv(sb, ops.mesh(), b);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("step,t,node_index,x,u,mu,xi\n", 0) == 0);
}

TEST_CASE("scalar and AVX2 kernels give the same trajectory up to reduction order") {
  if (!simd::isa_available(simd::Isa::avx2)) return;
  const auto scn = experiments::make_scenario("S5");
  const FemOperators ops(Mesh1D(0, 1, 40), scn.kappa);
  solver::LimitParams p;
  p.graph = scn.graph;
  p.tau = 1e-2;
  p.T = 0.1;
  const simd::Isa before = simd::active().isa;
  auto run = [&](simd::Isa isa) {
    simd::select(isa);
    return solver::limit_march(ops, p, scn.bulk(ops.mesh()), scn.boundary(), scn.initial(ops.mesh()));
  };
  const auto a = run(simd::Isa::scalar);
  const auto b = run(simd::Isa::avx2);
  simd::select(before);
  for (std::size_t n = 0; n < a.num_snapshots(); ++n) {
    for (std::size_t i = 0; i < ops.size(); ++i) {
      CHECK(a.u[n][i] == doctest::Approx(b.u[n][i]).epsilon(1e-10).scale(1.0));
    }
  }
}
