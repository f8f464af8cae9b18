#pragma once

// Scalar maximal monotone graphs: catalog, resolvents, Yosida approximations,
// Moreau-Yosida envelopes, and the anti-monotone perturbation pi_eps.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "degdiff/simd/kernels.hpp"

namespace degdiff::graphs {

struct Identity {};
struct Cubic {};
/// Enthalpy-temperature graph: slope_solid below 0, flat on [0, latent],
/// slope_liquid above latent.
struct Stefan {
  double slope_solid = 1.0;
  double latent = 1.0;
  double slope_liquid = 1.0;
};
/// beta(r) = |r|^{q-1} r with q > 1.
struct Porous {
  double exponent = 2.0;
};
/// beta(r) = |r|^{q-1} r with 0 < q < 1.
struct Fast {
  double exponent = 0.5;
};
/// Subdifferential of the indicator of [lo, hi].
struct DoubleObstacle {
  double lo = 0.0;
  double hi = 1.0;
};
/// beta(r) = -1/r on (0, inf), envelope -ln r.
struct PenroseFife {};

using GraphKind =
    std::variant<Identity, Cubic, Stefan, Porous, Fast, DoubleObstacle, PenroseFife>;

struct Interval {
  double lo;
  double hi;
  bool lo_open = false;
  bool hi_open = false;

  bool contains(double r) const {
    return (lo_open ? r > lo : r >= lo) && (hi_open ? r < hi : r <= hi);
  }
  bool closure_contains(double r) const { return r >= lo && r <= hi; }
};

/// Closed interval [lo, hi] of admissible selections of beta(r); lo/hi may be infinite.
struct Selection {
  double lo;
  double hi;
  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

struct GraphSpec {
  GraphKind kind;
  Interval domain;
  bool a2_holds = false;
  double c1 = 0.0;
  double c2 = 0.0;

  static GraphSpec identity();
  static GraphSpec cubic();
  static GraphSpec stefan(double slope_solid, double latent, double slope_liquid);
  static GraphSpec porous(double exponent);
  static GraphSpec fast(double exponent);
  static GraphSpec double_obstacle(double lo, double hi);
  static GraphSpec penrose_fife();

  /// Catalog id, e.g. "stefan:1,1,1"; parse_graph(id()) reproduces the spec.
  std::string id() const;
  bool is_piecewise_linear() const;
};

/// Parses a catalog id ("identity", "cubic", "stefan:k_s,L,k_l", "porous:q",
/// "fast:q", "double_obstacle:lo,hi", "penrose_fife").
/// Throws std::invalid_argument on unknown ids or out-of-range parameters.
GraphSpec parse_graph(std::string_view id);

/// Signals a resolvent root search that failed to bracket or converge. This
/// cannot happen for a monotone residual and indicates a bug.
class RootFindError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Convex envelope; +inf outside the closure of the domain.
double hat_beta(const GraphSpec& spec, double r);

/// beta(r) as a closed interval, or nullopt outside the domain.
std::optional<Selection> beta_set(const GraphSpec& spec, double r);

/// J_lambda(r) = (I + lambda beta)^{-1}(r).
double resolvent(const GraphSpec& spec, double lambda, double r);

/// beta_lambda(r) = (r - J_lambda(r)) / lambda.
double yosida(const GraphSpec& spec, double lambda, double r);

/// d/dr beta_lambda(r); a one-sided value at kinks.
double yosida_derivative(const GraphSpec& spec, double lambda, double r);

/// |r - J|^2 / (2 lambda) + hat_beta(J) with J = J_lambda(r).
double moreau_yosida(const GraphSpec& spec, double lambda, double r);

/// Nodewise Yosida value and derivative. Piecewise-linear graphs run through
/// the SIMD kernel table; the rest loop over the scalar routines.
void yosida_batch(const GraphSpec& spec, double lambda, std::span<const double> r,
                  std::span<double> xi, std::span<double> dxi);

/// PWL representation at a given lambda, or nullopt for curved graphs.
std::optional<simd::PwlGraph> as_pwl(const GraphSpec& spec, double lambda);

/// Largest admissible viscosity: min(1, 1/(2 c1)) when the growth bound holds, else 1.
double lambda_bar(const GraphSpec& spec);

// ---------------------------------------------------------------------------
// pi_eps = -c3 sigma(eps) r

enum class SigmaKind { sqrt, linear };

struct PiSpec {
  SigmaKind sigma = SigmaKind::sqrt;
  double c3 = 1.0;
};

double sigma(SigmaKind kind, double eps);
double pi_eps(const PiSpec& spec, double eps, double r);
double hat_pi_eps(const PiSpec& spec, double eps, double r);
/// Constant derivative of pi_eps.
double pi_eps_slope(const PiSpec& spec, double eps);

PiSpec parse_pi(std::string_view text);
std::string pi_id(const PiSpec& spec);

}  // namespace degdiff::graphs
