#include "degdiff/graphs.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <vector>

namespace degdiff::graphs {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const Interval kWholeLine{-kInf, kInf, true, true};

double signed_pow(double r, double q) { return std::copysign(std::pow(std::abs(r), q), r); }

// Single-valued beta and its derivative for the curved graphs.
double beta_value(const GraphKind& kind, double s) {
  return std::visit(overloaded{
                        [&](const Cubic&) { return s * s * s; },
                        [&](const Porous& p) { return signed_pow(s, p.exponent); },
                        [&](const Fast& p) { return signed_pow(s, p.exponent); },
                        [&](const PenroseFife&) { return -1.0 / s; },
                        [&](const auto&) -> double { throw std::logic_error("not a curved graph"); },
                    },
                    kind);
}

double beta_slope(const GraphKind& kind, double s) {
  return std::visit(
      overloaded{
          [&](const Cubic&) { return 3.0 * s * s; },
          [&](const Porous& p) { return p.exponent * std::pow(std::abs(s), p.exponent - 1.0); },
          [&](const Fast& p) {
            return s == 0.0 ? kInf : p.exponent * std::pow(std::abs(s), p.exponent - 1.0);
          },
          [&](const PenroseFife&) { return 1.0 / (s * s); },
          [&](const auto&) -> double { throw std::logic_error("not a curved graph"); },
      },
      kind);
}

// Solves s + lambda beta(s) = r for a curved graph: bracket by monotone
// expansion, bisect, then polish with at most five Newton steps.
double root_resolvent(const GraphSpec& spec, double lambda, double r) {
  const Interval& dom = spec.domain;
  auto phi = [&](double s) { return s + lambda * beta_value(spec.kind, s) - r; };

  const double start = dom.contains(r) ? r : dom.lo + std::max(1.0, std::abs(r));
  const double f0 = phi(start);
  if (f0 == 0.0) return start;

  double lo = start;
  double hi = start;
  constexpr int kMaxExpand = 2000;
  int it = 0;
  if (f0 > 0.0) {
    double step = std::max(1.0, std::abs(start));
    for (;; ++it) {
      if (it > kMaxExpand) throw RootFindError(fmt::format("resolvent: no lower bracket for r={}", r));
      double cand = start - step;
      if (!dom.contains(cand)) cand = dom.lo + 0.5 * (lo - dom.lo);
      if (phi(cand) <= 0.0) {
        lo = cand;
        break;
      }
      hi = cand;
      lo = cand;
      step *= 2.0;
    }
  } else {
    double step = std::max(1.0, std::abs(start));
    for (;; ++it) {
      if (it > kMaxExpand) throw RootFindError(fmt::format("resolvent: no upper bracket for r={}", r));
      double cand = start + step;
      if (!dom.contains(cand)) cand = dom.hi - 0.5 * (dom.hi - hi);
      if (phi(cand) >= 0.0) {
        hi = cand;
        break;
      }
      lo = cand;
      hi = cand;
      step *= 2.0;
    }
  }

  constexpr int kMaxBisect = 2200;
  for (int k = 0;; ++k) {
    if (k > kMaxBisect) throw RootFindError(fmt::format("resolvent: bisection stalled at r={}", r));
    const double width = hi - lo;
    if (width <= 1e-13 * std::max(std::abs(lo), std::abs(hi))) break;
    const double mid = lo + 0.5 * width;
    if (mid <= lo || mid >= hi) break;
    const double fm = phi(mid);
    if (fm == 0.0) return mid;
    (fm < 0.0 ? lo : hi) = mid;
  }

  double s = lo + 0.5 * (hi - lo);
  for (int k = 0; k < 5; ++k) {
    const double slope = 1.0 + lambda * beta_slope(spec.kind, s);
    if (!std::isfinite(slope)) break;
    const double next = s - phi(s) / slope;
    if (!(next >= lo && next <= hi)) break;
    if (next == s) break;
    s = next;
  }
  return s;
}

bool parse_number(std::string_view text, double& out) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size() && std::isfinite(out);
}

std::vector<double> parse_args(std::string_view id, std::string_view args, std::size_t count) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= args.size()) {
    const std::size_t comma = args.find(',', pos);
    const std::string_view piece =
        args.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    double v = 0.0;
    if (!parse_number(piece, v)) {
      throw std::invalid_argument(fmt::format("graph '{}': bad number '{}'", id, piece));
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (out.size() != count) {
    throw std::invalid_argument(
        fmt::format("graph '{}': expected {} parameter(s), got {}", id, count, out.size()));
  }
  return out;
}

}  // namespace

GraphSpec GraphSpec::identity() { return {Identity{}, kWholeLine, true, 0.5, 0.0}; }

GraphSpec GraphSpec::cubic() { return {Cubic{}, kWholeLine, true, 0.5, 0.25}; }

GraphSpec GraphSpec::stefan(double slope_solid, double latent, double slope_liquid) {
  if (!(slope_solid > 0.0) || !(slope_liquid > 0.0) || !(latent >= 0.0)) {
    throw std::invalid_argument("stefan: slopes must be positive and latent width nonnegative");
  }
  const double c1 = 0.25 * std::min(slope_solid, slope_liquid);
  const double c2 = 0.5 * slope_liquid * latent * latent;
  return {Stefan{slope_solid, latent, slope_liquid}, kWholeLine, true, c1, c2};
}

GraphSpec GraphSpec::porous(double exponent) {
  if (!(exponent > 1.0)) throw std::invalid_argument("porous: exponent must exceed 1");
  const double c = 1.0 / (exponent + 1.0);
  return {Porous{exponent}, kWholeLine, true, c, c};
}

GraphSpec GraphSpec::fast(double exponent) {
  if (!(exponent > 0.0 && exponent < 1.0)) {
    throw std::invalid_argument("fast: exponent must lie in (0,1)");
  }
  return {Fast{exponent}, kWholeLine, false, 0.0, 0.0};
}

GraphSpec GraphSpec::double_obstacle(double lo, double hi) {
  if (!(lo < hi) || lo > 0.0 || hi < 0.0) {
    throw std::invalid_argument("double_obstacle: need lo <= 0 <= hi and lo < hi");
  }
  return {DoubleObstacle{lo, hi}, Interval{lo, hi}, true, 1.0, std::max(lo * lo, hi * hi)};
}

GraphSpec GraphSpec::penrose_fife() {
  return {PenroseFife{}, Interval{0.0, kInf, true, true}, false, 0.0, 0.0};
}

std::string GraphSpec::id() const {
  return std::visit(
      overloaded{
          [](const Identity&) { return std::string("identity"); },
          [](const Cubic&) { return std::string("cubic"); },
          [](const Stefan& g) {
            return fmt::format("stefan:{},{},{}", g.slope_solid, g.latent, g.slope_liquid);
          },
          [](const Porous& g) { return fmt::format("porous:{}", g.exponent); },
          [](const Fast& g) { return fmt::format("fast:{}", g.exponent); },
          [](const DoubleObstacle& g) { return fmt::format("double_obstacle:{},{}", g.lo, g.hi); },
          [](const PenroseFife&) { return std::string("penrose_fife"); },
      },
      kind);
}

bool GraphSpec::is_piecewise_linear() const {
  return std::holds_alternative<Identity>(kind) || std::holds_alternative<Stefan>(kind) ||
         std::holds_alternative<DoubleObstacle>(kind);
}

GraphSpec parse_graph(std::string_view id) {
  const std::size_t colon = id.find(':');
  const std::string_view name = id.substr(0, colon);
  const std::string_view args =
      colon == std::string_view::npos ? std::string_view{} : id.substr(colon + 1);
  const bool has_args = colon != std::string_view::npos;

  if (name == "identity" && !has_args) return GraphSpec::identity();
  if (name == "cubic" && !has_args) return GraphSpec::cubic();
  if (name == "penrose_fife" && !has_args) return GraphSpec::penrose_fife();
  if (name == "stefan" && has_args) {
    const auto v = parse_args(id, args, 3);
    return GraphSpec::stefan(v[0], v[1], v[2]);
  }
  if (name == "porous" && has_args) return GraphSpec::porous(parse_args(id, args, 1)[0]);
  if (name == "fast" && has_args) return GraphSpec::fast(parse_args(id, args, 1)[0]);
  if (name == "double_obstacle" && has_args) {
    const auto v = parse_args(id, args, 2);
    return GraphSpec::double_obstacle(v[0], v[1]);
  }
  throw std::invalid_argument(fmt::format(
      "unknown graph '{}' (expected identity, cubic, stefan:k_s,L,k_l, porous:q, fast:q, "
      "double_obstacle:lo,hi, penrose_fife)",
      id));
}

std::optional<simd::PwlGraph> as_pwl(const GraphSpec& spec, double lambda) {
  auto make = [lambda](double a, double b, double k_lo, double k_hi) {
    auto contraction = [lambda](double k) { return std::isinf(k) ? 0.0 : 1.0 / (1.0 + lambda * k); };
    auto gain = [lambda](double k) { return std::isinf(k) ? 1.0 / lambda : k / (1.0 + lambda * k); };
    return simd::PwlGraph{a, b, contraction(k_lo), contraction(k_hi), gain(k_lo), gain(k_hi)};
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(
      overloaded{
          [&](const Identity&) -> std::optional<simd::PwlGraph> {
            return make(0.0, 0.0, 1.0, 1.0);
          },
          [&](const Stefan& g) -> std::optional<simd::PwlGraph> {
            return make(0.0, g.latent, g.slope_solid, g.slope_liquid);
          },
          [&](const DoubleObstacle& g) -> std::optional<simd::PwlGraph> {
            return make(g.lo, g.hi, inf, inf);
          },
          [](const auto&) -> std::optional<simd::PwlGraph> { return std::nullopt; },
      },
      spec.kind);
}

double hat_beta(const GraphSpec& spec, double r) {
  return std::visit(overloaded{
                        [&](const Identity&) { return 0.5 * r * r; },
                        [&](const Cubic&) { return 0.25 * r * r * r * r; },
                        [&](const Stefan& g) {
                          if (r < 0.0) return 0.5 * g.slope_solid * r * r;
                          if (r > g.latent) {
                            const double d = r - g.latent;
                            return 0.5 * g.slope_liquid * d * d;
                          }
                          return 0.0;
                        },
                        [&](const Porous& g) {
                          return std::pow(std::abs(r), g.exponent + 1.0) / (g.exponent + 1.0);
                        },
                        [&](const Fast& g) {
                          return std::pow(std::abs(r), g.exponent + 1.0) / (g.exponent + 1.0);
                        },
                        [&](const DoubleObstacle& g) {
                          return (r >= g.lo && r <= g.hi) ? 0.0 : kInf;
                        },
                        [&](const PenroseFife&) { return r > 0.0 ? -std::log(r) : kInf; },
                    },
                    spec.kind);
}

std::optional<Selection> beta_set(const GraphSpec& spec, double r) {
  if (!spec.domain.contains(r)) return std::nullopt;
  return std::visit(
      overloaded{
          [&](const Identity&) { return Selection{r, r}; },
          [&](const Stefan& g) {
            double v = 0.0;
            if (r < 0.0) v = g.slope_solid * r;
            if (r > g.latent) v = g.slope_liquid * (r - g.latent);
            return Selection{v, v};
          },
          [&](const DoubleObstacle& g) {
            const double lo = r == g.lo ? -kInf : 0.0;
            const double hi = r == g.hi ? kInf : 0.0;
            return Selection{lo, hi};
          },
          [&](const auto&) {
            const double v = beta_value(spec.kind, r);
            return Selection{v, v};
          },
      },
      spec.kind);
}

double resolvent(const GraphSpec& spec, double lambda, double r) {
  if (auto pwl = as_pwl(spec, lambda)) return simd::pwl_resolvent_point(*pwl, r);
  return root_resolvent(spec, lambda, r);
}

namespace {

// beta(J) equals the Yosida value wherever beta is single-valued at J and
// avoids the cancellation in (r - J) / lambda for small lambda.
double yosida_from_resolvent(const GraphSpec& spec, double lambda, double r, double s) {
  if (const auto sel = beta_set(spec, s); sel && sel->lo == sel->hi && std::isfinite(sel->lo)) {
    return sel->lo;
  }
  return (r - s) / lambda;
}

}  // namespace

double yosida(const GraphSpec& spec, double lambda, double r) {
  if (auto pwl = as_pwl(spec, lambda)) {
    double xi = 0.0;
    double dxi = 0.0;
    simd::pwl_yosida_point(*pwl, r, xi, dxi);
    return xi;
  }
  return yosida_from_resolvent(spec, lambda, r, root_resolvent(spec, lambda, r));
}

double yosida_derivative(const GraphSpec& spec, double lambda, double r) {
  if (auto pwl = as_pwl(spec, lambda)) {
    double xi = 0.0;
    double dxi = 0.0;
    simd::pwl_yosida_point(*pwl, r, xi, dxi);
    return dxi;
  }
  const double slope = beta_slope(spec.kind, root_resolvent(spec, lambda, r));
  if (std::isinf(slope)) return 1.0 / lambda;
  return slope / (1.0 + lambda * slope);
}

double moreau_yosida(const GraphSpec& spec, double lambda, double r) {
  const double s = resolvent(spec, lambda, r);
  const double d = r - s;
  return d * d / (2.0 * lambda) + hat_beta(spec, s);
}

void yosida_batch(const GraphSpec& spec, double lambda, std::span<const double> r,
                  std::span<double> xi, std::span<double> dxi) {
  if (auto pwl = as_pwl(spec, lambda)) {
    simd::active().pwl_yosida(*pwl, r.data(), xi.data(), dxi.data(), r.size());
    return;
  }
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double s = root_resolvent(spec, lambda, r[i]);
    xi[i] = yosida_from_resolvent(spec, lambda, r[i], s);
    const double slope = beta_slope(spec.kind, s);
    dxi[i] = std::isinf(slope) ? 1.0 / lambda : slope / (1.0 + lambda * slope);
  }
}

double lambda_bar(const GraphSpec& spec) {
  if (spec.a2_holds && spec.c1 > 0.0) return std::min(1.0, 1.0 / (2.0 * spec.c1));
  return 1.0;
}

double sigma(SigmaKind kind, double eps) {
  return kind == SigmaKind::sqrt ? std::sqrt(eps) : eps;
}

double pi_eps(const PiSpec& spec, double eps, double r) {
  return -spec.c3 * sigma(spec.sigma, eps) * r;
}

double hat_pi_eps(const PiSpec& spec, double eps, double r) {
  return -0.5 * spec.c3 * sigma(spec.sigma, eps) * r * r;
}

double pi_eps_slope(const PiSpec& spec, double eps) { return -spec.c3 * sigma(spec.sigma, eps); }

PiSpec parse_pi(std::string_view text) {
  // "sqrt:c3" or "linear:c3"; the coefficient defaults to 1.
  const std::size_t colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  PiSpec spec;
  if (name == "sqrt") {
    spec.sigma = SigmaKind::sqrt;
  } else if (name == "linear") {
    spec.sigma = SigmaKind::linear;
  } else {
    throw std::invalid_argument(fmt::format("unknown pi '{}' (expected sqrt[:c3] or linear[:c3])", text));
  }
  if (colon != std::string_view::npos) {
    spec.c3 = parse_args(text, text.substr(colon + 1), 1)[0];
    if (!(spec.c3 > 0.0)) throw std::invalid_argument("pi: c3 must be positive");
  }
  return spec;
}

std::string pi_id(const PiSpec& spec) {
  return fmt::format("{}:{}", spec.sigma == SigmaKind::sqrt ? "sqrt" : "linear", spec.c3);
}

}  // namespace degdiff::graphs
