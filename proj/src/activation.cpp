#include "sharpflow/activation.hpp"

#include "sharpflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sharpflow {

namespace {

int degree(const ActivationSpec& s) { return s.kind == ActivationKind::Cube ? 3 : 2 * s.k + 1; }
double shift(const ActivationSpec& s) { return s.kind == ActivationKind::Cube ? 0.0 : s.nu; }

double ipow(double z, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= z;
  return r;
}

// Safeguarded Newton on a strictly increasing function g.  The bracket grows
// geometrically until it straddles the target, then each iterate is either a
// Newton step that stays inside the bracket or a bisection.
template <class G>
double monotone_solve(G g, double target, const char* what) {
  const double tol = 1e-12 * std::max(1.0, std::abs(target));
  double lo = -1.0, hi = 1.0;
  bool bracketed = false;
  for (int grow = 0; grow < 200 && std::isfinite(lo); ++grow) {
    if (g(lo).first <= target && g(hi).first >= target) {
      bracketed = true;
      break;
    }
    lo *= 2.0;
    hi *= 2.0;
  }
  if (!bracketed) throw SolverFailure(std::string(what) + ": could not bracket target", lo, hi);
  double z = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    auto [val, der] = g(z);
    double r = val - target;
    if (std::abs(r) <= tol) return z;
    if (r > 0) hi = z; else lo = z;
    double next = (der > 0.0) ? z - r / der : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == z) break;
    z = next;
  }
  auto [val, der] = g(z);
  (void)der;
  if (std::abs(val - target) <= tol) return z;
  throw SolverFailure(std::string(what) + ": no convergence within 200 iterations", lo, hi);
}

}  // namespace

std::string ActivationSpec::describe() const {
  std::ostringstream os;
  if (kind == ActivationKind::Cube)
    os << "cube";
  else
    os << "odd-poly(k=" << k << ",nu=" << nu << ")";
  return os.str();
}

ActivationSpec odd_poly(int k, double nu) {
  if (k < 1) throw ConfigError("activation: k must be >= 1");
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw ConfigError("activation: nu must be finite and >= 0");
  ActivationSpec s;
  s.kind = ActivationKind::OddPoly;
  s.k = k;
  s.nu = nu;
  s.rho1 = nu;
  s.rho2 = (k == 1) ? 6.0 : 0.0;
  double p = 2.0 * k + 1.0;
  s.beta = std::min(1.0 / (p * p * (2.0 * k - 1.0)), nu * nu);
  s.strict = nu > 0.0 && k == 1;
  return s;
}

ActivationSpec cube() {
  ActivationSpec s;
  s.kind = ActivationKind::Cube;
  s.k = 1;
  s.nu = 0.0;
  s.rho1 = 0.0;
  s.rho2 = 6.0;
  s.beta = 0.0;
  s.strict = false;
  return s;
}

ActivationValue eval_activation(const ActivationSpec& spec, double z) {
  const int p = degree(spec);
  const double nu = shift(spec);
  ActivationValue v;
  v.phi = ipow(z, p) + nu * z;
  v.d1 = p * ipow(z, p - 1) + nu;
  v.d2 = double(p) * (p - 1) * ipow(z, p - 2);
  v.d3 = double(p) * (p - 1) * (p - 2) * ipow(z, p - 3);
  return v;
}

double invert_activation(const ActivationSpec& spec, double target) {
  if (!std::isfinite(target)) throw SolverFailure("invert_activation: non-finite target", 0, 0);
  if (target == 0.0) return 0.0;
  return monotone_solve(
      [&](double z) {
        auto v = eval_activation(spec, z);
        return std::pair{v.phi, v.d1};
      },
      target, "invert_activation");
}

double invert_second_derivative(const ActivationSpec& spec, double target) {
  if (!std::isfinite(target)) throw SolverFailure("invert_second_derivative: non-finite target", 0, 0);
  if (target == 0.0) return 0.0;
  return monotone_solve(
      [&](double z) {
        auto v = eval_activation(spec, z);
        return std::pair{v.d2, v.d3};
      },
      target, "invert_second_derivative");
}

double sublevel_radius(const ActivationSpec& spec, double F0) {
  const int p = degree(spec);
  const double nu = shift(spec);
  double s = std::sqrt(std::max(F0, 0.0));
  if (s <= nu) return 0.0;
  return std::pow((s - nu) / p, 1.0 / (p - 1));
}

RegionConstants region_constants(const ActivationSpec& spec, double zmax, int grid) {
  RegionConstants rc;
  rc.zmax = zmax;
  grid = std::max(grid, 2);
  double r1 = std::numeric_limits<double>::infinity();
  double r2 = r1, b = r1;
  int best = -1;
  auto ratio = [&](double z) {
    auto v = eval_activation(spec, z);
    return v.d2 > 0.0 ? v.d1 * v.d1 * v.d3 / v.d2 : std::numeric_limits<double>::infinity();
  };
  // phi' and phi''' are even, phi'' is odd, so [0, zmax] covers the interval.
  for (int g = 0; g < grid; ++g) {
    double z = zmax * g / (grid - 1);
    auto v = eval_activation(spec, z);
    r1 = std::min(r1, v.d1);
    r2 = std::min(r2, v.d3);
    double q = ratio(z);
    if (q < b) {
      b = q;
      best = g;
    }
  }
  // The grid minimum of the normality ratio overestimates the true infimum;
  // refine between the neighbouring nodes so the reported beta is a lower bound
  // up to rounding.
  if (best >= 0 && zmax > 0.0) {
    double a = zmax * std::max(best - 1, 0) / (grid - 1);
    double c = zmax * std::min(best + 1, grid - 1) / (grid - 1);
    if (a == 0.0) a = std::min(c * 1e-9, c);
    for (int it = 0; it < 200; ++it) {
      double m1 = a + (c - a) / 3.0, m2 = c - (c - a) / 3.0;
      if (ratio(m1) < ratio(m2)) c = m2; else a = m1;
    }
    b = std::min(b, ratio(0.5 * (a + c)));
  }
  rc.rho1 = r1;
  rc.rho2 = r2;
  rc.beta = std::isfinite(b) ? b : 0.0;
  return rc;
}

BoundedRegion bounded_region_certificate(const ActivationSpec& spec, double F0) {
  BoundedRegion br;
  br.center = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int g = 0; g <= 240; ++g) {
    double eps = std::pow(10.0, -4.0 + 8.0 * g / 240.0);
    double delta = std::numeric_limits<double>::infinity();
    for (int s = 0; s <= 200; ++s) delta = std::min(delta, eval_activation(spec, eps * s / 200.0).d3);
    if (!(delta > 0.0)) continue;
    double r = F0 / (eps * delta) + eps / 2.0;
    if (r < best) {
      best = r;
      br.available = true;
      br.eps = eps;
      br.delta = delta;
      br.radius = r;
    }
  }
  return br;
}

}  // namespace sharpflow
