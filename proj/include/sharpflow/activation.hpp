#pragma once

#include <string>

namespace sharpflow {

enum class ActivationKind { OddPoly, Cube };

// phi(z) = z^(2k+1) + nu*z, or z^3 for the cube kind.
struct ActivationSpec {
  ActivationKind kind = ActivationKind::OddPoly;
  int k = 1;
  double nu = 1.0;

  double rho1 = 1.0;
  double rho2 = 6.0;
  double beta = 1.0 / 9.0;
  bool strict = true;  // false when the global constants degenerate (cube, nu = 0)

  std::string describe() const;
};

ActivationSpec odd_poly(int k, double nu);
ActivationSpec cube();

struct ActivationValue {
  double phi;
  double d1;
  double d2;
  double d3;
};

ActivationValue eval_activation(const ActivationSpec& spec, double z);

inline double phi_prime(const ActivationSpec& s, double z) { return eval_activation(s, z).d1; }

double invert_activation(const ActivationSpec& spec, double target);
double invert_second_derivative(const ActivationSpec& spec, double target);

// Constants that hold on a bounded preactivation interval [-zmax, zmax].
struct RegionConstants {
  double zmax = 0.0;
  double rho1 = 0.0;
  double rho2 = 0.0;
  double beta = 0.0;
};

// Interval on which phi'(z)^2 <= F0.  Any point with trace-of-Hessian at most F0
// has every preactivation inside it, and the manifold flow never raises F.
double sublevel_radius(const ActivationSpec& spec, double F0);

RegionConstants region_constants(const ActivationSpec& spec, double zmax, int grid = 4001);

struct BoundedRegion {
  bool available = false;
  double eps = 0.0;
  double delta = 0.0;
  double center = 0.0;
  double radius = 0.0;  // F0/(eps*delta) + eps/2
};

BoundedRegion bounded_region_certificate(const ActivationSpec& spec, double F0);

}  // namespace sharpflow
