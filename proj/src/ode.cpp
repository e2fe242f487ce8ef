#include "sharpflow/ode.hpp"

#include <algorithm>
#include <cmath>

namespace sharpflow::ode {

Eigen::VectorXd rk4_step(const Field& f, const Eigen::VectorXd& y, double h) {
  Eigen::VectorXd k1 = f(y);
  Eigen::VectorXd k2 = f(y + 0.5 * h * k1);
  Eigen::VectorXd k3 = f(y + 0.5 * h * k2);
  Eigen::VectorXd k4 = f(y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

EmbeddedStep dp45_step(const Field& f, const Eigen::VectorXd& y, const Eigen::VectorXd& k1, double h) {
  static constexpr double a21 = 1.0 / 5.0;
  static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                          a54 = -212.0 / 729.0;
  static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                          a65 = -5103.0 / 18656.0;
  static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                          b6 = 11.0 / 84.0;
  static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                          e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

  Eigen::VectorXd k2 = f(y + h * a21 * k1);
  Eigen::VectorXd k3 = f(y + h * (a31 * k1 + a32 * k2));
  Eigen::VectorXd k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
  Eigen::VectorXd k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  Eigen::VectorXd k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  EmbeddedStep s;
  s.y = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  Eigen::VectorXd k7 = f(s.y);
  s.err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  return s;
}

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1, double rtol,
                  double atol) {
  double e = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    double sc = atol + rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    e = std::max(e, std::abs(err(i)) / sc);
  }
  return e;
}

double next_step(double h, double err, bool accepted) {
  double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
  fac = std::clamp(fac, 0.2, accepted ? 5.0 : 1.0);
  return h * fac;
}

}  // namespace sharpflow::ode
