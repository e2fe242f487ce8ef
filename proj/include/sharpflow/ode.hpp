#pragma once

#include <Eigen/Dense>
#include <functional>

namespace sharpflow::ode {

using Field = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Eigen::VectorXd rk4_step(const Field& f, const Eigen::VectorXd& y, double h);

struct EmbeddedStep {
  Eigen::VectorXd y;    // fifth-order solution
  Eigen::VectorXd err;  // difference to the embedded fourth-order solution
};

// One Dormand-Prince 5(4) step.  k1 is f(y) and is reused by the caller when a
// step is rejected.
EmbeddedStep dp45_step(const Field& f, const Eigen::VectorXd& y, const Eigen::VectorXd& k1, double h);

// Scaled max-norm used for step acceptance: accept when <= 1.
double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1, double rtol,
                  double atol);

double next_step(double h, double err, bool accepted);

}  // namespace sharpflow::ode
