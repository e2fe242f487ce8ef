#pragma once

#include "sharpflow/dynamics.hpp"
#include "sharpflow/kernels.hpp"

#include <json.hpp>
#include <limits>
#include <string>
#include <vector>

namespace sharpflow {

struct StationaryTarget {
  Eigen::VectorXd nu;     // nu_i = phi^{-1}(y_i / m)
  Eigen::VectorXd alpha;  // phi''(nu_i)
  Params theta_star;      // every neuron equal to the minimum-norm solution of x_i . w = nu_i
};

StationaryTarget stationary_target(const Dataset& data, int m, const ActivationSpec& spec);

double stationarity_gap(const Params& theta, const Dataset& data, const StationaryTarget& target);
double stationarity_gap(const Params& theta, const Dataset& data, const ActivationSpec& spec);

struct CheckReport {
  std::string name;
  bool pass = true;
  bool skipped = false;
  double measured = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // positive when the check passes with room to spare
  nlohmann::json context = nlohmann::json::object();
};

nlohmann::json to_json(const CheckReport& r);
nlohmann::json verdict_json(const std::vector<CheckReport>& reports);

// Constants valid for every point whose trace-of-Hessian is at most F0.
struct CheckConstants {
  double mu = 0.0;
  double rho1 = 0.0;
  double rho2 = 0.0;
  double beta = 0.0;
  double zmax = 0.0;
  double threshold() const;  // sqrt(mu) * beta
};

CheckConstants region_check_constants(const ActivationSpec& spec, const Dataset& data, double F0);

CheckReport semi_monotonicity_check(const ManifoldState& state, const Dataset& data, const StationaryTarget& target,
                                    const CheckConstants& c);
CheckReport psd_check(const ManifoldState& state, const Dataset& data, const CheckConstants& c);
CheckReport rayleigh_check(const ManifoldState& state, const Dataset& data, const CheckConstants& c);
CheckReport decay_rate_estimate(const FlowTrace& trace, const CheckConstants& c);
CheckReport pl_check(const Params& theta, const Dataset& data, const ActivationSpec& spec);
CheckReport bounded_region_check(const FlowTrace& trace, const Dataset& data, const ActivationSpec& spec);
CheckReport sharpness_monotone_check(const FlowTrace& trace, double rel = 1e-9);
CheckReport phase1_decay_check(const FlowTrace& trace, const Dataset& data, const ActivationSpec& spec, int m);
CheckReport phase1_sharpness_check(double F_tilde, double F0, double L0, const Dataset& data,
                                   const ActivationSpec& spec, int m);

struct TimeBound {
  double global = std::numeric_limits<double>::quiet_NaN();  // NaN when the global constants vanish
  double region = std::numeric_limits<double>::quiet_NaN();
};

TimeBound convergence_time_bound(double F0, const ActivationSpec& spec, const CheckConstants& region, double eps);

Eigen::VectorXd fd_gradient_oracle(const kernels::ScalarField& f, const Eigen::VectorXd& theta, double h = 1e-5);

// Literal trace of the Hessian of L by second differences.
double fd_hessian_trace_oracle(const Params& theta, const Dataset& data, const ActivationSpec& spec, double h = 1e-4,
                               double tol = 1e-8);

struct VerifyOptions {
  double manifold_tol = 1e-8;
};

std::vector<CheckReport> verify_trace(const FlowTrace& trace, const Dataset& data, const ActivationSpec& spec,
                                      const VerifyOptions& opt = {});

}  // namespace sharpflow
