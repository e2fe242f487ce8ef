#pragma once

#include "sharpflow/errors.hpp"
#include "sharpflow/manifold.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace sharpflow {

struct FlowSample {
  double t = 0.0;
  Eigen::VectorXd theta;
  double loss = 0.0;
  double traceH = 0.0;
  std::optional<double> gradnorm;
  double residual = 0.0;
  Eigen::VectorXd sv;
};

struct FlowTrace {
  std::vector<FlowSample> samples;
  nlohmann::json metadata = nlohmann::json::object();
  std::string stop_reason;
  int m = 0;
  int d = 0;
};

enum class Method { RK4, DP45 };

struct IntegratorConfig {
  Method method = Method::DP45;
  double h = 1e-2;          // fixed step for RK4, initial step for DP45
  double T = 100.0;
  double eps_stop = -1.0;   // riemannian: stop at ||grad F|| <= eps_stop; negative selects 1e-8*sqrt(mu*beta)
  double loss_eps = 1e-20;  // euclidean: stop at L <= loss_eps
  double retract_tol = 1e-10;
  double manifold_tol = 1e-8;
  double rtol = 1e-11;
  double atol = 1e-14;
  double h_min = 1e-12;
  long max_steps = 2000000;
  int stride = 1;

  nlohmann::json to_json() const;
};

IntegratorConfig integrator_from_json(const nlohmann::json& j);

class Timeout : public Error {
public:
  Timeout(const std::string& what, FlowTrace t) : Error(what), trace(std::move(t)) {}
  FlowTrace trace;
};

Eigen::VectorXd feature_spectrum(const Params& theta, const Dataset& data);

FlowSample make_sample(double t, const Params& theta, const Dataset& data, const ActivationSpec& spec,
                       std::optional<double> gradnorm = std::nullopt);

double default_eps_stop(const ActivationSpec& spec, const Dataset& data);

struct EuclideanResult {
  FlowTrace trace;
  Params theta_tilde;
};

EuclideanResult euclidean_flow(const Params& theta0, const Dataset& data, const ActivationSpec& spec,
                               const IntegratorConfig& cfg);

FlowTrace riemannian_flow(const Params& theta0, const Dataset& data, const ActivationSpec& spec,
                          const IntegratorConfig& cfg);

struct SgdConfig {
  double eta = 0.05;
  double sigma = 0.03;  // standard deviation of the per-sample label noise
  long iterations = 100000;
  int stride = 100;
  double divergence_bound = 1e6;
};

FlowTrace label_noise_sgd(const Params& theta0, const Dataset& data, const ActivationSpec& spec, const SgdConfig& cfg,
                          std::uint64_t seed);

struct FullResult {
  EuclideanResult phase1;
  FlowTrace phase2;
};

FullResult run_full(const Params& theta0, const Dataset& data, const ActivationSpec& spec,
                    const IntegratorConfig& phase1, const IntegratorConfig& phase2);

Params random_params(int m, int d, double scale, std::uint64_t seed);

nlohmann::json activation_to_json(const ActivationSpec& spec);

// JSON-lines: a header record holding metadata, then one record per sample.
void write_trace(const FlowTrace& trace, std::ostream& out);
void write_trace_file(const FlowTrace& trace, const std::string& path);
FlowTrace read_trace(std::istream& in);
FlowTrace read_trace_file(const std::string& path);

std::string hex64(std::uint64_t v);

}  // namespace sharpflow
