#include "sharpflow/dynamics.hpp"

#include "sharpflow/errors.hpp"
#include "sharpflow/ode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>

namespace sharpflow {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json activation_to_json(const ActivationSpec& spec) {
  json j;
  j["kind"] = spec.kind == ActivationKind::Cube ? "cube" : "odd-poly";
  if (spec.kind == ActivationKind::OddPoly) {
    j["k"] = spec.k;
    j["nu"] = spec.nu;
  }
  j["rho1"] = spec.rho1;
  j["rho2"] = spec.rho2;
  j["beta"] = spec.beta;
  return j;
}

json IntegratorConfig::to_json() const {
  return {{"method", method == Method::RK4 ? "rk4" : "dp45"},
          {"h", h},
          {"T", T},
          {"eps_stop", eps_stop},
          {"loss_eps", loss_eps},
          {"retract_tol", retract_tol},
          {"manifold_tol", manifold_tol},
          {"rtol", rtol},
          {"atol", atol},
          {"h_min", h_min},
          {"max_steps", max_steps},
          {"stride", stride}};
}

IntegratorConfig integrator_from_json(const json& j) {
  IntegratorConfig c;
  if (!j.is_object()) throw ConfigError("integrator: expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& v = it.value();
    auto num = [&](double& dst) {
      if (!v.is_number()) throw ConfigError("integrator." + key + ": expected a number");
      dst = v.get<double>();
    };
    if (key == "method") {
      if (v == "rk4") c.method = Method::RK4;
      else if (v == "dp45") c.method = Method::DP45;
      else throw ConfigError("integrator.method: expected \"rk4\" or \"dp45\"");
    } else if (key == "h") num(c.h);
    else if (key == "T") num(c.T);
    else if (key == "eps_stop") num(c.eps_stop);
    else if (key == "loss_eps") num(c.loss_eps);
    else if (key == "retract_tol") num(c.retract_tol);
    else if (key == "manifold_tol") num(c.manifold_tol);
    else if (key == "rtol") num(c.rtol);
    else if (key == "atol") num(c.atol);
    else if (key == "h_min") num(c.h_min);
    else if (key == "max_steps") {
      if (!v.is_number_integer()) throw ConfigError("integrator.max_steps: expected an integer");
      c.max_steps = v.get<long>();
    } else if (key == "stride") {
      if (!v.is_number_integer()) throw ConfigError("integrator.stride: expected an integer");
      c.stride = v.get<int>();
    } else
      throw ConfigError("integrator: unknown field '" + key + "'");
  }
  if (!(c.h > 0) || !(c.T > 0) || !(c.retract_tol > 0) || !(c.manifold_tol > 0) || !(c.rtol > 0) ||
      !(c.atol > 0) || !(c.loss_eps > 0) || c.stride < 1 || c.max_steps < 1)
    throw ConfigError("integrator: h, T, tolerances and stride must be positive");
  return c;
}

Eigen::VectorXd feature_spectrum(const Params& theta, const Dataset& data) {
  check_dims(theta, data);
  Eigen::MatrixXd F = theta.theta() * data.X;
  if (F.size() == 0) return Eigen::VectorXd();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(F);
  return svd.singularValues();
}

FlowSample make_sample(double t, const Params& theta, const Dataset& data, const ActivationSpec& spec,
                       std::optional<double> gradnorm) {
  FlowSample s;
  s.t = t;
  s.theta = theta.flat;
  auto b = network_outputs(theta, data, spec);
  s.loss = loss(b, data);
  s.traceH = sharpness(b);
  s.gradnorm = gradnorm;
  s.residual = data.n() ? (b.f - data.y).cwiseAbs().maxCoeff() : 0.0;
  s.sv = feature_spectrum(theta, data);
  return s;
}

double default_eps_stop(const ActivationSpec& spec, const Dataset& data) {
  double b = spec.beta > 0.0 ? spec.beta : 1.0;
  double v = 1e-8 * std::sqrt(std::max(data.mu, 0.0) * b);
  return v > 0.0 ? v : 1e-12;
}

Params random_params(int m, int d, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Params p(m, d);
  for (Eigen::Index k = 0; k < p.size(); ++k) p.flat(k) = scale * g(rng);
  return p;
}

namespace {

json base_metadata(const char* dynamics, const Dataset& data, const ActivationSpec& spec) {
  json meta;
  meta["dynamics"] = dynamics;
  meta["activation"] = activation_to_json(spec);
  meta["data_hash"] = hex64(data.hash());
  meta["n"] = data.n();
  meta["d"] = data.d();
  meta["mu"] = data.mu;
  return meta;
}

// -grad F projected with the Jacobian at theta itself.  Used at Runge-Kutta
// stage points, which sit slightly off the manifold.
Eigen::VectorXd projected_field(const Eigen::VectorXd& x, int m, int d, const Dataset& data,
                                const ActivationSpec& spec) {
  Params p(x, m, d);
  auto b = network_outputs(p, data, spec);
  Eigen::VectorXd g = trace_hessian_euclid_grad(b, data);
  if (data.n() == 0) return -g;
  Eigen::MatrixXd J = jacobian(b, data);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(J * J.transpose());
  return -(g - J.transpose() * ldlt.solve(J * g));
}

struct Integrator {
  const IntegratorConfig& cfg;
  ode::Field field;
  double h;

  // Advances y in place from t; returns the time actually stepped.
  double advance(Eigen::VectorXd& y, const Eigen::VectorXd& k1, double t) {
    const double remaining = cfg.T - t;
    if (cfg.method == Method::RK4) {
      double hh = std::min(cfg.h, remaining);
      y = ode::rk4_step(field, y, hh);
      return hh;
    }
    for (;;) {
      double hh = std::min(h, remaining);
      auto s = ode::dp45_step(field, y, k1, hh);
      double err = ode::error_norm(s.err, y, s.y, cfg.rtol, cfg.atol);
      if (err <= 1.0 && s.y.allFinite()) {
        y = std::move(s.y);
        if (hh == h) h = ode::next_step(hh, err, true);
        return hh;
      }
      h = ode::next_step(hh, std::isfinite(err) ? err : 1e10, false);
      if (h < cfg.h_min) {
        std::ostringstream os;
        os << "adaptive step fell below h_min = " << cfg.h_min << " at t = " << t;
        throw Error(os.str());
      }
    }
  }
};

}  // namespace

EuclideanResult euclidean_flow(const Params& theta0, const Dataset& data, const ActivationSpec& spec,
                               const IntegratorConfig& cfg) {
  check_dims(theta0, data);
  FlowTrace tr;
  tr.m = theta0.m;
  tr.d = theta0.d;
  tr.metadata = base_metadata("euclidean", data, spec);
  tr.metadata["integrator"] = cfg.to_json();

  const int m = theta0.m, d = theta0.d;
  Integrator integ{cfg,
                   [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(-loss_euclid_gradient(Params(x, m, d), data, spec)); },
                   cfg.h};
  Params theta = theta0;
  double t = 0.0;
  long steps = 0;
  tr.samples.push_back(make_sample(t, theta, data, spec));
  double L = tr.samples.back().loss;
  while (L > cfg.loss_eps) {
    if (!std::isfinite(L)) throw Divergence("euclidean_flow: loss became non-finite");
    if (t >= cfg.T || steps >= cfg.max_steps) {
      tr.stop_reason = t >= cfg.T ? "max_time" : "max_steps";
      tr.metadata["stop_reason"] = tr.stop_reason;
      if (tr.samples.back().t != t) tr.samples.push_back(make_sample(t, theta, data, spec));
      std::ostringstream os;
      os << "euclidean_flow: loss " << L << " still above " << cfg.loss_eps << " at t = " << t;
      throw Timeout(os.str(), std::move(tr));
    }
    Eigen::VectorXd k1 = integ.field(theta.flat);
    t += integ.advance(theta.flat, k1, t);
    ++steps;
    L = loss(theta, data, spec);
    if (steps % cfg.stride == 0) tr.samples.push_back(make_sample(t, theta, data, spec));
  }
  if (tr.samples.back().t != t) tr.samples.push_back(make_sample(t, theta, data, spec));
  tr.stop_reason = "loss_below_eps";
  tr.metadata["stop_reason"] = tr.stop_reason;
  tr.metadata["steps"] = steps;

  RetractOptions ro;
  ro.tol = cfg.retract_tol;
  Params tilde = retract(theta, data, spec, ro).theta;
  return {std::move(tr), std::move(tilde)};
}

FlowTrace riemannian_flow(const Params& theta0, const Dataset& data, const ActivationSpec& spec,
                          const IntegratorConfig& cfg) {
  check_dims(theta0, data);
  FlowTrace tr;
  tr.m = theta0.m;
  tr.d = theta0.d;
  tr.metadata = base_metadata("riemannian", data, spec);
  const double eps = cfg.eps_stop > 0.0 ? cfg.eps_stop : default_eps_stop(spec, data);
  json icfg = cfg.to_json();
  icfg["eps_stop"] = eps;
  tr.metadata["integrator"] = icfg;

  RetractOptions ro;
  ro.tol = cfg.retract_tol;
  Params theta = retract(theta0, data, spec, ro).theta;
  const int m = theta.m, d = theta.d;
  Integrator integ{cfg, [&](const Eigen::VectorXd& x) { return projected_field(x, m, d, data, spec); }, cfg.h};

  double t = 0.0;
  long steps = 0, ill = 0;
  auto state = make_manifold_state(theta, data, spec, cfg.manifold_tol);
  Eigen::VectorXd g = riemannian_gradient(state, data);
  tr.samples.push_back(make_sample(t, theta, data, spec, g.norm()));
  for (;;) {
    if (g.norm() <= eps) {
      tr.stop_reason = "converged";
      break;
    }
    if (t >= cfg.T) {
      tr.stop_reason = "max_time";
      break;
    }
    if (steps >= cfg.max_steps) {
      tr.stop_reason = "max_steps";
      break;
    }
    Eigen::VectorXd y = theta.flat;
    t += integ.advance(y, -g, t);
    ++steps;
    theta = retract(Params(std::move(y), m, d), data, spec, ro).theta;
    state = make_manifold_state(theta, data, spec, cfg.manifold_tol);
    ill += state.ill_conditioned;
    g = riemannian_gradient(state, data);
    if (!g.allFinite()) throw Divergence("riemannian_flow: gradient became non-finite");
    if (steps % cfg.stride == 0) tr.samples.push_back(make_sample(t, theta, data, spec, g.norm()));
  }
  if (tr.samples.back().t != t) tr.samples.push_back(make_sample(t, theta, data, spec, g.norm()));
  if (ill > 0)
    std::cerr << "warning: riemannian_flow: Gram matrix condition number above 1e10 at " << ill
              << " steps; used truncated eigen-solve\n";
  tr.metadata["stop_reason"] = tr.stop_reason;
  tr.metadata["steps"] = steps;
  tr.metadata["ill_conditioned_steps"] = ill;
  return tr;
}

FlowTrace label_noise_sgd(const Params& theta0, const Dataset& data, const ActivationSpec& spec, const SgdConfig& cfg,
                          std::uint64_t seed) {
  check_dims(theta0, data);
  if (!(cfg.eta > 0.0) || !(cfg.sigma >= 0.0) || cfg.iterations < 0 || cfg.stride < 1)
    throw ConfigError("label_noise_sgd: eta > 0, sigma >= 0, iterations >= 0 and stride >= 1 required");
  FlowTrace tr;
  tr.m = theta0.m;
  tr.d = theta0.d;
  tr.metadata = base_metadata("sgd", data, spec);
  tr.metadata["eta"] = cfg.eta;
  tr.metadata["sigma"] = cfg.sigma;
  tr.metadata["iterations"] = cfg.iterations;
  tr.metadata["stride"] = cfg.stride;
  tr.metadata["seed"] = seed;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const Eigen::Index n = data.n();
  const Eigen::MatrixXd Xt = data.X.transpose();
  Params theta = theta0;
  Eigen::VectorXd zeta(n);
  tr.samples.push_back(make_sample(0.0, theta, data, spec));
  for (long it = 1; it <= cfg.iterations; ++it) {
    auto b = network_outputs(theta, data, spec);
    for (Eigen::Index i = 0; i < n; ++i) zeta(i) = cfg.sigma > 0.0 ? cfg.sigma * noise(rng) : 0.0;
    Eigen::RowVectorXd r2 = 2.0 * (b.f - data.y + zeta).transpose();
    Eigen::MatrixXd A = b.d1.array().rowwise() * r2.array();
    theta.theta() -= cfg.eta * (A * Xt);
    double big = theta.flat.cwiseAbs().maxCoeff();
    if (!(big <= cfg.divergence_bound)) {
      std::ostringstream os;
      os << "label_noise_sgd diverged at iteration " << it << " (|theta|_inf = " << big
         << "); try a smaller step size than " << cfg.eta;
      throw Divergence(os.str());
    }
    if (it % cfg.stride == 0 || it == cfg.iterations) tr.samples.push_back(make_sample(double(it), theta, data, spec));
  }
  tr.stop_reason = "iterations";
  tr.metadata["stop_reason"] = tr.stop_reason;
  return tr;
}

FullResult run_full(const Params& theta0, const Dataset& data, const ActivationSpec& spec,
                    const IntegratorConfig& phase1, const IntegratorConfig& phase2) {
  FullResult r{euclidean_flow(theta0, data, spec, phase1), {}};
  r.phase2 = riemannian_flow(r.phase1.theta_tilde, data, spec, phase2);
  return r;
}

}  // namespace sharpflow
