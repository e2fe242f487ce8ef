#include "sharpflow/analysis.hpp"

#include "sharpflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sharpflow {

using nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

CheckReport skipped(std::string name, std::string why) {
  CheckReport r;
  r.name = std::move(name);
  r.skipped = true;
  r.pass = true;
  r.measured = kNaN;
  r.bound = kNaN;
  r.margin = kNaN;
  r.context["skip_reason"] = std::move(why);
  return r;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
}  // namespace

StationaryTarget stationary_target(const Dataset& data, int m, const ActivationSpec& spec) {
  if (m < 1) throw ConfigError("stationary_target: m must be >= 1");
  StationaryTarget t;
  const int n = data.n();
  t.nu.resize(n);
  t.alpha.resize(n);
  for (int i = 0; i < n; ++i) {
    t.nu(i) = invert_activation(spec, data.y(i) / m);
    t.alpha(i) = eval_activation(spec, t.nu(i)).d2;
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(data.d());
  if (n > 0) w = data.X.transpose().completeOrthogonalDecomposition().solve(t.nu);
  t.theta_star = Params(m, data.d());
  for (int j = 0; j < m; ++j) t.theta_star.theta().row(j) = w.transpose();
  return t;
}

double stationarity_gap(const Params& theta, const Dataset& data, const StationaryTarget& target) {
  check_dims(theta, data);
  if (data.n() == 0) return 0.0;
  Eigen::MatrixXd Z = theta.theta() * data.X;
  Z.rowwise() -= target.nu.transpose();
  return Z.cwiseAbs().maxCoeff();
}

double stationarity_gap(const Params& theta, const Dataset& data, const ActivationSpec& spec) {
  return stationarity_gap(theta, data, stationary_target(data, theta.m, spec));
}

json to_json(const CheckReport& r) {
  json j;
  j["name"] = r.name;
  j["pass"] = r.pass;
  j["skipped"] = r.skipped;
  j["measured"] = num(r.measured);
  j["bound"] = num(r.bound);
  j["margin"] = num(r.margin);
  j["context"] = r.context;
  return j;
}

json verdict_json(const std::vector<CheckReport>& reports) {
  json a = json::array();
  for (const auto& r : reports) a.push_back(to_json(r));
  return a;
}

double CheckConstants::threshold() const { return std::sqrt(std::max(mu, 0.0)) * beta; }

CheckConstants region_check_constants(const ActivationSpec& spec, const Dataset& data, double F0) {
  CheckConstants c;
  c.mu = data.mu;
  c.zmax = sublevel_radius(spec, F0);
  auto rc = region_constants(spec, c.zmax);
  c.rho1 = rc.rho1;
  c.rho2 = rc.rho2;
  c.beta = rc.beta;
  return c;
}

CheckReport semi_monotonicity_check(const ManifoldState& state, const Dataset& data, const StationaryTarget& target,
                                    const CheckConstants& c) {
  const double g = riemannian_gradient(state, data).norm();
  if (!(c.rho1 > 0 && c.rho2 > 0 && c.mu > 0))
    return skipped("semi_monotonicity", "region constants vanish");
  if (g > c.threshold()) {
    auto r = skipped("semi_monotonicity", "gradient above sqrt(mu)*beta");
    r.context["gradnorm"] = g;
    return r;
  }
  CheckReport r;
  r.name = "semi_monotonicity";
  r.measured = stationarity_gap(state.theta, data, target);
  r.bound = g / (std::sqrt(c.mu) * c.rho1 * c.rho2);
  r.margin = r.bound - r.measured;
  r.pass = r.measured <= r.bound * (1.0 + 1e-9) + 1e-12;
  r.context["gradnorm"] = g;
  return r;
}

CheckReport psd_check(const ManifoldState& state, const Dataset& data, const CheckConstants& c) {
  const auto& b = state.bundle;
  Eigen::VectorXd DF = trace_hessian_euclid_grad(b, data);
  Eigen::VectorXd grad = project_tangent(state, DF);
  const double g = grad.norm();
  if (g > c.threshold()) {
    auto r = skipped("psd_small_gradient", "gradient above sqrt(mu)*beta");
    r.context["gradnorm"] = g;
    return r;
  }
  Eigen::VectorXd eig = manifold_hessian_spectrum(state, data);
  CheckReport r;
  r.name = "psd_small_gradient";
  const double radius = eig.size() ? std::max(std::abs(eig(0)), std::abs(eig(eig.size() - 1))) : 0.0;
  r.measured = eig.size() ? eig(0) : 0.0;
  r.bound = -1e-7 * (1.0 + radius);
  r.margin = r.measured - r.bound;
  r.pass = r.measured >= r.bound;

  // Pointwise sufficient condition 2|phi''(a'_i - phi'')| <= phi' phi''' with
  // a' half the normal coefficient of DF.
  Eigen::VectorXd alpha = normal_coefficients(state, DF);
  bool certificate = true;
  double worst = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < b.d1.cols(); ++i)
    for (Eigen::Index j = 0; j < b.d1.rows(); ++j) {
      double lhs = 2.0 * std::abs(b.d2(j, i) * (0.5 * alpha(i) - b.d2(j, i)));
      double rhs = b.d1(j, i) * b.d3(j, i);
      worst = std::min(worst, rhs - lhs);
      if (lhs > rhs) certificate = false;
    }
  r.context["gradnorm"] = g;
  r.context["spectral_radius"] = radius;
  r.context["pointwise_certificate"] = certificate;
  r.context["certificate_slack"] = num(worst);
  if (certificate && r.measured < -1e-8) {
    r.pass = false;
    r.context["certificate_contradiction"] = true;
  }
  return r;
}

CheckReport rayleigh_check(const ManifoldState& state, const Dataset& data, const CheckConstants& c) {
  Eigen::VectorXd grad = riemannian_gradient(state, data);
  const double g = grad.norm();
  if (!(g > 1e-12)) return skipped("strong_convexity_rayleigh", "gradient numerically zero");
  if (g > c.threshold()) {
    auto r = skipped("strong_convexity_rayleigh", "gradient above sqrt(mu)*beta");
    r.context["gradnorm"] = g;
    return r;
  }
  CheckReport r;
  r.name = "strong_convexity_rayleigh";
  // A small projected vector carries absolute rounding from the large
  // Euclidean gradient, so normalize and project once more before the
  // tangency-checked quadratic form.
  Eigen::VectorXd u = project_tangent(state, grad / g);
  r.measured = manifold_hessian_quadform(state, data, u, u) / u.squaredNorm();
  r.bound = c.rho1 * c.rho2 * c.mu;
  r.margin = r.measured - r.bound;
  r.pass = r.measured >= r.bound - 1e-7;
  r.context["gradnorm"] = g;
  return r;
}

CheckReport decay_rate_estimate(const FlowTrace& trace, const CheckConstants& c) {
  const double rate = c.rho1 * c.rho2 * c.mu;
  const double thr = c.threshold();
  std::vector<double> ts, ls, gs;
  bool past = false;
  for (const auto& s : trace.samples) {
    if (!s.gradnorm) continue;
    if (!past && *s.gradnorm <= thr) past = true;
    if (past && *s.gradnorm > 0.0) {
      ts.push_back(s.t);
      gs.push_back(*s.gradnorm);
      ls.push_back(std::log(*s.gradnorm * *s.gradnorm));
    }
  }
  if (ts.size() < 10)
    throw InsufficientSamples("decay_rate_estimate: " + std::to_string(ts.size()) +
                              " samples past the sqrt(mu)*beta threshold, need 10");
  const double N = double(ts.size());
  double mt = 0, ml = 0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    mt += ts[k];
    ml += ls[k];
  }
  mt /= N;
  ml /= N;
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    sxy += (ts[k] - mt) * (ls[k] - ml);
    sxx += (ts[k] - mt) * (ts[k] - mt);
  }
  const double slope = sxx > 0 ? sxy / sxx : kNaN;

  int monotone_violations = 0, envelope_violations = 0;
  for (std::size_t k = 1; k < ts.size(); ++k) {
    if (gs[k] > gs[k - 1] * (1.0 + 1e-6)) ++monotone_violations;
    if (ls[k] - ls[0] > -(ts[k] - ts[0]) * rate + 1e-3) ++envelope_violations;
  }

  CheckReport r;
  r.name = "gradient_norm_decay";
  r.measured = slope;
  r.bound = -0.95 * rate;
  r.margin = r.bound - slope;
  r.context["samples"] = ts.size();
  r.context["t0"] = ts.front();
  r.context["monotone_violations"] = monotone_violations;
  r.context["envelope_violations"] = envelope_violations;
  if (!(rate > 0.0)) {
    r.skipped = true;
    r.context["skip_reason"] = "rho1*rho2*mu vanishes";
    return r;
  }
  r.pass = slope <= r.bound && monotone_violations == 0 && envelope_violations == 0;
  return r;
}

CheckReport pl_check(const Params& theta, const Dataset& data, const ActivationSpec& spec) {
  auto b = network_outputs(theta, data, spec);
  const double L = loss(b, data);
  if (!(L > 0.0)) return skipped("pl_inequality", "loss is zero");
  const double C = 4.0 * theta.m * data.mu * spec.rho1 * spec.rho1;
  if (!(C > 0.0)) return skipped("pl_inequality", "4*m*mu*rho1^2 vanishes");
  CheckReport r;
  r.name = "pl_inequality";
  r.measured = loss_euclid_gradient(b, data).squaredNorm() / (C * L);
  r.bound = 1.0 - 1e-9;
  r.margin = r.measured - r.bound;
  r.pass = r.measured >= r.bound;
  r.context["loss"] = L;
  return r;
}

CheckReport bounded_region_check(const FlowTrace& trace, const Dataset& data, const ActivationSpec& spec) {
  if (trace.samples.empty()) return skipped("bounded_region", "empty trace");
  const double F0 = trace.samples.front().traceH;
  auto cert = bounded_region_certificate(spec, F0);
  if (!cert.available) return skipped("bounded_region", "phi''' vanishes at the center");
  double worst = 0.0, worst_t = 0.0;
  for (const auto& s : trace.samples) {
    if (s.theta.size() != Eigen::Index(trace.m) * data.d()) continue;
    Params p(s.theta, trace.m, data.d());
    double z = ((p.theta() * data.X).array() - cert.center).abs().maxCoeff();
    if (z > worst) {
      worst = z;
      worst_t = s.t;
    }
  }
  CheckReport r;
  r.name = "bounded_region";
  r.measured = worst;
  r.bound = cert.radius;
  r.margin = r.bound - r.measured;
  r.pass = r.measured <= r.bound;
  r.context["t"] = worst_t;
  r.context["eps"] = cert.eps;
  r.context["delta"] = cert.delta;
  r.context["F0"] = F0;
  return r;
}

CheckReport sharpness_monotone_check(const FlowTrace& trace, double rel) {
  CheckReport r;
  r.name = "sharpness_monotone";
  int violations = 0;
  double worst = 0.0;
  for (std::size_t k = 1; k < trace.samples.size(); ++k) {
    double a = trace.samples[k - 1].traceH, b = trace.samples[k].traceH;
    double up = b - a;
    worst = std::max(worst, up / std::max(1.0, std::abs(a)));
    if (up > rel * std::max(1.0, std::abs(a))) ++violations;
  }
  r.measured = worst;
  r.bound = rel;
  r.margin = rel - worst;
  r.pass = violations == 0;
  r.context["violations"] = violations;
  return r;
}

CheckReport phase1_decay_check(const FlowTrace& trace, const Dataset& data, const ActivationSpec& spec, int m) {
  if (trace.samples.empty()) return skipped("phase1_loss_decay", "empty trace");
  const double C = 4.0 * m * data.mu * spec.rho1 * spec.rho1;
  const double L0 = trace.samples.front().loss;
  if (!(L0 > 0.0)) return skipped("phase1_loss_decay", "start is on the manifold");
  double worst = 0.0, worst_t = 0.0;
  for (const auto& s : trace.samples) {
    double ratio = s.loss / (std::exp(-C * s.t) * L0);
    if (ratio > worst) {
      worst = ratio;
      worst_t = s.t;
    }
  }
  CheckReport r;
  r.name = "phase1_loss_decay";
  r.measured = worst;
  r.bound = 1.01;
  r.margin = r.bound - worst;
  r.pass = worst <= r.bound;
  r.context["t"] = worst_t;
  r.context["rate"] = C;
  return r;
}

CheckReport phase1_sharpness_check(double F_tilde, double F0, double L0, const Dataset& data,
                                   const ActivationSpec& spec, int m) {
  const double C = 4.0 * m * data.mu * spec.rho1 * spec.rho1;
  if (!(C > 0.0)) return skipped("phase1_sharpness_bound", "4*m*mu*rho1^2 vanishes");
  CheckReport r;
  r.name = "phase1_sharpness_bound";
  r.measured = F_tilde;
  r.bound = 2.0 * F0 + 2.0 / std::sqrt(C) * std::sqrt(L0);
  r.margin = r.bound - r.measured;
  r.pass = r.measured <= r.bound;
  return r;
}

TimeBound convergence_time_bound(double F0, const ActivationSpec& spec, const CheckConstants& region, double eps) {
  auto bound = [&](double r1, double r2, double beta) {
    if (!(r1 > 0 && r2 > 0 && beta > 0 && region.mu > 0 && eps > 0)) return kNaN;
    return F0 / (region.mu * beta * beta) +
           std::log(beta * beta / (r1 * r1 * r2 * r2 * eps * eps)) / (r1 * r2 * region.mu);
  };
  return {bound(spec.rho1, spec.rho2, spec.beta), bound(region.rho1, region.rho2, region.beta)};
}

Eigen::VectorXd fd_gradient_oracle(const kernels::ScalarField& f, const Eigen::VectorXd& theta, double h) {
  if (!(h > 0)) throw ConfigError("fd_gradient_oracle: h must be positive");
  return kernels::fd_gradient_omp(f, theta, h);
}

double fd_hessian_trace_oracle(const Params& theta, const Dataset& data, const ActivationSpec& spec, double h,
                               double tol) {
  if (!(h > 0)) throw ConfigError("fd_hessian_trace_oracle: h must be positive");
  auto b = network_outputs(theta, data, spec);
  double res = data.n() ? (b.f - data.y).cwiseAbs().maxCoeff() : 0.0;
  if (res > tol) throw ContractViolation("fd_hessian_trace_oracle: point is off the manifold");
  const int m = theta.m, d = theta.d;
  return kernels::fd_second_trace_omp(
      [&](const Eigen::VectorXd& x) { return loss(Params(x, m, d), data, spec); }, theta.flat, h);
}

std::vector<CheckReport> verify_trace(const FlowTrace& trace, const Dataset& data, const ActivationSpec& spec,
                                      const VerifyOptions& opt) {
  std::vector<CheckReport> out;
  const std::string kind = trace.metadata.value("dynamics", "");
  const std::string hash = hex64(data.hash());
  auto tag = [&](CheckReport r, double t, long idx) {
    r.context["instance"] = hash;
    r.context["t"] = t;
    if (idx >= 0) r.context["index"] = idx;
    out.push_back(std::move(r));
  };
  if (trace.samples.empty()) return out;
  if (trace.d != data.d()) throw DimensionMismatch("verify: trace dimension does not match dataset");

  if (kind == "riemannian") {
    double tol = opt.manifold_tol;
    if (trace.metadata.contains("integrator"))
      tol = std::max(tol, trace.metadata["integrator"].value("manifold_tol", tol));
    const double F0 = trace.samples.front().traceH;
    auto c = region_check_constants(spec, data, F0);
    auto target = stationary_target(data, trace.m, spec);
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
      const auto& s = trace.samples[k];
      auto state = make_manifold_state(Params(s.theta, trace.m, trace.d), data, spec, tol);
      tag(psd_check(state, data, c), s.t, long(k));
      tag(rayleigh_check(state, data, c), s.t, long(k));
      tag(semi_monotonicity_check(state, data, target, c), s.t, long(k));
    }
    try {
      tag(decay_rate_estimate(trace, c), trace.samples.back().t, -1);
    } catch (const InsufficientSamples& e) {
      tag(skipped("gradient_norm_decay", std::string("insufficient samples: ") + e.what()), trace.samples.back().t,
          -1);
    }
    tag(bounded_region_check(trace, data, spec), trace.samples.back().t, -1);
    tag(sharpness_monotone_check(trace), trace.samples.back().t, -1);
  } else if (kind == "euclidean") {
    tag(phase1_decay_check(trace, data, spec, trace.m), trace.samples.back().t, -1);
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
      const auto& s = trace.samples[k];
      tag(pl_check(Params(s.theta, trace.m, trace.d), data, spec), s.t, long(k));
    }
    const auto& first = trace.samples.front();
    tag(phase1_sharpness_check(trace.samples.back().traceH, first.traceH, first.loss, data, spec, trace.m),
        trace.samples.back().t, -1);
  } else {
    CheckReport r;
    r.name = "feature_rank_summary";
    const auto& s = trace.samples.back();
    r.measured = s.sv.size() > 1 && s.sv(0) > 0 ? s.sv(1) / s.sv(0) : 0.0;
    r.bound = kNaN;
    r.margin = kNaN;
    r.context["informational"] = true;
    r.context["gap"] = stationarity_gap(Params(s.theta, trace.m, trace.d), data, spec);
    tag(r, s.t, -1);
  }
  return out;
}

}  // namespace sharpflow
