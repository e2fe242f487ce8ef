#include "helpers.hpp"

#include "sharpflow/errors.hpp"

#include <gtest/gtest.h>
#include <set>

using namespace sharpflow;

namespace {

const ActivationSpec kSpec = odd_poly(1, 1.0);

Dataset box_data(int n, int d, std::uint64_t seed) {
  GenerateOptions opt;
  opt.mu_min = 0.05;
  return generate_dataset(n, d, LabelMode::UniformBox, seed, opt);
}

FlowTrace synthetic_decay(double rate, int count, double dt, double g0) {
  FlowTrace tr;
  tr.m = 1;
  tr.d = 1;
  for (int k = 0; k < count; ++k) {
    FlowSample s;
    s.t = k * dt;
    s.gradnorm = g0 * std::exp(-0.5 * rate * s.t);
    tr.samples.push_back(s);
  }
  return tr;
}

CheckConstants unit_constants() {
  CheckConstants c;
  c.mu = 1.0;
  c.rho1 = 1.0;
  c.rho2 = 1.0;
  c.beta = 1.0;
  return c;
}

}  // namespace

TEST(StationaryTarget, Examples) {
  auto data = box_data(3, 5, 1);
  auto t = stationary_target(data, 4, kSpec);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(eval_activation(kSpec, t.nu(i)).phi, data.y(i) / 4, 1e-12);
    EXPECT_NEAR(t.alpha(i), 6.0 * t.nu(i), 1e-12);
    EXPECT_NEAR(t.theta_star.theta().row(2).dot(data.X.col(i)), t.nu(i), 1e-12);
  }
  EXPECT_LT(loss(t.theta_star, data, kSpec), 1e-24);
  EXPECT_NEAR(stationarity_gap(t.theta_star, data, t), 0.0, 1e-12);
  EXPECT_THROW(stationary_target(data, 0, kSpec), ConfigError);

  // The zero label gives nu = 0 for every odd activation.
  Dataset z = make_dataset(data.X, Eigen::VectorXd::Zero(3));
  EXPECT_TRUE(stationary_target(z, 3, kSpec).theta_star.flat.isZero(0.0));
}

TEST(StationaryTarget, NullSpaceOffsetsShareSharpness) {
  auto data = box_data(3, 6, 2);
  auto t = stationary_target(data, 5, kSpec);
  const double F = sharpness(t.theta_star, data, kSpec);
  Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(data.X).householderQ();
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    Params p = t.theta_star;
    for (int j = 0; j < 5; ++j)
      p.theta().row(j) += (Q.rightCols(3) * testutil::random_vec(3, rng)).transpose();
    EXPECT_LT(loss(p, data, kSpec), 1e-24);
    EXPECT_NEAR(sharpness(p, data, kSpec), F, 1e-12 * F);
    EXPECT_LT(stationarity_gap(p, data, t), 1e-12);
    auto s = make_manifold_state(p, data, kSpec);
    EXPECT_LT(riemannian_gradient(s, data).norm(), 1e-10);
  }
}

TEST(StationarityGap, Examples) {
  auto data = box_data(2, 4, 4);
  auto t = stationary_target(data, 2, kSpec);
  Params p = t.theta_star;
  p.theta().row(1) += 0.1 * data.X.col(0).transpose();
  double expect = std::max(0.1, 0.1 * std::abs(data.X.col(0).dot(data.X.col(1))));
  EXPECT_NEAR(stationarity_gap(p, data, t), expect, 1e-12);
  EXPECT_THROW(stationarity_gap(Params(2, 3), data, t), DimensionMismatch);
}

TEST(Checks, SemiMonotonicityAndRayleighAtStationaryPoint) {
  auto data = box_data(3, 5, 5);
  auto t = stationary_target(data, 4, kSpec);
  auto s = make_manifold_state(t.theta_star, data, kSpec);
  auto c = region_check_constants(kSpec, data, sharpness(s.bundle));
  auto semi = semi_monotonicity_check(s, data, t, c);
  EXPECT_TRUE(semi.pass);
  EXPECT_FALSE(semi.skipped);
  EXPECT_TRUE(rayleigh_check(s, data, c).skipped);
  auto psd = psd_check(s, data, c);
  EXPECT_TRUE(psd.pass);
  EXPECT_FALSE(psd.skipped);
}

TEST(Checks, SkipOutsideThreshold) {
  std::mt19937_64 rng(6);
  auto data = box_data(3, 5, 6);
  RetractOptions ro;
  ro.basin = 1e300;
  ro.max_iters = 200;
  Params p = retract(random_params(10, 5, 0.3, 60), data, kSpec, ro).theta;
  auto s = make_manifold_state(p, data, kSpec);
  auto c = region_check_constants(kSpec, data, sharpness(s.bundle));
  ASSERT_GT(riemannian_gradient(s, data).norm(), c.threshold());
  EXPECT_TRUE(psd_check(s, data, c).skipped);
  EXPECT_TRUE(rayleigh_check(s, data, c).skipped);
  EXPECT_TRUE(semi_monotonicity_check(s, data, stationary_target(data, 10, kSpec), c).skipped);
}

TEST(Checks, RegionConstants) {
  auto data = box_data(3, 5, 7);
  auto c = region_check_constants(kSpec, data, 49.0);
  EXPECT_NEAR(c.zmax, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(c.rho1, 1.0, 1e-12);
  EXPECT_NEAR(c.rho2, 6.0, 1e-12);
  EXPECT_NEAR(c.beta, 16.0 / 3.0, 1e-6);
  EXPECT_NEAR(c.threshold(), std::sqrt(data.mu) * c.beta, 1e-15);
}

TEST(DecayRate, SyntheticSlopeIsRecovered) {
  auto c = unit_constants();
  auto tr = synthetic_decay(2.0, 50, 0.1, 0.5);
  auto r = decay_rate_estimate(tr, c);
  EXPECT_NEAR(r.measured, -2.0, 1e-10);
  EXPECT_TRUE(r.pass);

  auto slow = synthetic_decay(0.5, 50, 0.1, 0.5);
  EXPECT_FALSE(decay_rate_estimate(slow, c).pass);

  // Samples above the threshold are ignored.
  auto early = synthetic_decay(2.0, 60, 0.1, 5.0);
  auto re = decay_rate_estimate(early, c);
  EXPECT_NEAR(re.measured, -2.0, 1e-10);
  EXPECT_GT(re.context["t0"].get<double>(), 0.0);
}

TEST(DecayRate, InsufficientSamples) {
  EXPECT_THROW(decay_rate_estimate(synthetic_decay(2.0, 9, 0.1, 0.5), unit_constants()), InsufficientSamples);
  EXPECT_THROW(decay_rate_estimate(synthetic_decay(2.0, 50, 0.1, 1e6), unit_constants()), InsufficientSamples);
}

TEST(DecayRate, CorruptedSampleFails) {
  auto tr = synthetic_decay(2.0, 50, 0.1, 0.5);
  *tr.samples[30].gradnorm *= 10.0;
  auto r = decay_rate_estimate(tr, unit_constants());
  EXPECT_FALSE(r.pass);
  EXPECT_GE(r.context["monotone_violations"].get<int>(), 1);
}

// With orthonormal data, a single neuron and phi'(z) = 1 at every sample, the
// constant 4 in the inequality is attained.
TEST(PlInequality, ConstantIsTight) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Identity(4, 3);
  Dataset data = make_dataset(X, Eigen::VectorXd::Constant(3, 0.7));
  ASSERT_NEAR(data.mu, 1.0, 1e-15);
  Params p(1, 4);
  p.flat(3) = 0.9;  // preactivations all zero
  auto r = pl_check(p, data, kSpec);
  EXPECT_NEAR(r.measured, 1.0, 1e-12);
  EXPECT_TRUE(r.pass);
}

TEST(PlInequality, HoldsAtRandomPointsAndSkipsAtZeroLoss) {
  auto data = box_data(3, 5, 8);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto r = pl_check(random_params(10, 5, 1.0, seed), data, kSpec);
    EXPECT_TRUE(r.pass) << r.measured;
  }
  std::mt19937_64 rng(9);
  auto inst = testutil::on_manifold(3, 3, 5, kSpec, rng);
  EXPECT_TRUE(pl_check(inst.theta, inst.data, kSpec).skipped);
}

TEST(SharpnessMonotone, DetectsIncrease) {
  FlowTrace tr;
  for (double F : {10.0, 9.0, 8.5, 8.5}) {
    FlowSample s;
    s.traceH = F;
    tr.samples.push_back(s);
  }
  EXPECT_TRUE(sharpness_monotone_check(tr).pass);
  tr.samples[3].traceH = 8.6;
  EXPECT_FALSE(sharpness_monotone_check(tr).pass);
}

TEST(TimeBound, FiniteForOddPolyAndNanForCube) {
  auto data = box_data(3, 5, 10);
  auto c = region_check_constants(kSpec, data, 30.0);
  auto tb = convergence_time_bound(30.0, kSpec, c, 1e-6);
  EXPECT_TRUE(std::isfinite(tb.global));
  EXPECT_TRUE(std::isfinite(tb.region));
  EXPECT_LT(tb.region, tb.global);
  auto cc = region_check_constants(cube(), data, 30.0);
  EXPECT_TRUE(std::isnan(convergence_time_bound(30.0, cube(), cc, 1e-6).global));
}

TEST(FeatureSpectrum, RankOneAtStationaryPoint) {
  auto data = box_data(3, 5, 11);
  auto t = stationary_target(data, 6, kSpec);
  Eigen::VectorXd sv = feature_spectrum(t.theta_star, data);
  ASSERT_EQ(sv.size(), 3);
  EXPECT_GT(sv(0), 0.0);
  EXPECT_LT(sv(1), 1e-12 * sv(0));
  EXPECT_NEAR(sv(0), std::sqrt(6.0) * t.nu.norm(), 1e-12);
}

TEST(Oracles, FiniteDifferenceGradientOfQuadratic) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Random(6, 6);
  A = A * A.transpose();
  kernels::ScalarField f = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(A * x); };
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -1, 1);
  EXPECT_LT((fd_gradient_oracle(f, x) - A * x).norm(), 1e-8);
  EXPECT_THROW(fd_gradient_oracle(f, x, 0.0), ConfigError);
}

TEST(Oracles, HessianTraceSingleSample) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
  x(0, 0) = 1.0;
  Params p(1, 2);
  auto data = make_dataset(x, Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(fd_hessian_trace_oracle(p, data, kSpec), 2.0, 1e-6);
  Dataset off = make_dataset(x, Eigen::VectorXd::Constant(1, 0.5));
  EXPECT_THROW(fd_hessian_trace_oracle(p, off, kSpec), ContractViolation);
}

TEST(Oracles, HessianTraceIsAdditiveOverSamples) {
  std::mt19937_64 rng(12);
  auto inst = testutil::on_manifold(3, 3, 5, kSpec, rng);
  double whole = fd_hessian_trace_oracle(inst.theta, inst.data, kSpec);
  double parts = 0.0;
  for (int i = 0; i < 3; ++i) {
    auto one = make_dataset(inst.data.X.col(i), inst.data.y.segment(i, 1));
    parts += fd_hessian_trace_oracle(inst.theta, one, kSpec);
  }
  EXPECT_NEAR(whole, parts, 1e-5 * whole);
  EXPECT_NEAR(whole, 2.0 * sharpness(inst.theta, inst.data, kSpec), 1e-4 * whole);
}

TEST(Oracles, NeuronPermutationSymmetry) {
  std::mt19937_64 rng(13);
  auto inst = testutil::on_manifold(4, 2, 4, kSpec, rng);
  Params perm(4, 4);
  for (int j = 0; j < 4; ++j) perm.theta().row(j) = inst.theta.theta().row((j + 1) % 4);
  EXPECT_NEAR(sharpness(perm, inst.data, kSpec), sharpness(inst.theta, inst.data, kSpec), 1e-12);
  EXPECT_NEAR(fd_hessian_trace_oracle(perm, inst.data, kSpec), fd_hessian_trace_oracle(inst.theta, inst.data, kSpec),
              1e-6);
}

TEST(VerifyTrace, RiemannianTraceHasAllChecks) {
  auto data = box_data(3, 5, 14);
  RetractOptions ro;
  ro.basin = 1e300;
  ro.max_iters = 200;
  Params p0 = retract(random_params(10, 5, 0.3, 140), data, kSpec, ro).theta;
  IntegratorConfig cfg;
  cfg.T = 1e4;
  auto tr = riemannian_flow(p0, data, kSpec, cfg);
  auto reports = verify_trace(tr, data, kSpec);
  std::set<std::string> names;
  for (const auto& r : reports) {
    names.insert(r.name);
    EXPECT_TRUE(r.pass) << r.name << " " << r.measured << " vs " << r.bound;
  }
  for (const char* n : {"semi_monotonicity", "psd_small_gradient", "strong_convexity_rayleigh", "gradient_norm_decay",
                        "bounded_region", "sharpness_monotone"})
    EXPECT_TRUE(names.count(n)) << n;

  FlowTrace corrupt = tr;
  auto& s = corrupt.samples[corrupt.samples.size() - 3];
  *s.gradnorm *= 100.0;
  bool decay_failed = false;
  for (const auto& r : verify_trace(corrupt, data, kSpec))
    if (r.name == "gradient_norm_decay" && !r.pass) decay_failed = true;
  EXPECT_TRUE(decay_failed);
}
