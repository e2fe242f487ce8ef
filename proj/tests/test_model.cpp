#include "helpers.hpp"

#include "sharpflow/errors.hpp"

#include <gtest/gtest.h>

using namespace sharpflow;
using testutil::rel_err;

namespace {

struct Random {
  Dataset data;
  Params theta;
};

Random random_instance(std::mt19937_64& rng, double range = 2.0) {
  std::uniform_int_distribution<int> nd(1, 5), dd(1, 8), md(1, 4);
  std::uniform_real_distribution<double> u(-range, range);
  int n = nd(rng), d = dd(rng), m = md(rng);
  Eigen::MatrixXd X = testutil::unit_columns(d, n, rng);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = u(rng);
  return {make_dataset(X, y), testutil::uniform_params(m, d, -range, range, rng)};
}

Eigen::VectorXd central_diff(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                             double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd p = x, q = x;
    p(k) += h;
    q(k) -= h;
    g(k) = (f(p) - f(q)) / (2 * h);
  }
  return g;
}

double naive_output(const Params& p, const Dataset& data, const ActivationSpec& s, int i) {
  double out = 0.0;
  for (int j = 0; j < p.m; ++j) {
    double z = 0.0;
    for (int r = 0; r < p.d; ++r) z += p.flat(j * p.d + r) * data.X(r, i);
    out += eval_activation(s, z).phi;
  }
  return out;
}

const ActivationSpec kSpec = odd_poly(1, 1.0);

}  // namespace

TEST(Model, OutputsExamples) {
  std::mt19937_64 rng(1);
  Eigen::MatrixXd X = testutil::unit_columns(4, 3, rng);
  auto data = make_dataset(X, Eigen::VectorXd::Zero(3));
  auto b = network_outputs(Params(1, 4), data, kSpec);
  EXPECT_TRUE(b.f.isZero(0.0));

  auto one = make_dataset(X.leftCols(1), Eigen::VectorXd::Zero(1));
  Params twin(2, 4);
  twin.theta().row(0) << 0.3, -0.2, 0.5, 0.1;
  twin.theta().row(1) = twin.theta().row(0);
  double z = twin.theta().row(0).dot(X.col(0));
  EXPECT_NEAR(network_outputs(twin, one, kSpec).f(0), 2.0 * eval_activation(kSpec, z).phi, 1e-15);
}

TEST(Model, OutputsMatchNaiveLoop) {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd X = testutil::unit_columns(5, 4, rng);
  auto data = make_dataset(X, Eigen::VectorXd::Zero(4));
  Params p = testutil::uniform_params(3, 5, -2, 2, rng);
  for (auto s : {kSpec, odd_poly(2, 0.5), cube()}) {
    auto b = network_outputs(p, data, s);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(b.f(i), naive_output(p, data, s, i), 1e-12 * (1 + std::abs(b.f(i))));
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 4; ++i) {
        auto v = eval_activation(s, p.theta().row(j).dot(X.col(i)));
        EXPECT_NEAR(b.d1(j, i), v.d1, 1e-12 * (1 + std::abs(v.d1)));
        EXPECT_NEAR(b.d3(j, i), v.d3, 1e-12 * (1 + std::abs(v.d3)));
      }
  }
}

TEST(Model, DimensionMismatch) {
  auto data = make_dataset(Eigen::MatrixXd::Identity(3, 2), Eigen::VectorXd::Zero(2));
  EXPECT_THROW(network_outputs(Params(2, 4), data, kSpec), DimensionMismatch);
  EXPECT_THROW(Params(Eigen::VectorXd::Zero(5), 2, 3), DimensionMismatch);
  EXPECT_THROW(sample_hessian_quadform(Params(1, 3), data, kSpec, 2, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)),
               std::out_of_range);
}

TEST(Model, LossExamples) {
  std::mt19937_64 rng(3);
  auto inst = testutil::on_manifold(3, 2, 4, kSpec, rng);
  EXPECT_EQ(loss(inst.theta, inst.data, kSpec), 0.0);
  Eigen::VectorXd y = inst.data.y;
  y(0) += 1.0;
  auto shifted = make_dataset(inst.data.X, y);
  EXPECT_NEAR(loss(inst.theta, shifted, kSpec), 1.0, 1e-14);

  for (int t = 0; t < 20; ++t) {
    auto r = random_instance(rng);
    double direct = 0.0;
    for (int i = 0; i < r.data.n(); ++i) {
      double e = naive_output(r.theta, r.data, kSpec, i) - r.data.y(i);
      direct += e * e;
    }
    EXPECT_NEAR(loss(r.theta, r.data, kSpec), direct, 1e-11 * (1 + direct));
  }
}

TEST(Model, LossGradientExamples) {
  std::mt19937_64 rng(4);
  auto inst = testutil::on_manifold(2, 3, 5, kSpec, rng);
  EXPECT_TRUE(loss_euclid_gradient(inst.theta, inst.data, kSpec).isZero(0.0));

  Eigen::VectorXd x = testutil::unit_columns(3, 1, rng).col(0);
  Params p(1, 3);
  p.flat << 0.4, -0.1, 0.2;
  auto data = make_dataset(x, Eigen::VectorXd::Constant(1, 0.3));
  double z = p.flat.dot(x);
  double r = eval_activation(kSpec, z).phi - 0.3;
  Eigen::VectorXd expect = 2.0 * r * eval_activation(kSpec, z).d1 * x;
  EXPECT_LT((loss_euclid_gradient(p, data, kSpec) - expect).norm(), 1e-14);
}

TEST(Model, GradientsMatchFiniteDifferencesOnRandomInstances) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    auto r = random_instance(rng);
    const int m = r.theta.m, d = r.theta.d;
    auto L = [&](const Eigen::VectorXd& v) { return loss(Params(v, m, d), r.data, kSpec); };
    auto F = [&](const Eigen::VectorXd& v) { return sharpness(Params(v, m, d), r.data, kSpec); };
    Eigen::VectorXd gL = loss_euclid_gradient(r.theta, r.data, kSpec);
    Eigen::VectorXd gF = trace_hessian_euclid_grad(r.theta, r.data, kSpec);
    ASSERT_LE(rel_err(central_diff(L, r.theta.flat, 1e-5), gL), 1e-5) << "instance " << t;
    ASSERT_LE(rel_err(central_diff(F, r.theta.flat, 1e-5), gF), 1e-5) << "instance " << t;
  }
}

TEST(Model, JacobianExamples) {
  std::mt19937_64 rng(6);
  Eigen::MatrixXd X = testutil::unit_columns(4, 3, rng);
  auto data = make_dataset(X, Eigen::VectorXd::Zero(3));
  Eigen::MatrixXd J0 = jacobian(Params(2, 4), data, kSpec);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_TRUE(J0.block(i, j * 4, 1, 4).isApprox(X.col(i).transpose()));

  Params p = testutil::uniform_params(2, 4, -1, 1, rng);
  auto b = network_outputs(p, data, kSpec);
  Eigen::MatrixXd J = jacobian(b, data);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(J.row(i).squaredNorm(), b.d1.col(i).squaredNorm(), 1e-12);

  for (int i = 0; i < 3; ++i) {
    auto fi = [&](const Eigen::VectorXd& v) { return network_outputs(Params(v, 2, 4), data, kSpec).f(i); };
    Eigen::VectorXd row = J.row(i).transpose();
    EXPECT_LE(rel_err(central_diff(fi, p.flat, 1e-5), row), 1e-6);
  }
}

TEST(Model, SampleHessianExamples) {
  std::mt19937_64 rng(7);
  Eigen::MatrixXd X = testutil::unit_columns(4, 2, rng);
  auto data = make_dataset(X, Eigen::VectorXd::Zero(2));
  Params p = testutil::uniform_params(3, 4, -1, 1, rng);

  // A direction orthogonal to x_0 in every neuron block.
  Eigen::VectorXd u = testutil::random_vec(12, rng);
  for (int j = 0; j < 3; ++j) {
    auto blk = u.segment(j * 4, 4);
    blk -= blk.dot(X.col(0)) * X.col(0);
  }
  Eigen::VectorXd w = testutil::random_vec(12, rng);
  EXPECT_NEAR(sample_hessian_quadform(p, data, kSpec, 0, u, w), 0.0, 1e-13);
  EXPECT_EQ(sample_hessian_quadform(Params(3, 4), data, kSpec, 1, w, w), 0.0);

  double a = sample_hessian_quadform(p, data, kSpec, 1, u, w);
  double b = sample_hessian_quadform(p, data, kSpec, 1, w, u);
  EXPECT_NEAR(a, b, 1e-13);
}

TEST(Model, SampleHessianMatchesSecondDifferences) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    auto r = random_instance(rng, 1.0);
    const int m = r.theta.m, d = r.theta.d;
    Eigen::VectorXd u = testutil::random_vec(m * d, rng).normalized();
    Eigen::VectorXd w = testutil::random_vec(m * d, rng).normalized();
    for (int i = 0; i < r.data.n(); ++i) {
      auto f = [&](const Eigen::VectorXd& v) { return network_outputs(Params(v, m, d), r.data, kSpec).f(i); };
      const double h = 1e-4;
      const Eigen::VectorXd& x = r.theta.flat;
      double fd = (f(x + h * u + h * w) - f(x + h * u - h * w) - f(x - h * u + h * w) + f(x - h * u - h * w)) /
                  (4 * h * h);
      EXPECT_NEAR(sample_hessian_quadform(r.theta, r.data, kSpec, i, u, w), fd, 1e-5);
    }
  }
}

TEST(Model, TraceHessianExamples) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
  x(0, 0) = 1.0;
  Params p(1, 2);
  p.flat << 0.0, 0.7;  // theta . x = 0
  auto data = make_dataset(x, Eigen::VectorXd::Zero(1));
  EXPECT_DOUBLE_EQ(trace_hessian(p, data, kSpec), 1.0);

  GenerateOptions opt;
  opt.mu_min = 0.05;
  auto ds = generate_dataset(3, 5, LabelMode::UniformBox, 11, opt);
  auto target = stationary_target(ds, 4, kSpec);
  double expect = 0.0;
  for (int i = 0; i < 3; ++i) expect += 4 * std::pow(eval_activation(kSpec, target.nu(i)).d1, 2);
  EXPECT_NEAR(trace_hessian(target.theta_star, ds, kSpec), expect, 1e-12);

  EXPECT_THROW(trace_hessian(Params(4, 5), ds, kSpec), ContractViolation);
  EXPECT_NO_THROW(trace_hessian(Params(4, 5), ds, kSpec, 10.0));
}

TEST(Model, TraceHessianEqualsJacobianRowNorms) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    auto inst = testutil::on_manifold(1 + t % 4, 1 + t % 5, 5 + t % 4, kSpec, rng, -2, 2);
    Eigen::MatrixXd J = jacobian(inst.theta, inst.data, kSpec);
    EXPECT_NEAR(trace_hessian(inst.theta, inst.data, kSpec), J.rowwise().squaredNorm().sum(),
                1e-12 * J.squaredNorm());
  }
}

TEST(Model, TraceHessianIsEven) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 20; ++t) {
    auto r = random_instance(rng);
    Params neg(-r.theta.flat, r.theta.m, r.theta.d);
    EXPECT_DOUBLE_EQ(sharpness(r.theta, r.data, kSpec), sharpness(neg, r.data, kSpec));
  }
}

TEST(Model, TraceGradientExamples) {
  std::mt19937_64 rng(11);
  Eigen::MatrixXd X = testutil::unit_columns(3, 2, rng);
  auto data = make_dataset(X, Eigen::VectorXd::Zero(2));
  EXPECT_TRUE(trace_hessian_euclid_grad(Params(2, 3), data, kSpec).isZero(0.0));

  Params p(1, 3);
  p.flat << 0.2, 0.5, -0.3;
  auto one = make_dataset(X.leftCols(1), Eigen::VectorXd::Zero(1));
  auto v = eval_activation(kSpec, p.flat.dot(X.col(0)));
  Eigen::VectorXd expect = 2 * v.d1 * v.d2 * X.col(0);
  EXPECT_LT((trace_hessian_euclid_grad(p, one, kSpec) - expect).norm(), 1e-14);
}

TEST(Model, TraceQuadformExamples) {
  std::mt19937_64 rng(12);
  Eigen::MatrixXd X = testutil::unit_columns(4, 2, rng);
  auto data = make_dataset(X, Eigen::VectorXd::Zero(2));
  Params p = testutil::uniform_params(2, 4, -1, 1, rng);

  // Orthogonal to both data points in every neuron.
  Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(X).householderQ();
  Eigen::VectorXd u(8);
  u << Q.col(2), Q.col(3);
  Eigen::VectorXd w = testutil::random_vec(8, rng);
  EXPECT_NEAR(trace_hessian_euclid_quadform(p, data, kSpec, u, w), 0.0, 1e-13);

  // At theta = 0: phi'' = 0, phi''' = 6, phi' = 1, so only 2*6*(x.u)^2 survives.
  auto one = make_dataset(X.leftCols(1), Eigen::VectorXd::Zero(1));
  Eigen::VectorXd a = Eigen::VectorXd::Zero(8);
  a.head(4) = 0.7 * X.col(0);
  EXPECT_NEAR(trace_hessian_euclid_quadform(Params(2, 4), one, kSpec, a, a), 12.0 * 0.49, 1e-14);
}

TEST(Model, TraceQuadformMatchesGradientDifferences) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 100; ++t) {
    auto r = random_instance(rng);
    const int m = r.theta.m, d = r.theta.d;
    Eigen::VectorXd u = testutil::random_vec(m * d, rng);
    Eigen::VectorXd w = testutil::random_vec(m * d, rng);
    const double h = 1e-5;
    Eigen::VectorXd gp = trace_hessian_euclid_grad(Params(r.theta.flat + h * w, m, d), r.data, kSpec);
    Eigen::VectorXd gm = trace_hessian_euclid_grad(Params(r.theta.flat - h * w, m, d), r.data, kSpec);
    double fd = u.dot(gp - gm) / (2 * h);
    double q = trace_hessian_euclid_quadform(r.theta, r.data, kSpec, u, w);
    ASSERT_LE(rel_err(fd, q), 1e-5) << "instance " << t;
    EXPECT_NEAR(q, trace_hessian_euclid_quadform(r.theta, r.data, kSpec, w, u), 1e-10 * (1 + std::abs(q)));
  }
}
