#pragma once

#include "sharpflow/analysis.hpp"

#include <random>

namespace testutil {

using namespace sharpflow;

inline Eigen::MatrixXd unit_columns(int d, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd X(d, n);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < d; ++r) X(r, i) = g(rng);
    X.col(i) /= X.col(i).norm();
  }
  return X;
}

inline Params uniform_params(int m, int d, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Params p(m, d);
  for (Eigen::Index k = 0; k < p.size(); ++k) p.flat(k) = u(rng);
  return p;
}

inline Eigen::VectorXd random_vec(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = g(rng);
  return v;
}

// Labels chosen as the network output at theta, so theta lies exactly on the
// zero-loss set.
inline Dataset fit_labels(const Eigen::MatrixXd& X, const Params& theta, const ActivationSpec& spec) {
  Dataset tmp = make_dataset(X, Eigen::VectorXd::Zero(X.cols()));
  return make_dataset(X, network_outputs(theta, tmp, spec).f);
}

struct Instance {
  Dataset data;
  Params theta;
};

// Random on-manifold instance with n <= d so the Jacobian has full row rank.
inline Instance on_manifold(int m, int n, int d, const ActivationSpec& spec, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
  Eigen::MatrixXd X = unit_columns(d, n, rng);
  Params theta = uniform_params(m, d, lo, hi, rng);
  return {fit_labels(X, theta, spec), theta};
}

inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace testutil
