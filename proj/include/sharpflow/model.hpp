#pragma once

#include "sharpflow/activation.hpp"
#include "sharpflow/dataset.hpp"

#include <Eigen/Dense>

namespace sharpflow {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Neuron weights Theta (m x d), stored flat and row-major by neuron so that
// coordinates j*d .. j*d+d-1 are neuron j.
struct Params {
  Eigen::VectorXd flat;
  int m = 0;
  int d = 0;

  Params() = default;
  Params(int m_, int d_) : flat(Eigen::VectorXd::Zero(Eigen::Index(m_) * d_)), m(m_), d(d_) {}
  Params(Eigen::VectorXd v, int m_, int d_);
  static Params from_matrix(const Eigen::MatrixXd& theta);

  Eigen::Map<RowMajorMatrix> theta() { return {flat.data(), m, d}; }
  Eigen::Map<const RowMajorMatrix> theta() const { return {flat.data(), m, d}; }
  Eigen::Index size() const { return flat.size(); }
};

struct DerivativeBundle {
  Eigen::MatrixXd preacts;  // m x n
  Eigen::MatrixXd d1, d2, d3;
  Eigen::VectorXd f;  // n
};

DerivativeBundle network_outputs(const Params& theta, const Dataset& data, const ActivationSpec& spec);

double loss(const Params& theta, const Dataset& data, const ActivationSpec& spec);
double loss(const DerivativeBundle& b, const Dataset& data);

Eigen::VectorXd loss_euclid_gradient(const Params& theta, const Dataset& data, const ActivationSpec& spec);
Eigen::VectorXd loss_euclid_gradient(const DerivativeBundle& b, const Dataset& data);

Eigen::MatrixXd jacobian(const Params& theta, const Dataset& data, const ActivationSpec& spec);
Eigen::MatrixXd jacobian(const DerivativeBundle& b, const Dataset& data);

double sample_hessian_quadform(const Params& theta, const Dataset& data, const ActivationSpec& spec, int i,
                               const Eigen::VectorXd& u, const Eigen::VectorXd& w);
double sample_hessian_quadform(const DerivativeBundle& b, const Dataset& data, int i, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& w);

// Sum over i, j of phi'(theta_j . x_i)^2, without any manifold check.
double sharpness(const DerivativeBundle& b);
double sharpness(const Params& theta, const Dataset& data, const ActivationSpec& spec);

// Same quantity, but rejects points whose residual exceeds tol.
double trace_hessian(const Params& theta, const Dataset& data, const ActivationSpec& spec, double tol = 1e-8);

Eigen::VectorXd trace_hessian_euclid_grad(const Params& theta, const Dataset& data, const ActivationSpec& spec);
Eigen::VectorXd trace_hessian_euclid_grad(const DerivativeBundle& b, const Dataset& data);

double trace_hessian_euclid_quadform(const Params& theta, const Dataset& data, const ActivationSpec& spec,
                                     const Eigen::VectorXd& u, const Eigen::VectorXd& w);
double trace_hessian_euclid_quadform(const DerivativeBundle& b, const Dataset& data, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& w);

void check_dims(const Params& theta, const Dataset& data);

}  // namespace sharpflow
