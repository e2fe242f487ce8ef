#pragma once

#include "sharpflow/model.hpp"

#include <Eigen/Dense>
#include <vector>

namespace sharpflow {

struct ManifoldState {
  Params theta;
  DerivativeBundle bundle;
  Eigen::VectorXd residual;  // f(theta) - y
  Eigen::MatrixXd jac;       // n x md
  Eigen::MatrixXd gram;      // jac * jac^T
  double tol = 1e-8;
  double condition = 1.0;
  double lambda_min = 0.0;
  bool ill_conditioned = false;  // solves go through a truncated eigendecomposition
  bool jittered = false;

  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd eig_vectors;
  Eigen::VectorXd eig_inverse;  // zero for truncated directions

  Eigen::VectorXd solve_gram(const Eigen::VectorXd& rhs) const;
};

ManifoldState make_manifold_state(const Params& theta, const Dataset& data, const ActivationSpec& spec,
                                  double tol = 1e-8);

Eigen::VectorXd normal_coefficients(const ManifoldState& state, const Eigen::VectorXd& g);
Eigen::VectorXd project_tangent(const ManifoldState& state, const Eigen::VectorXd& v);
Eigen::VectorXd riemannian_gradient(const ManifoldState& state, const Dataset& data);

bool is_tangent(const ManifoldState& state, const Eigen::VectorXd& u, double rel = 1e-8);

double manifold_hessian_quadform(const ManifoldState& state, const Dataset& data, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& w);

// The same bilinear form assembled as an md x md block-diagonal matrix.
Eigen::MatrixXd manifold_hessian_matrix(const ManifoldState& state, const Dataset& data);

Eigen::MatrixXd tangent_basis(const ManifoldState& state);
Eigen::VectorXd tangent_spectrum(const Eigen::MatrixXd& H, const Eigen::MatrixXd& basis);
Eigen::VectorXd manifold_hessian_spectrum(const ManifoldState& state, const Dataset& data);

struct RetractOptions {
  double tol = 1e-10;
  int max_iters = 50;
  double basin = 1.0;  // refuse inputs with ||f - y||_inf above this
};

struct RetractResult {
  Params theta;
  int iterations = 0;
  std::vector<double> history;  // ||f - y||_inf before each iteration and at exit
};

RetractResult retract(const Params& theta, const Dataset& data, const ActivationSpec& spec,
                      const RetractOptions& opt = {});

Params retract_to_manifold(const Params& theta, const Dataset& data, const ActivationSpec& spec,
                           double tol = 1e-10);

}  // namespace sharpflow
