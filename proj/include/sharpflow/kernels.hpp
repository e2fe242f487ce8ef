#pragma once

#include "sharpflow/activation.hpp"

#include <Eigen/Dense>
#include <functional>

// Data-parallel kernels.  Each has a plain serial reference and an OpenMP
// variant; the two produce bit-identical output because every parallel loop
// writes disjoint slots and any reduction runs afterwards in fixed order.
namespace sharpflow::kernels {

struct Grid {
  Eigen::MatrixXd phi, d1, d2, d3;
};

Grid derivative_grid_serial(const ActivationSpec& spec, const Eigen::MatrixXd& z);
Grid derivative_grid_omp(const ActivationSpec& spec, const Eigen::MatrixXd& z);

using ScalarField = std::function<double(const Eigen::VectorXd&)>;

Eigen::VectorXd fd_gradient_serial(const ScalarField& f, const Eigen::VectorXd& x, double h);
Eigen::VectorXd fd_gradient_omp(const ScalarField& f, const Eigen::VectorXd& x, double h);

double fd_second_trace_serial(const ScalarField& f, const Eigen::VectorXd& x, double h);
double fd_second_trace_omp(const ScalarField& f, const Eigen::VectorXd& x, double h);

// Block-diagonal matrix whose j-th d x d block is sum_i C(j,i) x_i x_i^T.
Eigen::MatrixXd block_hessian_serial(const Eigen::MatrixXd& C, const Eigen::MatrixXd& X);
Eigen::MatrixXd block_hessian_omp(const Eigen::MatrixXd& C, const Eigen::MatrixXd& X);

// Below this many entries the OpenMP fork costs more than the loop.
inline constexpr Eigen::Index kParallelThreshold = 4096;

Grid derivative_grid(const ActivationSpec& spec, const Eigen::MatrixXd& z);
Eigen::MatrixXd block_hessian(const Eigen::MatrixXd& C, const Eigen::MatrixXd& X);

}  // namespace sharpflow::kernels
