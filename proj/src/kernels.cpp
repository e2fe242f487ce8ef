#include "sharpflow/kernels.hpp"

#include <vector>

namespace sharpflow::kernels {

namespace {
Grid alloc(const Eigen::MatrixXd& z) {
  Grid g;
  g.phi.resize(z.rows(), z.cols());
  g.d1.resize(z.rows(), z.cols());
  g.d2.resize(z.rows(), z.cols());
  g.d3.resize(z.rows(), z.cols());
  return g;
}

inline void fill(Grid& g, const ActivationSpec& spec, const Eigen::MatrixXd& z, Eigen::Index k) {
  auto v = eval_activation(spec, z.data()[k]);
  g.phi.data()[k] = v.phi;
  g.d1.data()[k] = v.d1;
  g.d2.data()[k] = v.d2;
  g.d3.data()[k] = v.d3;
}

inline void add_block(Eigen::MatrixXd& H, const Eigen::MatrixXd& C, const Eigen::MatrixXd& X, Eigen::Index j) {
  const Eigen::Index d = X.rows();
  auto blk = H.block(j * d, j * d, d, d);
  for (Eigen::Index i = 0; i < X.cols(); ++i) blk.noalias() += C(j, i) * X.col(i) * X.col(i).transpose();
}
}  // namespace

Grid derivative_grid_serial(const ActivationSpec& spec, const Eigen::MatrixXd& z) {
  Grid g = alloc(z);
  for (Eigen::Index k = 0; k < z.size(); ++k) fill(g, spec, z, k);
  return g;
}

Grid derivative_grid_omp(const ActivationSpec& spec, const Eigen::MatrixXd& z) {
  Grid g = alloc(z);
  const Eigen::Index total = z.size();
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < total; ++k) fill(g, spec, z, k);
  return g;
}

Eigen::VectorXd fd_gradient_serial(const ScalarField& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd p = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    p(k) = x(k) + h;
    double fp = f(p);
    p(k) = x(k) - h;
    double fm = f(p);
    p(k) = x(k);
    g(k) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::VectorXd fd_gradient_omp(const ScalarField& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  const Eigen::Index n = x.size();
#pragma omp parallel
  {
    Eigen::VectorXd p = x;
#pragma omp for schedule(static)
    for (Eigen::Index k = 0; k < n; ++k) {
      p(k) = x(k) + h;
      double fp = f(p);
      p(k) = x(k) - h;
      double fm = f(p);
      p(k) = x(k);
      g(k) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

double fd_second_trace_serial(const ScalarField& f, const Eigen::VectorXd& x, double h) {
  const double f0 = f(x);
  Eigen::VectorXd p = x;
  double tr = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    p(k) = x(k) + h;
    double fp = f(p);
    p(k) = x(k) - h;
    double fm = f(p);
    p(k) = x(k);
    tr += (fp - 2.0 * f0 + fm) / (h * h);
  }
  return tr;
}

double fd_second_trace_omp(const ScalarField& f, const Eigen::VectorXd& x, double h) {
  const double f0 = f(x);
  const Eigen::Index n = x.size();
  std::vector<double> terms(static_cast<std::size_t>(n));
#pragma omp parallel
  {
    Eigen::VectorXd p = x;
#pragma omp for schedule(static)
    for (Eigen::Index k = 0; k < n; ++k) {
      p(k) = x(k) + h;
      double fp = f(p);
      p(k) = x(k) - h;
      double fm = f(p);
      p(k) = x(k);
      terms[static_cast<std::size_t>(k)] = (fp - 2.0 * f0 + fm) / (h * h);
    }
  }
  double tr = 0.0;
  for (double t : terms) tr += t;
  return tr;
}

Eigen::MatrixXd block_hessian_serial(const Eigen::MatrixXd& C, const Eigen::MatrixXd& X) {
  const Eigen::Index md = C.rows() * X.rows();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(md, md);
  for (Eigen::Index j = 0; j < C.rows(); ++j) add_block(H, C, X, j);
  return H;
}

Eigen::MatrixXd block_hessian_omp(const Eigen::MatrixXd& C, const Eigen::MatrixXd& X) {
  const Eigen::Index md = C.rows() * X.rows();
  const Eigen::Index m = C.rows();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(md, md);
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < m; ++j) add_block(H, C, X, j);
  return H;
}

Grid derivative_grid(const ActivationSpec& spec, const Eigen::MatrixXd& z) {
  return z.size() >= kParallelThreshold ? derivative_grid_omp(spec, z) : derivative_grid_serial(spec, z);
}

Eigen::MatrixXd block_hessian(const Eigen::MatrixXd& C, const Eigen::MatrixXd& X) {
  return C.size() * X.rows() >= kParallelThreshold ? block_hessian_omp(C, X) : block_hessian_serial(C, X);
}

}  // namespace sharpflow::kernels
