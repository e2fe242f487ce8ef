#include "sharpflow/model.hpp"

#include "sharpflow/errors.hpp"
#include "sharpflow/kernels.hpp"

#include <cmath>
#include <sstream>

namespace sharpflow {

Params::Params(Eigen::VectorXd v, int m_, int d_) : flat(std::move(v)), m(m_), d(d_) {
  if (m < 1 || d < 1 || flat.size() != Eigen::Index(m) * d)
    throw DimensionMismatch("Params: flat vector of length " + std::to_string(flat.size()) + " is not m*d = " +
                            std::to_string(m) + "*" + std::to_string(d));
}

Params Params::from_matrix(const Eigen::MatrixXd& theta) {
  Params p(int(theta.rows()), int(theta.cols()));
  p.theta() = theta;
  return p;
}

void check_dims(const Params& theta, const Dataset& data) {
  if (theta.d != data.d() || theta.flat.size() != Eigen::Index(theta.m) * theta.d) {
    std::ostringstream os;
    os << "parameter dimension " << theta.d << " (m=" << theta.m << ", flat " << theta.flat.size()
       << ") does not match data dimension " << data.d();
    throw DimensionMismatch(os.str());
  }
}

namespace {
void check_vec(const DerivativeBundle& b, const Dataset& data, const Eigen::VectorXd& u, const char* what) {
  if (u.size() != b.preacts.rows() * data.d())
    throw DimensionMismatch(std::string(what) + ": direction has length " + std::to_string(u.size()));
}

Eigen::Map<const RowMajorMatrix> as_matrix(const Eigen::VectorXd& v, Eigen::Index m, Eigen::Index d) {
  return {v.data(), m, d};
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& G) {
  RowMajorMatrix r = G;
  return Eigen::Map<const Eigen::VectorXd>(r.data(), r.size());
}
}  // namespace

DerivativeBundle network_outputs(const Params& theta, const Dataset& data, const ActivationSpec& spec) {
  check_dims(theta, data);
  DerivativeBundle b;
  b.preacts = theta.theta() * data.X;
  auto g = kernels::derivative_grid(spec, b.preacts);
  b.d1 = std::move(g.d1);
  b.d2 = std::move(g.d2);
  b.d3 = std::move(g.d3);
  b.f = g.phi.colwise().sum().transpose();
  return b;
}

double loss(const DerivativeBundle& b, const Dataset& data) { return (b.f - data.y).squaredNorm(); }

double loss(const Params& theta, const Dataset& data, const ActivationSpec& spec) {
  return loss(network_outputs(theta, data, spec), data);
}

Eigen::VectorXd loss_euclid_gradient(const DerivativeBundle& b, const Dataset& data) {
  Eigen::RowVectorXd r2 = 2.0 * (b.f - data.y).transpose();
  Eigen::MatrixXd A = b.d1.array().rowwise() * r2.array();
  return flatten(A * data.X.transpose());
}

Eigen::VectorXd loss_euclid_gradient(const Params& theta, const Dataset& data, const ActivationSpec& spec) {
  return loss_euclid_gradient(network_outputs(theta, data, spec), data);
}

Eigen::MatrixXd jacobian(const DerivativeBundle& b, const Dataset& data) {
  const Eigen::Index m = b.preacts.rows(), n = data.n(), d = data.d();
  Eigen::MatrixXd J(n, m * d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) J.block(i, j * d, 1, d) = b.d1(j, i) * data.X.col(i).transpose();
  return J;
}

Eigen::MatrixXd jacobian(const Params& theta, const Dataset& data, const ActivationSpec& spec) {
  return jacobian(network_outputs(theta, data, spec), data);
}

double sample_hessian_quadform(const DerivativeBundle& b, const Dataset& data, int i, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& w) {
  if (i < 0 || i >= data.n())
    throw std::out_of_range("sample_hessian_quadform: sample index " + std::to_string(i) + " out of range");
  check_vec(b, data, u, "sample_hessian_quadform");
  check_vec(b, data, w, "sample_hessian_quadform");
  const Eigen::Index m = b.preacts.rows(), d = data.d();
  Eigen::VectorXd pu = as_matrix(u, m, d) * data.X.col(i);
  Eigen::VectorXd pw = as_matrix(w, m, d) * data.X.col(i);
  return (b.d2.col(i).array() * pu.array() * pw.array()).sum();
}

double sample_hessian_quadform(const Params& theta, const Dataset& data, const ActivationSpec& spec, int i,
                               const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
  return sample_hessian_quadform(network_outputs(theta, data, spec), data, i, u, w);
}

double sharpness(const DerivativeBundle& b) { return b.d1.squaredNorm(); }

double sharpness(const Params& theta, const Dataset& data, const ActivationSpec& spec) {
  return sharpness(network_outputs(theta, data, spec));
}

double trace_hessian(const Params& theta, const Dataset& data, const ActivationSpec& spec, double tol) {
  auto b = network_outputs(theta, data, spec);
  double res = data.n() ? (b.f - data.y).cwiseAbs().maxCoeff() : 0.0;
  if (res > tol) {
    std::ostringstream os;
    os << "trace_hessian: residual " << res << " exceeds manifold tolerance " << tol;
    throw ContractViolation(os.str());
  }
  return sharpness(b);
}

Eigen::VectorXd trace_hessian_euclid_grad(const DerivativeBundle& b, const Dataset& data) {
  Eigen::MatrixXd A = 2.0 * b.d1.cwiseProduct(b.d2);
  return flatten(A * data.X.transpose());
}

Eigen::VectorXd trace_hessian_euclid_grad(const Params& theta, const Dataset& data, const ActivationSpec& spec) {
  return trace_hessian_euclid_grad(network_outputs(theta, data, spec), data);
}

double trace_hessian_euclid_quadform(const DerivativeBundle& b, const Dataset& data, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& w) {
  check_vec(b, data, u, "trace_hessian_euclid_quadform");
  check_vec(b, data, w, "trace_hessian_euclid_quadform");
  const Eigen::Index m = b.preacts.rows(), d = data.d();
  Eigen::MatrixXd PU = as_matrix(u, m, d) * data.X;
  Eigen::MatrixXd PW = as_matrix(w, m, d) * data.X;
  Eigen::ArrayXXd c = 2.0 * b.d2.array().square() + 2.0 * b.d3.array() * b.d1.array();
  return (c * PU.array() * PW.array()).sum();
}

double trace_hessian_euclid_quadform(const Params& theta, const Dataset& data, const ActivationSpec& spec,
                                     const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
  return trace_hessian_euclid_quadform(network_outputs(theta, data, spec), data, u, w);
}

}  // namespace sharpflow
