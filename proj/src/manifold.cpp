#include "sharpflow/manifold.hpp"

#include "sharpflow/errors.hpp"
#include "sharpflow/kernels.hpp"

#include <cmath>
#include <sstream>

namespace sharpflow {

namespace {
constexpr double kDegenerate = 1e-12;
constexpr double kIllConditioned = 1e10;
constexpr double kTruncate = 1e-10;

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }
}  // namespace

Eigen::VectorXd ManifoldState::solve_gram(const Eigen::VectorXd& rhs) const {
  if (rhs.size() == 0) return rhs;
  if (ill_conditioned) return eig_vectors * eig_inverse.cwiseProduct(eig_vectors.transpose() * rhs);
  return llt.solve(rhs);
}

ManifoldState make_manifold_state(const Params& theta, const Dataset& data, const ActivationSpec& spec, double tol) {
  ManifoldState s;
  s.theta = theta;
  s.tol = tol;
  s.bundle = network_outputs(theta, data, spec);
  s.residual = s.bundle.f - data.y;
  double res = inf_norm(s.residual);
  if (!(res <= tol)) {
    std::ostringstream os;
    os << "point is off the manifold: ||f - y||_inf = " << res << " > " << tol;
    throw OffManifold(os.str(), res);
  }
  s.jac = jacobian(s.bundle, data);
  s.gram = s.jac * s.jac.transpose();
  if (data.n() == 0) return s;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.gram);
  const Eigen::VectorXd& lam = es.eigenvalues();
  double lmax = lam(lam.size() - 1);
  s.lambda_min = lam(0);
  if (!(lmax > 0.0) || s.lambda_min <= kDegenerate * lmax) {
    std::ostringstream os;
    os << "Jacobian rows are linearly dependent: smallest Gram eigenvalue " << s.lambda_min << " (largest " << lmax
       << ")";
    throw DegenerateJacobian(os.str(), s.lambda_min);
  }
  s.condition = lmax / s.lambda_min;
  if (s.condition > kIllConditioned) {
    s.ill_conditioned = true;
    s.eig_vectors = es.eigenvectors();
    s.eig_inverse = lam.unaryExpr([&](double l) { return l > kTruncate * lmax ? 1.0 / l : 0.0; });
    return s;
  }
  s.llt.compute(s.gram);
  if (s.llt.info() != Eigen::Success) {
    Eigen::MatrixXd g = s.gram;
    g.diagonal().array() += 1e-12 * s.gram.trace();
    s.llt.compute(g);
    s.jittered = true;
    if (s.llt.info() != Eigen::Success)
      throw DegenerateJacobian("Gram factorization failed after jitter", s.lambda_min);
  }
  return s;
}

Eigen::VectorXd normal_coefficients(const ManifoldState& state, const Eigen::VectorXd& g) {
  if (g.size() != state.jac.cols())
    throw DimensionMismatch("normal_coefficients: vector length " + std::to_string(g.size()) + " != md " +
                            std::to_string(state.jac.cols()));
  return state.solve_gram(state.jac * g);
}

Eigen::VectorXd project_tangent(const ManifoldState& state, const Eigen::VectorXd& v) {
  Eigen::VectorXd alpha = normal_coefficients(state, v);
  return v - state.jac.transpose() * alpha;
}

Eigen::VectorXd riemannian_gradient(const ManifoldState& state, const Dataset& data) {
  return project_tangent(state, trace_hessian_euclid_grad(state.bundle, data));
}

bool is_tangent(const ManifoldState& state, const Eigen::VectorXd& u, double rel) {
  if (state.jac.rows() == 0) return true;
  double scale = std::max(1.0, state.jac.norm());
  return (state.jac * u).norm() <= rel * u.norm() * scale;
}

double manifold_hessian_quadform(const ManifoldState& state, const Dataset& data, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& w) {
  if (u.size() != state.jac.cols() || w.size() != state.jac.cols())
    throw DimensionMismatch("manifold_hessian_quadform: direction length does not match md");
  if (!is_tangent(state, u) || !is_tangent(state, w))
    throw ContractViolation("manifold_hessian_quadform: direction is not tangent to the manifold");
  Eigen::VectorXd alpha = normal_coefficients(state, trace_hessian_euclid_grad(state.bundle, data));
  double q = trace_hessian_euclid_quadform(state.bundle, data, u, w);
  for (int i = 0; i < data.n(); ++i) q -= alpha(i) * sample_hessian_quadform(state.bundle, data, i, u, w);
  return q;
}

Eigen::MatrixXd manifold_hessian_matrix(const ManifoldState& state, const Dataset& data) {
  const auto& b = state.bundle;
  Eigen::VectorXd alpha = normal_coefficients(state, trace_hessian_euclid_grad(b, data));
  Eigen::MatrixXd C = 2.0 * b.d2.cwiseProduct(b.d2) + 2.0 * b.d3.cwiseProduct(b.d1);
  for (int i = 0; i < data.n(); ++i) C.col(i) -= alpha(i) * b.d2.col(i);
  return kernels::block_hessian(C, data.X);
}

Eigen::MatrixXd tangent_basis(const ManifoldState& state) {
  const Eigen::Index md = state.jac.cols(), n = state.jac.rows();
  if (n == 0) return Eigen::MatrixXd::Identity(md, md);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(state.jac.transpose());
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(md, md);
  return Q.rightCols(md - n);
}

Eigen::VectorXd tangent_spectrum(const Eigen::MatrixXd& H, const Eigen::MatrixXd& basis) {
  if (basis.cols() == 0) return Eigen::VectorXd();
  Eigen::MatrixXd T = basis.transpose() * H * basis;
  T = 0.5 * (T + T.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

Eigen::VectorXd manifold_hessian_spectrum(const ManifoldState& state, const Dataset& data) {
  return tangent_spectrum(manifold_hessian_matrix(state, data), tangent_basis(state));
}

RetractResult retract(const Params& theta, const Dataset& data, const ActivationSpec& spec, const RetractOptions& opt) {
  RetractResult out;
  out.theta = theta;
  auto b = network_outputs(out.theta, data, spec);
  Eigen::VectorXd r = b.f - data.y;
  double res = inf_norm(r);
  out.history.push_back(res);
  if (!(res <= opt.basin)) {
    std::ostringstream os;
    os << "retraction refused: residual " << res << " outside basin " << opt.basin;
    throw RetractionFailure(os.str(), out.history);
  }
  while (res > opt.tol) {
    if (out.iterations >= opt.max_iters) {
      std::ostringstream os;
      os << "retraction did not reach " << opt.tol << " in " << opt.max_iters << " iterations (residual " << res << ")";
      throw RetractionFailure(os.str(), out.history);
    }
    Eigen::MatrixXd J = jacobian(b, data);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(J * J.transpose());
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
      throw RetractionFailure("retraction: singular Jacobian Gram matrix", out.history);
    Eigen::VectorXd step = J.transpose() * ldlt.solve(r);
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      Params trial(out.theta.flat - t * step, out.theta.m, out.theta.d);
      auto tb = network_outputs(trial, data, spec);
      Eigen::VectorXd tr = tb.f - data.y;
      if (tr.norm() < r.norm() || inf_norm(tr) <= opt.tol) {
        out.theta = std::move(trial);
        b = std::move(tb);
        r = std::move(tr);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    ++out.iterations;
    res = inf_norm(r);
    out.history.push_back(res);
    if (!accepted) {
      std::ostringstream os;
      os << "retraction stalled at residual " << res;
      throw RetractionFailure(os.str(), out.history);
    }
  }
  return out;
}

Params retract_to_manifold(const Params& theta, const Dataset& data, const ActivationSpec& spec, double tol) {
  RetractOptions opt;
  opt.tol = tol;
  return retract(theta, data, spec, opt).theta;
}

}  // namespace sharpflow
