#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "phasetrack/model.hpp"

namespace phasetrack::solvers {

/// Continuous Lyapunov problem A P + P A^T + Q = 0 for small dense systems.
struct LyapunovProblem {
  Eigen::MatrixXd a;  ///< n x n, Hurwitz
  Eigen::MatrixXd q;  ///< n x n, symmetric PSD (B B^T)
};

inline bool is_hurwitz(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
  return (es.eigenvalues().real().array() < 0.0).all();
}

/// Solves A P + P A^T + Q = 0 by vectorization into an n^2 x n^2 linear
/// system (n <= 4). The result is symmetrized and the residual checked
/// against 1e-10 * (1 + maxnorm(Q)).
inline Eigen::MatrixXd solve_lyapunov(const LyapunovProblem& prob) {
  const Eigen::MatrixXd& a = prob.a;
  const Eigen::MatrixXd& q = prob.q;
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n)
    throw std::invalid_argument("Lyapunov matrices must be square and match");
  if (n < 1 || n > 4)
    throw std::invalid_argument("Lyapunov solver handles 1 <= n <= 4");
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + q.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("Q must be symmetric");
  if (!is_hurwitz(a)) throw NumericalError("unstable dynamics: A is not Hurwitz");

  // vec(A P) = (I (x) A) vec(P), vec(P A^T) = (A (x) I) vec(P), column-major.
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    k.block(i * n, i * n, n, n) += a;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      k.block(i * n, j * n, n, n).diagonal().array() += a(i, j);

  Eigen::VectorXd rhs(n * n);
  for (Eigen::Index j = 0; j < n; ++j) rhs.segment(j * n, n) = -q.col(j);

  Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  if (!lu.isInvertible()) throw NumericalError("singular Lyapunov system");
  const Eigen::VectorXd vec_p = lu.solve(rhs);

  Eigen::MatrixXd p(n, n);
  for (Eigen::Index j = 0; j < n; ++j) p.col(j) = vec_p.segment(j * n, n);
  p = 0.5 * (p + p.transpose()).eval();

  const double residual = (a * p + p * a.transpose() + q).cwiseAbs().maxCoeff();
  if (residual > 1e-10 * (1.0 + q.cwiseAbs().maxCoeff()))
    throw NumericalError("Lyapunov residual too large");
  return p;
}

/// Coefficients of a P^2 + b P + c = 0.
struct ScalarQuadratic {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Returns the root for which the implied closed-loop drift is strictly
/// negative. Picks the larger real root and asserts stability so that
/// wrong-branch bugs surface as hard errors; a = 0 degenerates to the
/// unique root of the linear equation.
template <class ClosedLoop>
double stabilizing_root(const ScalarQuadratic& q, ClosedLoop&& closed_loop) {
  double root, other;
  if (q.a == 0.0) {
    if (q.b == 0.0) throw NumericalError("degenerate quadratic");
    root = -q.c / q.b;
    if (!(closed_loop(root) < 0.0))
      throw NumericalError("root destabilizing");
    return root;
  }
  const double disc = q.b * q.b - 4.0 * q.a * q.c;
  if (disc < 0.0) throw NumericalError("complex roots");
  // Cancellation-free evaluation of the quadratic formula.
  const double sq = std::sqrt(disc);
  const double t = -0.5 * (q.b + (q.b >= 0.0 ? sq : -sq));
  const double r1 = t / q.a;
  const double r2 = (t != 0.0) ? q.c / t : -q.b / (2.0 * q.a);
  root = std::max(r1, r2);
  other = std::min(r1, r2);
  if (closed_loop(root) < 0.0) return root;
  if (closed_loop(other) < 0.0)
    throw NumericalError("stabilizing root is not the larger root");
  throw NumericalError("both roots destabilizing");
}

}  // namespace phasetrack::solvers
