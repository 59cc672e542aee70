#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "tdoa/errors.hpp"
#include "tdoa/model.hpp"

namespace tdoa {

// Consistent noise-variance estimation. The augmented regressor matrix
//
//   A~ = [-2 a_i^T, 1, -2 d_i, d_i^2 - ||a_i||^2]      (m x (n+3))
//
// has a noise-free counterpart whose last column is a linear combination of
// the others, so Q = A~^T A~ / m minus the expected noise contribution S(z)
// turns singular exactly at z = sigma^2. The smallest z with
// lambda_max(Q^{-1} S(z)) = 1 is a sqrt(m)-consistent variance estimate, and
// the eigenvalue condition reduces to a cubic in z through the 2x2 Schur
// complement of Q.

struct NoiseVarianceProblem {
  Matrix a_tilde;          // m x (n+3)
  Matrix q;                // A~^T A~ / m
  double d_bar = 0.0;      // mean of d_i
  double d2_bar = 0.0;     // mean of d_i^2
  Eigen::Matrix2d schur;   // Q/Q22 = [[q1, q2], [q2, q3]]
  double c1 = 0.0;         // q1 q3 - q2^2
  double c2 = 0.0;         // 4 q1 d2_bar + 4 q3 + 8 q2 d_bar
  double c3 = 0.0;         // 16 (d2_bar - d_bar^2)
  double q_min_eigenvalue = 0.0;
  double q_max_eigenvalue = 0.0;

  int dimension() const { return static_cast<int>(q.rows()) - 3; }
};

/// Builds Q, its Schur complement, and the cubic coefficients.
/// Fails when Q is not numerically positive definite, which happens when the
/// sensors are too few, collinear/coplanar, or the measurements are exactly
/// noise-free.
inline NoiseVarianceProblem build_problem(const MeasurementSet& meas) {
  const auto n = meas.array().dimension();
  const auto m = meas.count();
  if (m < n + 3) {
    throw IdentifiabilityError(
        "noise-variance estimation needs at least n+3 = " +
        std::to_string(n + 3) + " sensors, got " + std::to_string(m));
  }
  const Matrix sensors = meas.array().translated_sensors();
  const Vector& d = meas.d();

  NoiseVarianceProblem prob;
  prob.a_tilde.resize(m, n + 3);
  prob.a_tilde.leftCols(n) = -2.0 * sensors;
  prob.a_tilde.col(n).setOnes();
  prob.a_tilde.col(n + 1) = -2.0 * d;
  prob.a_tilde.col(n + 2) =
      d.array().square().matrix() - sensors.rowwise().squaredNorm();
  prob.q = prob.a_tilde.transpose() * prob.a_tilde / static_cast<double>(m);
  prob.q = ((prob.q + prob.q.transpose()) / 2.0).eval();
  prob.d_bar = d.mean();
  prob.d2_bar = d.array().square().mean();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(prob.q);
  prob.q_min_eigenvalue = eig.eigenvalues().minCoeff();
  prob.q_max_eigenvalue = eig.eigenvalues().maxCoeff();
  if (prob.q_min_eigenvalue <= 1e-10 * prob.q_max_eigenvalue) {
    std::ostringstream msg;
    msg << "Q = A~^T A~ / m is not positive definite (lambda_min "
        << prob.q_min_eigenvalue << ", lambda_max " << prob.q_max_eigenvalue
        << "); geometry rank-deficient or measurements noise-free";
    throw IdentifiabilityError(msg.str());
  }

  const auto k = n + 1;
  const Matrix q11 = prob.q.topLeftCorner(k, k);
  const Matrix q12 = prob.q.topRightCorner(k, 2);
  const Matrix q22 = prob.q.bottomRightCorner(2, 2);
  // Q11 inherits positive definiteness from Q, so Cholesky is safe here.
  const Matrix schur = q22 - q12.transpose() * q11.llt().solve(q12);
  prob.schur = ((schur + schur.transpose()) / 2.0).eval();

  const double q1 = prob.schur(0, 0);
  const double q2 = prob.schur(0, 1);
  const double q3 = prob.schur(1, 1);
  prob.c1 = q1 * q3 - q2 * q2;
  prob.c2 = 4.0 * q1 * prob.d2_bar + 4.0 * q3 + 8.0 * q2 * prob.d_bar;
  prob.c3 = 16.0 * (prob.d2_bar - prob.d_bar * prob.d_bar);
  return prob;
}

/// S(z): zero except the trailing 2x2 block
///   [[4z, -4 d_bar z], [-4 d_bar z, 4 d2_bar z - 2 z^2]].
inline Matrix S_of_z(const NoiseVarianceProblem& prob, double z) {
  const auto k = prob.q.rows();
  Matrix s = Matrix::Zero(k, k);
  s(k - 2, k - 2) = 4.0 * z;
  s(k - 2, k - 1) = -4.0 * prob.d_bar * z;
  s(k - 1, k - 2) = -4.0 * prob.d_bar * z;
  s(k - 1, k - 1) = 4.0 * prob.d2_bar * z - 2.0 * z * z;
  return s;
}

/// lambda_max(Q^{-1} S(z)) through the Schur-complement reduction: the
/// larger root of c1 L^2 + (2 q1 z^2 - c2 z) L + (c3 z^2 - 8 z^3) = 0.
inline double lambda_max_condition(const NoiseVarianceProblem& prob, double z) {
  if (!(prob.c1 > 0.0)) {
    throw IdentifiabilityError(
        "Schur complement of Q is not positive definite (c1 = " +
        std::to_string(prob.c1) + ")");
  }
  const double q1 = prob.schur(0, 0);
  const double B = 2.0 * q1 * z * z - prob.c2 * z;
  const double C = prob.c3 * z * z - 8.0 * z * z * z;
  // Q positive definite makes the eigenvalues real; clamp tiny negative
  // discriminants from round-off.
  const double disc = std::max(B * B - 4.0 * prob.c1 * C, 0.0);
  return (-B + std::sqrt(disc)) / (2.0 * prob.c1);
}

struct VarianceEstimate {
  double sigma2_hat = 0.0;
  std::vector<double> roots;     // all real roots of the cubic
  std::vector<double> accepted;  // roots passing the sign condition, z >= 0
  double residual = 0.0;         // |lambda_max(Q^{-1} S(sigma2_hat)) - 1|
};

namespace detail {

/// Real roots of z^3 + p2 z^2 + p1 z + p0 via the companion-matrix
/// eigenvalues, Newton-polished. Near-real eigenvalues (|Im| within
/// 1e-8 (1+|Re|)) are kept as real roots.
inline std::vector<double> cubic_real_roots(double p2, double p1, double p0) {
  Eigen::Matrix3d companion;
  companion << 0, 0, -p0,
               1, 0, -p1,
               0, 1, -p2;
  const Eigen::EigenSolver<Eigen::Matrix3d> eig(companion);
  std::vector<double> roots;
  for (int i = 0; i < 3; ++i) {
    const std::complex<double> r = eig.eigenvalues()[i];
    if (std::abs(r.imag()) >= 1e-8 * (1.0 + std::abs(r.real()))) {
      continue;
    }
    double z = r.real();
    for (int it = 0; it < 3; ++it) {
      const double f = ((z + p2) * z + p1) * z + p0;
      const double df = (3.0 * z + 2.0 * p2) * z + p1;
      if (df == 0.0) break;
      const double step = f / df;
      z -= step;
      if (std::abs(step) <= 1e-15 * (1.0 + std::abs(z))) break;
    }
    roots.push_back(z);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

}  // namespace detail

/// Noise-variance estimator: roots the cubic
///   32 c1 z^3 - (4 c1 c3 + 8 q1 c1) z^2 + 4 c1 c2 z - 4 c1^2 = 0,
/// keeps the real roots with 2 c1 + 2 q1 z^2 - c2 z > 0 and z >= 0, and
/// returns the smallest. The winner is verified against the eigenvalue
/// condition lambda_max(Q^{-1} S(z)) = 1.
inline VarianceEstimate estimate_sigma2(const NoiseVarianceProblem& prob) {
  const double q1 = prob.schur(0, 0);
  // Divide the quartic-scaled polynomial by 32 c1 (c1 > 0 checked upstream).
  const double p2 = -(prob.c3 + 2.0 * q1) / 8.0;
  const double p1 = prob.c2 / 8.0;
  const double p0 = -prob.c1 / 8.0;

  VarianceEstimate est;
  est.roots = detail::cubic_real_roots(p2, p1, p0);

  std::vector<double> sign_values;
  for (const double z : est.roots) {
    const double sign_value = 2.0 * prob.c1 + 2.0 * q1 * z * z - prob.c2 * z;
    sign_values.push_back(sign_value);
    const double tol_sign = 1e-9 * (std::abs(2.0 * prob.c1) +
                                    std::abs(prob.c2) * std::abs(z) +
                                    2.0 * std::abs(q1) * z * z);
    if (z >= 0.0 && sign_value > tol_sign) {
      est.accepted.push_back(z);
    }
  }
  if (est.accepted.empty()) {
    std::ostringstream msg;
    msg << "no admissible root of the noise-variance cubic; real roots:";
    for (std::size_t i = 0; i < est.roots.size(); ++i) {
      msg << " z=" << est.roots[i] << " (sign " << sign_values[i] << ")";
    }
    throw VarianceEstimationError(msg.str(), est.roots, sign_values);
  }
  est.sigma2_hat = *std::min_element(est.accepted.begin(), est.accepted.end());
  est.residual = std::abs(lambda_max_condition(prob, est.sigma2_hat) - 1.0);
  return est;
}

inline VarianceEstimate estimate_sigma2(const MeasurementSet& meas) {
  return estimate_sigma2(build_problem(meas));
}

}  // namespace tdoa
