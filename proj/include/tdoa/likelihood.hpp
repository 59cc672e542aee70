#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "tdoa/errors.hpp"
#include "tdoa/model.hpp"

namespace tdoa {

namespace detail {

/// Gradient of f_i(x) = ||a_i - x|| - ||x|| in the reference-at-origin frame.
inline Vector range_gradient(const Vector& x, const Vector& a) {
  const Vector to_sensor = x - a;
  const double dist = to_sensor.norm();
  const double radius = x.norm();
  if (dist < kCoincidenceTol || radius < kCoincidenceTol) {
    throw DegenerateGeometryError(
        "range gradient undefined: source coincides with a sensor or the "
        "reference");
  }
  return to_sensor / dist - x / radius;
}

/// Hessian of f_i at x (same frame as range_gradient).
inline Matrix range_hessian(const Vector& x, const Vector& a) {
  const auto n = x.size();
  const Vector to_sensor = x - a;
  const double dist = to_sensor.norm();
  const double radius = x.norm();
  if (dist < kCoincidenceTol || radius < kCoincidenceTol) {
    throw DegenerateGeometryError("range Hessian undefined at coincidence");
  }
  const Vector u = to_sensor / dist;
  const Vector v = x / radius;
  return (Matrix::Identity(n, n) - u * u.transpose()) / dist -
         (Matrix::Identity(n, n) - v * v.transpose()) / radius;
}

struct SymmetricInverse {
  Matrix inverse;
  double condition;
  double min_eigenvalue;
  double max_abs_eigenvalue;
};

/// Inverse of a symmetric matrix through its spectral factorization.
/// Throws when |lambda|_min / |lambda|_max drops below kSingularRatio.
inline SymmetricInverse invert_symmetric(const Matrix& s,
                                         const std::string& context) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  const Vector lambda = eig.eigenvalues();
  const double max_abs = lambda.cwiseAbs().maxCoeff();
  const double min_abs = lambda.cwiseAbs().minCoeff();
  if (!(max_abs > 0.0) || min_abs < kSingularRatio * max_abs) {
    throw IllConditionedError(
        context + ": matrix numerically singular (|lambda| ratio " +
            std::to_string(min_abs / (max_abs > 0 ? max_abs : 1.0)) + ")",
        max_abs / (min_abs > 0 ? min_abs : std::numeric_limits<double>::min()));
  }
  const Matrix inv = eig.eigenvectors() *
                     lambda.cwiseInverse().asDiagonal() *
                     eig.eigenvectors().transpose();
  return {inv, max_abs / min_abs, lambda.minCoeff(), max_abs};
}

}  // namespace detail

struct ObjectiveEval {
  double value = 0.0;  // meters^2
  Vector gradient;
  Matrix hessian;
};

/// Mean squared residual (1/m) sum (d_i + ||x - a_0|| - ||a_i - x||)^2 with
/// its exact analytic gradient and Hessian. The Hessian keeps the curvature
/// term of the residuals, not the Gauss-Newton approximation.
inline ObjectiveEval ml_objective(const MeasurementSet& meas, const Vector& x) {
  const SensorArray& array = meas.array();
  if (x.size() != array.dimension()) {
    throw ConfigError("source coordinate length does not match dimension");
  }
  const auto n = x.size();
  const auto m = meas.count();
  const Matrix sensors = array.translated_sensors();
  const Vector xt = x - array.reference();

  ObjectiveEval out;
  out.gradient = Vector::Zero(n);
  out.hessian = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector a = sensors.row(i).transpose();
    const double f = (xt - a).norm() - xt.norm();
    const double residual = meas.d()[i] - f;
    const Vector grad_f = detail::range_gradient(xt, a);
    const Matrix hess_f = detail::range_hessian(xt, a);
    out.value += residual * residual;
    out.gradient -= 2.0 * residual * grad_f;
    out.hessian += 2.0 * (grad_f * grad_f.transpose() - residual * hess_f);
  }
  out.value /= static_cast<double>(m);
  out.gradient /= static_cast<double>(m);
  out.hessian /= static_cast<double>(m);
  out.hessian = ((out.hessian + out.hessian.transpose()) / 2.0).eval();
  return out;
}

/// Empirical information matrix (1/m) sum grad f_i grad f_i^T. Symmetric
/// positive semi-definite; positive definite exactly when the unit-vector
/// differences span R^n.
inline Matrix information_matrix_M(const SensorArray& array, const Vector& x) {
  if (x.size() != array.dimension()) {
    throw ConfigError("source coordinate length does not match dimension");
  }
  const auto n = x.size();
  const Matrix sensors = array.translated_sensors();
  const Vector xt = x - array.reference();
  Matrix m_matrix = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < array.count(); ++i) {
    const Vector g = detail::range_gradient(xt, sensors.row(i).transpose());
    m_matrix += g * g.transpose();
  }
  m_matrix /= static_cast<double>(array.count());
  return ((m_matrix + m_matrix.transpose()) / 2.0).eval();
}

struct BoundsReport {
  Matrix fisher;            // n x n, 1/meters^2
  double crlb = 0.0;        // trace(F^-1), meters^2
  double rcrlb = 0.0;       // sqrt(crlb), meters
  Matrix m_matrix;          // (1/m) sum grad f_i grad f_i^T
  double fisher_condition = 0.0;
};

/// Fisher information of the measurement model at x, assembled from the
/// three-term closed form, plus CRLB = tr(F^-1).
inline BoundsReport fisher_information(const SensorArray& array,
                                       const Vector& x, double sigma2) {
  if (!(sigma2 > 0.0)) {
    throw ConfigError("fisher_information requires sigma2 > 0");
  }
  if (x.size() != array.dimension()) {
    throw ConfigError("source coordinate length does not match dimension");
  }
  const auto n = x.size();
  const auto m = array.count();
  const Matrix sensors = array.translated_sensors();
  const Vector xt = x - array.reference();
  const double radius = xt.norm();
  if (radius < kCoincidenceTol) {
    throw DegenerateGeometryError("source coincides with the reference sensor");
  }

  Matrix fisher = static_cast<double>(m) / sigma2 * (xt * xt.transpose()) /
                  (radius * radius);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector diff = xt - sensors.row(i).transpose();
    const double dist = diff.norm();
    if (dist < kCoincidenceTol) {
      throw DegenerateGeometryError("source coincides with sensor " +
                                    std::to_string(i));
    }
    fisher += (diff * diff.transpose()) / (dist * dist) / sigma2;
    fisher -= (xt * diff.transpose() + diff * xt.transpose()) /
              (radius * dist) / sigma2;
  }
  fisher = ((fisher + fisher.transpose()) / 2.0).eval();

  BoundsReport report;
  report.fisher = fisher;
  report.m_matrix = information_matrix_M(array, x);
  detail::SymmetricInverse inv = [&] {
    try {
      return detail::invert_symmetric(fisher, "Fisher information");
    } catch (const IllConditionedError& e) {
      throw IdentifiabilityError(
          "source not localizable from this geometry (m=" + std::to_string(m) +
          ", n=" + std::to_string(n) +
          "): Fisher matrix singular; " + e.what());
    }
  }();
  report.crlb = inv.inverse.trace();
  report.rcrlb = std::sqrt(report.crlb);
  report.fisher_condition = inv.condition;
  return report;
}

}  // namespace tdoa
