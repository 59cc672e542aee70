#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tdoa/errors.hpp"
#include "tdoa/likelihood.hpp"
#include "tdoa/linear_estimator.hpp"
#include "tdoa/model.hpp"
#include "tdoa/noise_variance.hpp"

namespace tdoa {

// Full two-step estimator: consistent noise-variance estimate, closed-form
// bias-eliminated initializer, Gauss-Newton refinement of the maximum
// likelihood objective. One GN step from a sqrt(m)-consistent initializer
// already matches the asymptotic behavior of the ML estimator, hence the
// default of a single iteration.

struct GnConfig {
  int max_iterations = 1;
  double step_tolerance = 1e-10;  // meters; stop when a step falls below
  double damping = 0.0;           // 0 = plain GN
  bool use_true_sigma2 = false;   // skip estimation when the set carries it

  void validate() const {
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (!(step_tolerance >= 0.0)) {
      throw ConfigError("step_tolerance must be >= 0");
    }
    if (!(damping >= 0.0)) throw ConfigError("damping must be >= 0");
  }
};

/// One Gauss-Newton update x + (J^T J + damping I)^{-1} J^T (d - f(x)) for
/// the ML residuals, with J rows grad f_i(x)^T. Runs in the
/// reference-at-origin frame and maps the result back.
inline Vector gauss_newton_step(const MeasurementSet& meas, const Vector& x,
                                double damping = 0.0) {
  const auto n = meas.array().dimension();
  const auto m = meas.count();
  const Matrix sensors = meas.array().translated_sensors();
  const Vector xt = x - meas.array().reference();

  Matrix jtj = Matrix::Zero(n, n);
  Vector jtr = Vector::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector a = sensors.row(i).transpose();
    const Vector g = detail::range_gradient(xt, a);
    const double f = (xt - a).norm() - xt.norm();
    jtj += g * g.transpose();
    jtr += g * (meas.d()[i] - f);
  }
  jtj.diagonal().array() += damping;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jtj);
  const double lmax = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double lmin = eig.eigenvalues().cwiseAbs().minCoeff();
  if (!(lmax > 0.0) || lmin < kSingularRatio * lmax) {
    throw IllConditionedError(
        "Gauss-Newton normal matrix rank-deficient (all range gradients "
        "nearly parallel); consider a positive damping",
        lmax / (lmin > 0 ? lmin : std::numeric_limits<double>::min()));
  }
  const Vector step = eig.eigenvectors() *
                      eig.eigenvalues().cwiseInverse().asDiagonal() *
                      (eig.eigenvectors().transpose() * jtr);
  return x + step;
}

struct EstimateReport {
  Vector x_hat;                      // refined position
  double sigma2_hat = 0.0;
  Vector x_be;                       // stage-1 position
  LiftedParameter y_be;
  int gn_iterations = 0;
  std::vector<double> gn_step_norms;
  double crlb = 0.0;                 // evaluated at x_hat with sigma2_hat
  std::vector<std::string> fallbacks;
  double wall_time = 0.0;            // seconds
};

/// Runs the whole two-step scheme on one measurement set.
/// Recovery paths, each flagged in the report rather than failing:
///   variance_fallback          noise-variance estimation failed; sigma2 = 0
///   bias_elimination_fallback  corrected matrix singular; biased initializer
///   gn_damping_fallback        plain GN singular; damped retry
///   gn_aborted                 iterate hit a degenerate point; kept last x
///   crlb_unavailable           information matrix singular at x_hat
inline EstimateReport localize(const MeasurementSet& meas,
                               const GnConfig& cfg = {}) {
  cfg.validate();
  const auto m = meas.count();
  const auto n = meas.array().dimension();
  if (m < n + 3) {
    throw IdentifiabilityError("localize needs at least n+3 sensors");
  }
  const auto start = std::chrono::steady_clock::now();

  EstimateReport report;
  if (cfg.use_true_sigma2 && meas.true_sigma2()) {
    report.sigma2_hat = *meas.true_sigma2();
  } else {
    try {
      report.sigma2_hat = estimate_sigma2(meas).sigma2_hat;
    } catch (const Error&) {
      report.sigma2_hat = 0.0;
      report.fallbacks.push_back("variance_fallback");
    }
  }

  const BiasEliminatedSolve be = solve_bias_eliminated(meas, report.sigma2_hat);
  if (be.fallback) {
    report.fallbacks.push_back("bias_elimination_fallback");
  }
  report.y_be = be.y;
  report.x_be = be.y.position();

  Vector x = report.x_be;
  for (int k = 0; k < cfg.max_iterations; ++k) {
    Vector next;
    try {
      next = gauss_newton_step(meas, x, cfg.damping);
    } catch (const IllConditionedError&) {
      if (cfg.damping > 0.0) throw;
      // Levenberg-style rescue: scale the damping to the problem.
      const double scale = information_matrix_M(meas.array(), x).trace();
      next = gauss_newton_step(meas, x, 1e-6 * (1.0 + scale));
      report.fallbacks.push_back("gn_damping_fallback");
    } catch (const DegenerateGeometryError&) {
      report.fallbacks.push_back("gn_aborted");
      break;
    }
    const double step_norm = (next - x).norm();
    report.gn_step_norms.push_back(step_norm);
    ++report.gn_iterations;
    x = next;
    if (step_norm < cfg.step_tolerance) break;
  }
  report.x_hat = x;

  // CRLB via the exact identity tr(F^{-1}) = (sigma2 / m) tr(M^{-1}), which
  // stays defined as sigma2 -> 0.
  try {
    const detail::SymmetricInverse m_inv = detail::invert_symmetric(
        information_matrix_M(meas.array(), report.x_hat), "information matrix");
    report.crlb =
        report.sigma2_hat / static_cast<double>(m) * m_inv.inverse.trace();
  } catch (const Error&) {
    report.crlb = std::numeric_limits<double>::quiet_NaN();
    report.fallbacks.push_back("crlb_unavailable");
  }

  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

}  // namespace tdoa
