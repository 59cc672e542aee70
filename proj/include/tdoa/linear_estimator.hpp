#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "tdoa/errors.hpp"
#include "tdoa/likelihood.hpp"
#include "tdoa/model.hpp"

namespace tdoa {

// The squared measurement model, in the reference-at-origin frame:
//
//   d_i^2 - ||a_i||^2 - sigma^2 = -2 a_i^T x - 2 d_i ||x|| + eps_i
//
// is linear in the lifted unknown y = [x; ||x||] once the norm constraint is
// relaxed. This module assembles that system and solves it three ways: the
// plain least-squares solution (biased), the oracle solution built from
// noiseless regressors (test baseline), and the bias-eliminated solution
// that subtracts the asymptotic noise contribution from the normal
// equations.

/// Relaxed unknown y = [x; s] with s estimating ||x - a_0||. The position is
/// read off the first n entries; s is never projected back onto ||x||.
struct LiftedParameter {
  Vector y;

  Vector position() const { return y.head(y.size() - 1); }
  double range_estimate() const { return y[y.size() - 1]; }
};

struct RegressionSystem {
  Matrix A;            // m x (n+1), rows [-2 a_i^T, -2 d_i]
  Vector b;            // d_i^2 - ||a_i||^2 - sigma2_used
  Matrix G;            // m x (n+1), rows [0_{1 x n}, -2]
  Vector d;            // measurements
  double sigma2_used;  // variance subtracted when b was formed
  Vector reference;    // a_0 in the caller's frame; solutions translate back
};

/// Noise-free regressors built from a known source position; test-only.
struct OracleRegressionSystem {
  Matrix A_o;  // rows [-2 a_i^T, -2 d_i^o]
  Vector d_o;  // noiseless range differences
};

inline RegressionSystem assemble(const MeasurementSet& meas, double sigma2) {
  if (!(sigma2 >= 0.0)) {
    throw ConfigError("assemble requires sigma2 >= 0");
  }
  const auto n = meas.array().dimension();
  const auto m = meas.count();
  if (m < n + 1) {
    throw ConfigError("lifted regression needs at least n+1 measurements");
  }
  const Matrix sensors = meas.array().translated_sensors();
  RegressionSystem sys;
  sys.A.resize(m, n + 1);
  sys.A.leftCols(n) = -2.0 * sensors;
  sys.A.col(n) = -2.0 * meas.d();
  sys.b = meas.d().array().square().matrix() -
          sensors.rowwise().squaredNorm() -
          Vector::Constant(m, sigma2);
  sys.G = Matrix::Zero(m, n + 1);
  sys.G.col(n).setConstant(-2.0);
  sys.d = meas.d();
  sys.sigma2_used = sigma2;
  sys.reference = meas.array().reference();
  return sys;
}

inline OracleRegressionSystem assemble_oracle(const MeasurementSet& meas,
                                              const Vector& x_true) {
  const auto n = meas.array().dimension();
  const auto m = meas.count();
  const Matrix sensors = meas.array().translated_sensors();
  const Vector xt = x_true - meas.array().reference();
  OracleRegressionSystem sys;
  sys.d_o.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    sys.d_o[i] = (sensors.row(i).transpose() - xt).norm() - xt.norm();
  }
  sys.A_o.resize(m, n + 1);
  sys.A_o.leftCols(n) = -2.0 * sensors;
  sys.A_o.col(n) = -2.0 * sys.d_o;
  return sys;
}

namespace detail {

/// Solves the (n+1)-dimensional normal equations N y = rhs where N is
/// symmetric and possibly indefinite at small m, then moves the position
/// block back into the caller's frame.
inline LiftedParameter solve_normal(const Matrix& normal, const Vector& rhs,
                                    const Vector& reference,
                                    const char* context) {
  const SymmetricInverse inv = invert_symmetric(normal, context);
  Vector y = inv.inverse * rhs;
  y.head(reference.size()) += reference;
  return LiftedParameter{std::move(y)};
}

}  // namespace detail

/// Plain least-squares solve y = (A^T A)^{-1} A^T b. Biased: the regressor
/// column -2 d_i is correlated with the noise in b.
inline LiftedParameter solve_biased(const RegressionSystem& sys) {
  const double m = static_cast<double>(sys.A.rows());
  const Matrix normal = sys.A.transpose() * sys.A / m;
  const Vector rhs = sys.A.transpose() * sys.b / m;
  return detail::solve_normal(normal, rhs, sys.reference,
                              "biased normal equations");
}

/// Oracle solve y = (A_o^T A_o)^{-1} A_o^T b with b using the true variance.
/// Requires the true source (test baseline for the bias-eliminated route).
inline LiftedParameter solve_oracle_unbiased(const MeasurementSet& meas,
                                             const Vector& x_true) {
  if (!meas.true_sigma2()) {
    throw ConfigError("solve_oracle_unbiased needs the true noise variance");
  }
  const OracleRegressionSystem oracle = assemble_oracle(meas, x_true);
  const RegressionSystem sys = assemble(meas, *meas.true_sigma2());
  const double m = static_cast<double>(meas.count());
  const Matrix normal = oracle.A_o.transpose() * oracle.A_o / m;
  const Vector rhs = oracle.A_o.transpose() * sys.b / m;
  try {
    return detail::solve_normal(normal, rhs, sys.reference,
                                "oracle normal equations");
  } catch (const IllConditionedError& e) {
    throw IdentifiabilityError(
        std::string("oracle regressors rank-deficient (sensors on a "
                    "conic/quadric?): ") + e.what());
  }
}

struct BiasEliminatedSolve {
  LiftedParameter y;
  bool fallback = false;  // true when the corrected matrix was unusable and
                          // the plain biased solution was returned instead
  double condition = 0.0;
};

/// Bias-eliminated closed form
///   y = (A^T A / m - sigma2 G^T G / m)^{-1} (A^T b / m - 2 sigma2 G^T d / m)
/// with b assembled using the same sigma2. When the corrected matrix is
/// numerically singular (possible at small m), returns the biased solution
/// with fallback = true so downstream refinement always has an initializer.
inline BiasEliminatedSolve solve_bias_eliminated(const MeasurementSet& meas,
                                                 double sigma2) {
  const RegressionSystem sys = assemble(meas, sigma2);
  const double m = static_cast<double>(meas.count());
  const Matrix corrected =
      (sys.A.transpose() * sys.A - sigma2 * (sys.G.transpose() * sys.G)) / m;
  const Vector rhs =
      (sys.A.transpose() * sys.b - 2.0 * sigma2 * (sys.G.transpose() * sys.d)) /
      m;
  try {
    const detail::SymmetricInverse inv =
        detail::invert_symmetric(corrected, "bias-eliminated normal equations");
    Vector y = inv.inverse * rhs;
    y.head(sys.reference.size()) += sys.reference;
    return {LiftedParameter{std::move(y)}, false, inv.condition};
  } catch (const IllConditionedError& e) {
    return {solve_biased(sys), true, e.condition()};
  }
}

}  // namespace tdoa
