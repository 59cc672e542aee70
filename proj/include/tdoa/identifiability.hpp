#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "tdoa/errors.hpp"
#include "tdoa/likelihood.hpp"
#include "tdoa/model.hpp"

namespace tdoa {

// Checkable identifiability conditions. Sensors all lying on one conic
// section (2D) or quadric surface (3D) make the lifted regression
// unsolvable; the test is the rank of the second moment of the degree-2
// monomial lift v(a). Full rank (6 in 2D, 10 in 3D) certifies that no such
// surface exists. See docs/monomials.md for the frozen entry order.

/// Degree-2 monomial lift.
/// 2D: [a1^2, a1 a2, a2^2, a1, a2, 1].
/// 3D: [a1^2, a2^2, a3^2, a1 a2, a1 a3, a2 a3, a1, a2, a3, 1].
inline Vector veronese_vector(const Vector& a) {
  if (a.size() == 2) {
    Vector v(6);
    v << a[0] * a[0], a[0] * a[1], a[1] * a[1], a[0], a[1], 1.0;
    return v;
  }
  if (a.size() == 3) {
    Vector v(10);
    v << a[0] * a[0], a[1] * a[1], a[2] * a[2], a[0] * a[1], a[0] * a[2],
        a[1] * a[2], a[0], a[1], a[2], 1.0;
    return v;
  }
  throw ConfigError("veronese_vector expects a 2- or 3-vector");
}

enum class Verdict { identifiable, degenerate, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::identifiable: return "identifiable";
    case Verdict::degenerate: return "degenerate";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct IdentifiabilityReport {
  int veronese_rank = 0;
  bool veronese_full = false;     // 6 (2D) or 10 (3D)
  int affine_rank = 0;            // rank of centered coordinates
  double m_matrix_min_eig = 0.0;  // at the probe position
  Verdict verdict = Verdict::inconclusive;
};

namespace detail {

/// Rank with a relative cutoff, plus a borderline flag when some retained or
/// dropped value sits within a decade of the cutoff.
inline std::pair<int, bool> relative_rank(const Vector& singular_values,
                                          double cutoff_ratio) {
  const double top = singular_values.maxCoeff();
  if (!(top > 0.0)) return {0, false};
  int rank = 0;
  bool borderline = false;
  for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
    const double s = singular_values[i];
    if (s > cutoff_ratio * top) ++rank;
    if (s > 0.1 * cutoff_ratio * top && s <= 10.0 * cutoff_ratio * top) {
      borderline = true;
    }
  }
  return {rank, borderline};
}

}  // namespace detail

/// Rank test of (1/m) sum v(a_i) v(a_i)^T. Coordinates are divided by the
/// array's RMS radius first; raw cube-scale inputs would spread the
/// monomials over seven decades and defeat the cutoff. When no probe is
/// given, the information matrix is evaluated at a default interior point
/// offset from the sensor centroid.
inline IdentifiabilityReport check_assumption5(
    const SensorArray& array, std::optional<Vector> probe = std::nullopt) {
  const auto n = array.dimension();
  const auto m = array.count();
  const int full_rank = (n == 2) ? 6 : 10;
  const Matrix sensors = array.translated_sensors();

  IdentifiabilityReport report;

  const double rms = std::sqrt(sensors.rowwise().squaredNorm().mean());
  const double scale = rms > 0.0 ? rms : 1.0;
  Matrix second_moment = Matrix::Zero(full_rank, full_rank);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector v = veronese_vector(sensors.row(i).transpose() / scale);
    second_moment += v * v.transpose();
  }
  second_moment /= static_cast<double>(m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(second_moment);
  // PSD by construction: eigenvalue magnitudes are the singular values.
  const Vector sv = eig.eigenvalues().cwiseAbs();
  const auto [rank, borderline] = detail::relative_rank(sv, 1e-10);
  report.veronese_rank = rank;
  report.veronese_full = rank == full_rank;

  const Matrix centered = sensors.rowwise() - sensors.colwise().mean();
  Eigen::JacobiSVD<Matrix> svd(centered);
  report.affine_rank = detail::relative_rank(svd.singularValues(), 1e-10).first;

  Vector probe_point;
  if (probe) {
    if (probe->size() != n) {
      throw ConfigError("probe position has wrong dimension");
    }
    probe_point = *probe;
  } else {
    probe_point = array.reference() +
                  sensors.colwise().mean().transpose() +
                  Vector::Constant(n, 0.25 * scale / std::sqrt(double(n)));
  }
  constexpr double kMinEigThreshold = 1e-8;
  try {
    Eigen::SelfAdjointEigenSolver<Matrix> meig(
        information_matrix_M(array, probe_point));
    report.m_matrix_min_eig = meig.eigenvalues().minCoeff();
  } catch (const DegenerateGeometryError&) {
    report.m_matrix_min_eig = std::numeric_limits<double>::quiet_NaN();
  }

  if (!report.veronese_full) {
    report.verdict = Verdict::degenerate;
  } else if (borderline || !(report.m_matrix_min_eig > kMinEigThreshold)) {
    report.verdict = Verdict::inconclusive;
  } else {
    report.verdict = Verdict::identifiable;
  }
  return report;
}

}  // namespace tdoa
