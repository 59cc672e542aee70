#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tdoa/errors.hpp"
#include "tdoa/rng.hpp"

namespace tdoa {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Two positions closer than this (meters) count as coincident; the range
/// gradient is undefined at coincidence.
inline constexpr double kCoincidenceTol = 1e-9;

/// Rank/conditioning cutoff shared by the dense solvers.
inline constexpr double kSingularRatio = 1e-12;

namespace detail {

inline void format_double(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace detail

/// A reference sensor plus m auxiliary sensors in R^n, n in {2, 3}.
/// Distances are measured relative to the reference, which may sit anywhere;
/// estimators translate it to the origin internally.
class SensorArray {
 public:
  SensorArray(Vector reference, Matrix sensors)
      : reference_(std::move(reference)), sensors_(std::move(sensors)) {
    const auto n = reference_.size();
    if (n != 2 && n != 3) {
      throw ConfigError("sensor array dimension must be 2 or 3, got " +
                        std::to_string(n));
    }
    if (sensors_.cols() != n) {
      throw ConfigError("sensor coordinate length does not match dimension");
    }
    if (sensors_.rows() < 1) {
      throw ConfigError("sensor array needs at least one sensor");
    }
    for (Eigen::Index i = 0; i < sensors_.rows(); ++i) {
      if (!sensors_.row(i).allFinite()) {
        throw ConfigError("sensor coordinates must be finite");
      }
      if ((sensors_.row(i).transpose() - reference_).norm() < kCoincidenceTol) {
        throw DegenerateGeometryError(
            "sensor " + std::to_string(i) + " coincides with the reference");
      }
    }
    if (!reference_.allFinite()) {
      throw ConfigError("reference coordinates must be finite");
    }
  }

  int dimension() const { return static_cast<int>(reference_.size()); }
  Eigen::Index count() const { return sensors_.rows(); }
  const Vector& reference() const { return reference_; }
  const Matrix& sensors() const { return sensors_; }
  Vector sensor(Eigen::Index i) const { return sensors_.row(i).transpose(); }

  /// Minimum sensor count for the full pipeline (noise-variance step needs
  /// n+3 non-collinear sensors).
  Eigen::Index minimum_for_estimation() const { return dimension() + 3; }

  /// Sensor coordinates with the reference moved to the origin.
  Matrix translated_sensors() const {
    return sensors_.rowwise() - reference_.transpose();
  }

  static SensorArray load_csv(const std::filesystem::path& path);
  void save_csv(const std::filesystem::path& path) const;

 private:
  Vector reference_;
  Matrix sensors_;  // one row per sensor
};

struct NoiseModel {
  double sigma = 0.0;       // standard deviation, meters
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw ConfigError("noise sigma must be finite and nonnegative");
    }
  }
};

/// Range-difference measurements d_i paired with the array that produced
/// them. true_sigma2 is carried along when the noise level is known
/// (simulation, calibrated hardware).
class MeasurementSet {
 public:
  MeasurementSet(SensorArray array, Vector d,
                 std::optional<double> true_sigma2 = std::nullopt)
      : array_(std::move(array)), d_(std::move(d)), true_sigma2_(true_sigma2) {
    if (d_.size() != array_.count()) {
      throw ConfigError("measurement count does not match sensor count");
    }
    if (!d_.allFinite()) {
      throw ConfigError("measurements must be finite");
    }
    if (true_sigma2_ && !(*true_sigma2_ >= 0.0)) {
      throw ConfigError("true_sigma2 must be nonnegative");
    }
  }

  const SensorArray& array() const { return array_; }
  const Vector& d() const { return d_; }
  std::optional<double> true_sigma2() const { return true_sigma2_; }
  Eigen::Index count() const { return d_.size(); }

 private:
  SensorArray array_;
  Vector d_;
  std::optional<double> true_sigma2_;
};

/// Noiseless range difference ||a_i - x|| - ||x - a_0|| for sensor i
/// (0-based). Equals f_i(x) of the measurement model when a_0 = 0.
inline double range_difference(const SensorArray& array, const Vector& x,
                               Eigen::Index i) {
  if (i < 0 || i >= array.count()) {
    throw ConfigError("sensor index " + std::to_string(i) + " out of range");
  }
  if (x.size() != array.dimension()) {
    throw ConfigError("source coordinate length does not match dimension");
  }
  const double to_sensor = (array.sensor(i) - x).norm();
  const double to_reference = (x - array.reference()).norm();
  if (to_sensor < kCoincidenceTol) {
    throw DegenerateGeometryError("source coincides with sensor " +
                                  std::to_string(i));
  }
  if (to_reference < kCoincidenceTol) {
    throw DegenerateGeometryError("source coincides with the reference sensor");
  }
  return to_sensor - to_reference;
}

/// Draws d_i = range_difference(i) + r_i with r_i iid N(0, sigma^2).
/// Deterministic in (array, x, noise.seed); noise draw i is independent of m.
inline MeasurementSet simulate(const SensorArray& array, const Vector& x,
                               const NoiseModel& noise) {
  noise.validate();
  const Philox4x32 rng(noise.seed, streams::kMeasurementNoise);
  Vector d(array.count());
  for (Eigen::Index i = 0; i < array.count(); ++i) {
    d[i] = range_difference(array, x, i) + noise.sigma * rng.normal(i);
  }
  return MeasurementSet(array, std::move(d), noise.sigma * noise.sigma);
}

/// m sensors uniform on the surface of an axis-aligned cube of the given
/// edge, centered on the reference at the origin. Face picked uniformly,
/// then the point uniform on the face.
inline SensorArray deploy_uniform_cube(double edge, Eigen::Index m,
                                       std::uint64_t seed) {
  if (!(edge > 0.0)) {
    throw ConfigError("cube edge must be positive");
  }
  if (m < 6) {
    throw ConfigError("cube deployment needs at least n+3 = 6 sensors");
  }
  const Philox4x32 rng(seed, streams::kDeployGeometry);
  const double half = edge / 2.0;
  Matrix sensors(m, 3);
  for (Eigen::Index i = 0; i < m; ++i) {
    // Draws 3i .. 3i+2: face selector plus two in-face coordinates.
    const int face = static_cast<int>(rng.uniform(3 * i) * 6.0);
    const double u = (rng.uniform(3 * i + 1) * 2.0 - 1.0) * half;
    const double v = (rng.uniform(3 * i + 2) * 2.0 - 1.0) * half;
    const int axis = face / 2;
    const double sign = (face % 2 == 0) ? 1.0 : -1.0;
    Eigen::Vector3d p;
    p[axis] = sign * half;
    p[(axis + 1) % 3] = u;
    p[(axis + 2) % 3] = v;
    sensors.row(i) = p.transpose();
  }
  return SensorArray(Vector::Zero(3), std::move(sensors));
}

/// The ten-sensor benchmark constellation, tiled so each sensor contributes
/// T i.i.d. measurements (m = 10 T). Reference at the origin.
inline SensorArray deploy_fixed_paper_array(Eigen::Index repeats) {
  if (repeats < 1) {
    throw ConfigError("repeat count must be >= 1");
  }
  static const double coords[10][3] = {
      {50, 0, 50},    {50, 50, -50}, {50, -50, 50},  {50, 0, 0},
      {50, 50, 50},   {-50, 0, -50}, {-50, -50, 50}, {-50, 50, -50},
      {-50, 0, 0},    {-50, -50, -50}};
  Matrix sensors(10 * repeats, 3);
  for (Eigen::Index t = 0; t < repeats; ++t) {
    for (Eigen::Index i = 0; i < 10; ++i) {
      sensors.row(10 * t + i) << coords[i][0], coords[i][1], coords[i][2];
    }
  }
  return SensorArray(Vector::Zero(3), std::move(sensors));
}

inline SensorArray SensorArray::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open sensor file: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("empty sensor file: " + path.string());
  }
  int dim = 0;
  Eigen::Index m = 0;
  {
    std::istringstream header(line);
    char comma = 0;
    if (!(header >> dim >> comma >> m) || comma != ',') {
      throw IoError("bad header in sensor file (want \"dim,n_sensors\"): " +
                    path.string());
    }
  }
  auto parse_row = [&](const std::string& text) {
    std::istringstream row(text);
    Vector v(dim);
    for (int j = 0; j < dim; ++j) {
      char comma = 0;
      if (!(row >> v[j])) {
        throw IoError("bad coordinate row in " + path.string() + ": " + text);
      }
      if (j + 1 < dim && !(row >> comma)) {
        throw IoError("bad coordinate row in " + path.string() + ": " + text);
      }
    }
    return v;
  };
  if (!std::getline(in, line)) {
    throw IoError("missing reference row in " + path.string());
  }
  Vector reference = parse_row(line);
  Matrix sensors(m, dim);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::getline(in, line)) {
      throw IoError("sensor file ended early: " + path.string());
    }
    sensors.row(i) = parse_row(line).transpose();
  }
  return SensorArray(std::move(reference), std::move(sensors));
}

inline void SensorArray::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write sensor file: " + path.string());
  }
  out << dimension() << "," << count() << "\n";
  auto write_row = [&](const Vector& v) {
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (j) out << ",";
      detail::format_double(out, v[j]);
    }
    out << "\n";
  };
  write_row(reference_);
  for (Eigen::Index i = 0; i < count(); ++i) {
    write_row(sensor(i));
  }
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

}  // namespace tdoa
