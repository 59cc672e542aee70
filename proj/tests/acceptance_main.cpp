// Acceptance suite: end-to-end reproduction checks for the two-step
// estimator, run at the published tolerances. Prints one pass/fail line per
// criterion; exit code is the number of failures.
//
// Usage: acceptance [--criterion N]   (N in 1..12; default runs all)

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tdoa/tdoa.hpp"
#include "test_support.hpp"

namespace {

using tdoa::EstimatorKind;
using tdoa::ExperimentConfig;
using tdoa::Matrix;
using tdoa::Scenario;
using tdoa::Vector;

constexpr std::uint64_t kSeed = 20260810;

Vector vec3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

const tdoa::EstimatorSizeResult& cell_of(const tdoa::CampaignResult& result,
                                         EstimatorKind kind, int size) {
  for (const auto& cell : result.cells) {
    if (cell.estimator == kind && cell.size == size) return cell;
  }
  throw std::runtime_error("missing campaign cell");
}

ExperimentConfig cube_config() {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::uniform_cube;
  cfg.source = vec3(15, 15, 15);
  cfg.sigma = 10.0;
  cfg.seed = kSeed;
  return cfg;
}

ExperimentConfig fixed_config() {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::fixed_array;
  cfg.source = vec3(52, 52, 52);
  cfg.sigma = 5.0;
  cfg.seed = kSeed;
  return cfg;
}

// Shared campaign for criteria 1, 2 and the bias-decay figure check.
const tdoa::CampaignResult& bias_eliminated_sweep() {
  static const tdoa::CampaignResult result = [] {
    ExperimentConfig cfg = cube_config();
    cfg.sizes = {30, 100, 300, 1000, 3000};
    cfg.trials = 1000;
    cfg.estimators = {EstimatorKind::bias_eliminated_est_sigma};
    return tdoa::run_campaign(cfg);
  }();
  return result;
}

Outcome criterion1_noise_variance_table() {
  const auto& result = bias_eliminated_sweep();
  const double at_100 =
      cell_of(result, EstimatorKind::bias_eliminated_est_sigma, 100)
          .sigma2_rmse;
  const double at_1000 =
      cell_of(result, EstimatorKind::bias_eliminated_est_sigma, 1000)
          .sigma2_rmse;
  Outcome out;
  std::ostringstream ss;
  ss << "sigma2 RMSE m=100: " << at_100 << " (want 16.59 +-25%), m=1000: "
     << at_1000 << " (want 5.46 +-25%)";
  out.detail = ss.str();
  out.pass = std::abs(at_100 - 16.5915) <= 0.25 * 16.5915 &&
             std::abs(at_1000 - 5.4593) <= 0.25 * 5.4593;
  return out;
}

Outcome criterion2_consistency_rate() {
  const auto& result = bias_eliminated_sweep();
  std::vector<double> sizes, rmses;
  for (const int m : {30, 100, 300, 1000, 3000}) {
    sizes.push_back(m);
    rmses.push_back(
        cell_of(result, EstimatorKind::bias_eliminated_est_sigma, m).rmse);
  }
  const double slope = testsup::slope_loglog(sizes, rmses);
  const double factor =
      cell_of(result, EstimatorKind::bias_eliminated_est_sigma, 100)
          .sigma2_rmse /
      cell_of(result, EstimatorKind::bias_eliminated_est_sigma, 1000)
          .sigma2_rmse;
  Outcome out;
  std::ostringstream ss;
  ss << "log-log RMSE slope " << slope
     << " (want [-0.6,-0.4]); sigma2 RMSE factor 100->1000 " << factor
     << " (want [2.2,3.8])";
  out.detail = ss.str();
  out.pass = slope >= -0.6 && slope <= -0.4 && factor >= 2.2 && factor <= 3.8;
  return out;
}

Outcome criterion3_asymptotic_efficiency() {
  ExperimentConfig cube = cube_config();
  cube.sizes = {3000};
  cube.trials = 1500;
  cube.estimators = {EstimatorKind::two_step};
  const auto cube_result = tdoa::run_campaign(cube);
  const auto& cube_cell = cell_of(cube_result, EstimatorKind::two_step, 3000);
  const double cube_ratio = cube_cell.rmse / cube_cell.rcrlb;

  ExperimentConfig fixed = fixed_config();
  fixed.sizes = {300};
  fixed.trials = 1500;
  fixed.estimators = {EstimatorKind::two_step};
  const auto fixed_result = tdoa::run_campaign(fixed);
  const auto& fixed_cell = cell_of(fixed_result, EstimatorKind::two_step, 300);
  const double fixed_ratio = fixed_cell.rmse / fixed_cell.rcrlb;

  Outcome out;
  std::ostringstream ss;
  ss << "RMSE/RCRLB cube m=3000: " << cube_ratio << ", fixed T=300: "
     << fixed_ratio << " (want [0.95,1.10])";
  out.detail = ss.str();
  out.pass = cube_ratio >= 0.95 && cube_ratio <= 1.10 && fixed_ratio >= 0.95 &&
             fixed_ratio <= 1.10;
  return out;
}

Outcome criterion4_one_step_sufficiency() {
  ExperimentConfig cfg = cube_config();
  cfg.sizes = {3000};
  cfg.trials = 500;
  cfg.estimators = {EstimatorKind::two_step};
  cfg.gn.max_iterations = 1;
  const double rmse_1 =
      cell_of(tdoa::run_campaign(cfg), EstimatorKind::two_step, 3000).rmse;
  cfg.gn.max_iterations = 10;
  const double rmse_10 =
      cell_of(tdoa::run_campaign(cfg), EstimatorKind::two_step, 3000).rmse;
  const double rel = std::abs(rmse_1 - rmse_10) / rmse_10;
  Outcome out;
  std::ostringstream ss;
  ss << "RMSE 1 step " << rmse_1 << ", 10 steps " << rmse_10
     << ", relative gap " << rel << " (want < 0.01)";
  out.detail = ss.str();
  out.pass = rel < 0.01;
  return out;
}

Outcome criterion5_variance_oracle_equivalence() {
  const int instances = 100;
  std::vector<std::string> failures(instances);
  std::vector<int> ok(instances, 0);
  const int workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < instances; i = next.fetch_add(1)) {
        const tdoa::Philox4x32 rng(kSeed + i, 5);
        const Eigen::Index m =
            50 + static_cast<Eigen::Index>(rng.uniform(0) * 450);
        const double sigma = 2.0 + 10.0 * rng.uniform(1);
        Vector x(3);
        for (int j = 0; j < 3; ++j) x[j] = 60.0 * (rng.uniform(2 + j) - 0.5);
        const tdoa::SensorArray array =
            tdoa::deploy_uniform_cube(100.0, m, kSeed + 1000 + i);
        const tdoa::MeasurementSet meas =
            tdoa::simulate(array, x, {sigma, kSeed + 2000 + i});
        const tdoa::NoiseVarianceProblem prob = tdoa::build_problem(meas);
        const tdoa::VarianceEstimate est = tdoa::estimate_sigma2(prob);

        const double sigma2 = sigma * sigma;
        const double z_max = 3.0 * sigma2;
        const int points = 30000;  // grid resolution 1e-4 * sigma^2
        const double crossing =
            testsup::grid_scan_crossing(prob, z_max, points);
        const double direct_residual =
            std::abs(testsup::direct_lambda_max(prob, est.sigma2_hat) - 1.0);
        std::ostringstream ss;
        if (crossing < 0.0) {
          ss << "instance " << i << ": no grid crossing below " << z_max;
        } else if (std::abs(est.sigma2_hat - crossing) >
                   z_max / points + 1e-12) {
          ss << "instance " << i << ": root " << est.sigma2_hat
             << " vs grid crossing " << crossing;
        } else if (direct_residual >= 1e-6) {
          ss << "instance " << i << ": |lambda_max - 1| = " << direct_residual;
        } else {
          ok[i] = 1;
        }
        failures[i] = ss.str();
      }
    });
  }
  for (auto& t : pool) t.join();
  Outcome out;
  const int passed = std::accumulate(ok.begin(), ok.end(), 0);
  std::ostringstream ss;
  ss << passed << "/" << instances
     << " instances match the grid-scan oracle at 1e-4 sigma^2 resolution";
  for (int i = 0; i < instances; ++i) {
    if (!ok[i]) ss << "; " << failures[i];
  }
  out.detail = ss.str();
  out.pass = passed == instances;
  return out;
}

Outcome criterion6_noiseless_exactness() {
  int failures = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    // 3D cube-surface geometry
    {
      const tdoa::SensorArray array =
          tdoa::deploy_uniform_cube(100.0, 25, kSeed + i);
      const tdoa::Philox4x32 rng(kSeed + 500 + i, 9);
      Vector x(3);
      for (int j = 0; j < 3; ++j) x[j] = 70.0 * (rng.uniform(j) - 0.5);
      const auto report =
          tdoa::localize(tdoa::simulate(array, x, {0.0, kSeed + i}));
      const double err = (report.x_hat - x).norm();
      worst = std::max(worst, err);
      if (err > 1e-9) ++failures;
    }
    // 2D square-perimeter geometry
    {
      const tdoa::SensorArray array =
          testsup::deploy_square_perimeter(100.0, 25, kSeed + i);
      const tdoa::Philox4x32 rng(kSeed + 700 + i, 9);
      Vector x(2);
      for (int j = 0; j < 2; ++j) x[j] = 70.0 * (rng.uniform(j) - 0.5);
      const auto report =
          tdoa::localize(tdoa::simulate(array, x, {0.0, kSeed + i}));
      const double err = (report.x_hat - x).norm();
      worst = std::max(worst, err);
      if (err > 1e-9) ++failures;
    }
  }
  Outcome out;
  std::ostringstream ss;
  ss << "worst error " << worst << " m over 100 geometries in 2D and 3D "
     << "(want <= 1e-9)";
  out.detail = ss.str();
  out.pass = failures == 0;
  return out;
}

Outcome criterion7_derivative_correctness() {
  struct Setup {
    tdoa::SensorArray array;
    double sigma;
    std::uint64_t seed;
  };
  const std::vector<Setup> setups = {
      {tdoa::deploy_uniform_cube(100.0, 60, kSeed + 1), 10.0, kSeed + 1},
      {testsup::deploy_square_perimeter(100.0, 40, kSeed + 2), 5.0, kSeed + 2},
      {tdoa::deploy_fixed_paper_array(2), 5.0, kSeed + 3},
  };
  double worst_grad = 0.0, worst_hess = 0.0, worst_jac = 0.0;
  for (const Setup& setup : setups) {
    const auto n = setup.array.dimension();
    Vector center = Vector::Constant(n, n == 3 ? 15.0 : 12.0);
    const tdoa::MeasurementSet meas =
        tdoa::simulate(setup.array, center, {setup.sigma, setup.seed});
    auto value = [&](const Vector& p) {
      return tdoa::ml_objective(meas, p).value;
    };
    const tdoa::Philox4x32 rng(setup.seed, 13);
    for (int k = 0; k < 20; ++k) {
      Vector p(n);
      for (int j = 0; j < n; ++j) {
        p[j] =
            70.0 * (rng.uniform(static_cast<std::uint64_t>(n) * k + j) - 0.5);
      }
      if (p.norm() < 1.0) p[0] += 7.0;
      const tdoa::ObjectiveEval eval = tdoa::ml_objective(meas, p);
      const Vector g_fd =
          testsup::fd_gradient(value, p, 1e-6 * (1.0 + p.norm()));
      worst_grad = std::max(
          worst_grad, (eval.gradient - g_fd).norm() / (1.0 + g_fd.norm()));
      const Matrix h_fd =
          testsup::fd_hessian(value, p, 1e-4 * (1.0 + p.norm()));
      worst_hess = std::max(
          worst_hess, (eval.hessian - h_fd).norm() / (1.0 + h_fd.norm()));
      // GN Jacobian rows against finite differences of f_i
      for (Eigen::Index i = 0; i < std::min<Eigen::Index>(5, meas.count());
           ++i) {
        auto f_i = [&](const Vector& q) {
          return tdoa::range_difference(setup.array, q, i);
        };
        const Vector j_fd =
            testsup::fd_gradient(f_i, p, 1e-6 * (1.0 + p.norm()));
        const Vector j_an = tdoa::detail::range_gradient(
            p - setup.array.reference(),
            setup.array.translated_sensors().row(i).transpose());
        worst_jac =
            std::max(worst_jac, (j_an - j_fd).norm() / (1.0 + j_fd.norm()));
      }
    }
  }
  Outcome out;
  std::ostringstream ss;
  ss << "worst relative error: gradient " << worst_grad << " (want < 1e-5), "
     << "Hessian " << worst_hess << " (want < 1e-3), Jacobian " << worst_jac
     << " (want < 1e-5)";
  out.detail = ss.str();
  out.pass = worst_grad < 1e-5 && worst_hess < 1e-3 && worst_jac < 1e-5;
  return out;
}

Outcome criterion8_known_vs_estimated_sigma() {
  ExperimentConfig cfg = fixed_config();
  cfg.sigma = 2.0;
  cfg.sizes = {100};
  cfg.trials = 1000;
  cfg.estimators = {EstimatorKind::two_step};
  cfg.gn.use_true_sigma2 = false;
  const double rmse_est =
      cell_of(tdoa::run_campaign(cfg), EstimatorKind::two_step, 100).rmse;
  cfg.gn.use_true_sigma2 = true;
  const double rmse_true =
      cell_of(tdoa::run_campaign(cfg), EstimatorKind::two_step, 100).rmse;
  const double rel = std::abs(rmse_true - rmse_est) / rmse_est;
  Outcome out;
  std::ostringstream ss;
  ss << "RMSE with estimated sigma2 " << rmse_est << ", with true sigma2 "
     << rmse_true << ", relative difference " << rel << " (want < 0.03)";
  out.detail = ss.str();
  out.pass = rel < 0.03;
  return out;
}

Outcome criterion9_linear_scaling() {
  auto median_localize_seconds = [](int repeats, Eigen::Index t) {
    const tdoa::SensorArray array = tdoa::deploy_fixed_paper_array(t);
    const Vector x = vec3(52, 52, 52);
    std::vector<double> times;
    times.reserve(repeats);
    for (int r = 0; r < repeats; ++r) {
      const tdoa::MeasurementSet meas =
          tdoa::simulate(array, x, {5.0, kSeed + r});
      const auto t0 = std::chrono::steady_clock::now();
      const auto report = tdoa::localize(meas);
      (void)report;
      times.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count());
    }
    std::nth_element(times.begin(), times.begin() + times.size() / 2,
                     times.end());
    return times[times.size() / 2];
  };
  median_localize_seconds(20, 30);  // warm-up
  const double at_300 = median_localize_seconds(200, 30);
  const double at_3000 = median_localize_seconds(200, 300);
  const double ratio = at_3000 / at_300;
  Outcome out;
  std::ostringstream ss;
  ss << "median localize: m=300 " << at_300 * 1e3 << " ms, m=3000 "
     << at_3000 * 1e3 << " ms, ratio " << ratio
     << " (want ratio <= 15 and m=3000 < 10 ms)";
  out.detail = ss.str();
  out.pass = ratio <= 15.0 && at_3000 < 0.010;
  return out;
}

Outcome criterion10_identifiability() {
  const auto fixed_report =
      tdoa::check_assumption5(tdoa::deploy_fixed_paper_array(1));
  // 50 points on a sphere satisfy one quadric relation
  const tdoa::Philox4x32 rng(kSeed, 17);
  Matrix sphere(50, 3);
  for (int i = 0; i < 50; ++i) {
    Vector p(3);
    for (int j = 0; j < 3; ++j) p[j] = rng.normal(4 * i + j);
    sphere.row(i) = (40.0 * p / p.norm()).transpose();
  }
  Vector ref(3);
  ref << 0, 0, 100;
  const auto sphere_report =
      tdoa::check_assumption5(tdoa::SensorArray(ref, sphere));

  Outcome out;
  std::ostringstream ss;
  ss << "fixed-array Veronese rank " << fixed_report.veronese_rank
     << " (criterion wants 10); sphere rank " << sphere_report.veronese_rank
     << " (want <= 9)";
  if (fixed_report.veronese_rank != 10) {
    ss << ". Note: the published constellation has first coordinate +-50 for "
          "every sensor, so its lift satisfies x^2 = 2500 and "
          "z^2 - xy - xz + yz = 0 exactly; rank 8 is the mathematically "
          "correct value and the expected rank 10 is unattainable.";
  }
  out.detail = ss.str();
  out.pass =
      fixed_report.veronese_rank == 10 && sphere_report.veronese_rank <= 9;
  return out;
}

Outcome figure_bias_decay() {
  const auto& result = bias_eliminated_sweep();
  const double first =
      cell_of(result, EstimatorKind::bias_eliminated_est_sigma, 30).bias;
  const double last =
      cell_of(result, EstimatorKind::bias_eliminated_est_sigma, 3000).bias;
  Outcome out;
  std::ostringstream ss;
  ss << "bias m=30: " << first << ", m=3000: " << last
     << " (want decay below 0.3x)";
  out.detail = ss.str();
  out.pass = last < 0.3 * first;
  return out;
}

Outcome figure_efficiency_across_noise() {
  Outcome out;
  std::ostringstream ss;
  ss << "RMSE/RCRLB at T=100:";
  out.pass = true;
  for (const double sigma : {0.1, 0.2, 0.5, 1.0, 2.0, 5.0}) {
    ExperimentConfig cfg = fixed_config();
    cfg.source = vec3(51, 51, 51);
    cfg.sigma = sigma;
    cfg.sizes = {100};
    cfg.trials = 300;
    cfg.estimators = {EstimatorKind::two_step};
    const auto& cell =
        cell_of(tdoa::run_campaign(cfg), EstimatorKind::two_step, 100);
    const double ratio = cell.rmse / cell.rcrlb;
    ss << " sigma=" << sigma << ": " << ratio;
    if (!(ratio >= 0.85 && ratio <= 1.20)) out.pass = false;
  }
  ss << " (want each within [0.85,1.20])";
  out.detail = ss.str();
  return out;
}

struct Criterion {
  int id;
  const char* label;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "Table-I noise-variance RMSE reproduction",
     criterion1_noise_variance_table},
    {2, "consistency rate (RMSE slope, sigma2 factor)",
     criterion2_consistency_rate},
    {3, "asymptotic efficiency vs RCRLB", criterion3_asymptotic_efficiency},
    {4, "one-step Gauss-Newton sufficiency", criterion4_one_step_sufficiency},
    {5, "noise-variance grid-scan oracle equivalence",
     criterion5_variance_oracle_equivalence},
    {6, "noiseless exact recovery", criterion6_noiseless_exactness},
    {7, "derivative correctness vs finite differences",
     criterion7_derivative_correctness},
    {8, "known vs estimated sigma2 equivalence",
     criterion8_known_vs_estimated_sigma},
    {9, "linear runtime scaling", criterion9_linear_scaling},
    {10, "identifiability rank tests", criterion10_identifiability},
    {11, "bias decay of the bias-eliminated estimator (qualitative)",
     figure_bias_decay},
    {12, "RCRLB attainment across noise levels (qualitative)",
     figure_efficiency_across_noise},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[i + 1]);
      ++i;
    } else {
      std::cerr << "usage: acceptance [--criterion N]\n";
      return 64;
    }
  }
  int failures = 0;
  for (const Criterion& criterion : kCriteria) {
    if (only != 0 && criterion.id != only) continue;
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    if (!outcome.pass) ++failures;
    std::cout << (outcome.pass ? "[PASS]" : "[FAIL]") << " criterion "
              << criterion.id << ": " << criterion.label << " -- "
              << outcome.detail << "\n"
              << std::flush;
  }
  return failures;
}
