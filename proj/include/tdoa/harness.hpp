#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tdoa/errors.hpp"
#include "tdoa/model.hpp"
#include "tdoa/pipeline.hpp"
#include "tdoa/serialization.hpp"
#include "tdoa/version.hpp"

namespace tdoa {

// Monte-Carlo campaign runner. Evaluates the configured estimators on the
// same measurement draws, size by size, and reports bias / RMSE / RCRLB /
// noise-variance RMSE / timing per (estimator, size) cell. Trials run on a
// thread pool; every random draw is keyed by (seed, size index, trial
// index), so results do not depend on the thread count or execution order.

enum class Scenario { uniform_cube, fixed_array, custom_csv };
enum class EstimatorKind {
  biased,
  bias_eliminated_true_sigma,
  bias_eliminated_est_sigma,
  two_step,
};

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::uniform_cube: return "uniform_cube";
    case Scenario::fixed_array: return "fixed_array";
    case Scenario::custom_csv: return "custom_csv";
  }
  return "unknown";
}

inline const char* to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::biased: return "biased";
    case EstimatorKind::bias_eliminated_true_sigma:
      return "bias_eliminated_true_sigma";
    case EstimatorKind::bias_eliminated_est_sigma:
      return "bias_eliminated_est_sigma";
    case EstimatorKind::two_step: return "two_step";
  }
  return "unknown";
}

inline Scenario scenario_from_string(const std::string& s) {
  if (s == "uniform_cube") return Scenario::uniform_cube;
  if (s == "fixed_array") return Scenario::fixed_array;
  if (s == "custom_csv") return Scenario::custom_csv;
  throw ConfigError("unknown scenario: " + s);
}

inline EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "biased") return EstimatorKind::biased;
  if (s == "bias_eliminated_true_sigma") {
    return EstimatorKind::bias_eliminated_true_sigma;
  }
  if (s == "bias_eliminated_est_sigma") {
    return EstimatorKind::bias_eliminated_est_sigma;
  }
  if (s == "two_step") return EstimatorKind::two_step;
  throw ConfigError("unknown estimator: " + s);
}

struct ExperimentConfig {
  Scenario scenario = Scenario::uniform_cube;
  Vector source;                 // true position x^o
  double sigma = 10.0;           // noise standard deviation, meters
  std::vector<int> sizes;        // m (uniform_cube) or T (fixed/custom)
  int trials = 1000;
  std::uint64_t seed = 0;
  GnConfig gn;
  std::vector<EstimatorKind> estimators = {
      EstimatorKind::biased, EstimatorKind::bias_eliminated_true_sigma,
      EstimatorKind::bias_eliminated_est_sigma, EstimatorKind::two_step};
  std::string output_dir;
  double cube_edge = 100.0;
  std::string csv_path;          // custom_csv scenario
  std::optional<bool> redraw_geometry;  // default: redraw only uniform_cube
  int threads = 0;               // 0 = hardware concurrency

  bool redraw() const {
    return redraw_geometry.value_or(scenario == Scenario::uniform_cube);
  }

  void validate() const {
    if (source.size() != 2 && source.size() != 3) {
      throw ConfigError("source must have 2 or 3 coordinates");
    }
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw ConfigError("sigma must be finite and nonnegative");
    }
    if (sizes.empty()) throw ConfigError("sizes must be nonempty");
    if (!std::is_sorted(sizes.begin(), sizes.end())) {
      throw ConfigError("sizes must be ascending");
    }
    for (int s : sizes) {
      if (s < 1) throw ConfigError("sizes must be positive");
    }
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (estimators.empty()) throw ConfigError("select at least one estimator");
    if (scenario == Scenario::custom_csv && csv_path.empty()) {
      throw ConfigError("custom_csv scenario needs csv_path");
    }
    gn.validate();
  }
};

struct EstimatorSizeResult {
  EstimatorKind estimator;
  int size = 0;
  double bias = 0.0;
  double rmse = 0.0;
  double rcrlb = 0.0;
  double sigma2_rmse = 0.0;       // NaN for estimators using the true sigma^2
  double mean_wall_time = 0.0;    // seconds per trial
  int divergence_count = 0;
};

struct CampaignResult {
  ExperimentConfig config;
  std::vector<EstimatorSizeResult> cells;
};

namespace detail {

struct TrialOutcome {
  bool failed = false;
  Vector position;
  double wall_time = 0.0;
  std::optional<double> sigma2_hat;
};

/// Seed-derivation purposes for the campaign streams.
inline constexpr std::uint32_t kPurposeGeometry = 0;
inline constexpr std::uint32_t kPurposeNoise = 1;

inline SensorArray tile_array(const SensorArray& base, int repeats) {
  const auto m = base.count();
  Matrix sensors(m * repeats, base.dimension());
  for (int t = 0; t < repeats; ++t) {
    sensors.middleRows(t * m, m) = base.sensors();
  }
  return SensorArray(base.reference(), std::move(sensors));
}

inline SensorArray make_geometry(const ExperimentConfig& cfg,
                                 const SensorArray* custom_base, int size,
                                 std::uint64_t geometry_seed) {
  switch (cfg.scenario) {
    case Scenario::uniform_cube:
      return deploy_uniform_cube(cfg.cube_edge, size, geometry_seed);
    case Scenario::fixed_array:
      return deploy_fixed_paper_array(size);
    case Scenario::custom_csv:
      return tile_array(*custom_base, size);
  }
  throw ConfigError("unknown scenario");
}

inline TrialOutcome run_estimator(EstimatorKind kind,
                                  const MeasurementSet& meas,
                                  const GnConfig& gn) {
  TrialOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    switch (kind) {
      case EstimatorKind::biased: {
        const double sigma2 = meas.true_sigma2().value_or(0.0);
        out.position = solve_biased(assemble(meas, sigma2)).position();
        break;
      }
      case EstimatorKind::bias_eliminated_true_sigma: {
        if (!meas.true_sigma2()) {
          throw ConfigError("true sigma^2 unavailable");
        }
        out.position =
            solve_bias_eliminated(meas, *meas.true_sigma2()).y.position();
        break;
      }
      case EstimatorKind::bias_eliminated_est_sigma: {
        double sigma2_hat = 0.0;
        try {
          sigma2_hat = estimate_sigma2(meas).sigma2_hat;
        } catch (const Error&) {
          // same recovery as the pipeline: proceed with sigma2 = 0
        }
        out.sigma2_hat = sigma2_hat;
        out.position = solve_bias_eliminated(meas, sigma2_hat).y.position();
        break;
      }
      case EstimatorKind::two_step: {
        const EstimateReport report = localize(meas, gn);
        out.position = report.x_hat;
        out.sigma2_hat = report.sigma2_hat;
        break;
      }
    }
  } catch (const Error&) {
    out.failed = true;
  }
  out.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

struct TrialRecord {
  std::vector<TrialOutcome> outcomes;  // one per configured estimator
  double crlb = std::numeric_limits<double>::quiet_NaN();
};

inline void run_trial_range(const ExperimentConfig& cfg,
                            const SensorArray* custom_base,
                            const SensorArray* fixed_geometry,
                            std::uint32_t size_index, int size, int begin,
                            int end, std::vector<TrialRecord>* records) {
  for (int t = begin; t < end; ++t) {
    TrialRecord& record = (*records)[t];
    const SensorArray array =
        fixed_geometry
            ? *fixed_geometry
            : make_geometry(cfg, custom_base, size,
                            derive_seed(cfg.seed, size_index,
                                        static_cast<std::uint32_t>(t),
                                        kPurposeGeometry));
    const NoiseModel noise{cfg.sigma,
                           derive_seed(cfg.seed, size_index,
                                       static_cast<std::uint32_t>(t),
                                       kPurposeNoise)};
    const MeasurementSet meas = simulate(array, cfg.source, noise);
    try {
      const detail::SymmetricInverse m_inv = detail::invert_symmetric(
          information_matrix_M(array, cfg.source), "information matrix");
      record.crlb = cfg.sigma * cfg.sigma /
                    static_cast<double>(array.count()) *
                    m_inv.inverse.trace();
    } catch (const Error&) {
      // leave NaN; excluded from the RCRLB average
    }
    record.outcomes.reserve(cfg.estimators.size());
    for (const EstimatorKind kind : cfg.estimators) {
      record.outcomes.push_back(run_estimator(kind, meas, cfg.gn));
    }
  }
}

}  // namespace detail

/// Runs the full campaign. Deterministic in (config, seed) regardless of
/// thread count; per-trial estimator failures and estimates escaping a
/// 100 x ||x^o|| ball count as divergences and are excluded from the
/// statistics.
inline CampaignResult run_campaign(const ExperimentConfig& cfg) {
  cfg.validate();
  std::optional<SensorArray> custom_base;
  if (cfg.scenario == Scenario::custom_csv) {
    custom_base = SensorArray::load_csv(cfg.csv_path);
    if (custom_base->dimension() != cfg.source.size()) {
      throw ConfigError("custom array dimension does not match source");
    }
  }

  const int thread_count =
      cfg.threads > 0
          ? cfg.threads
          : std::max(1u, std::thread::hardware_concurrency());

  // Divergence ball is sized by the source's distance to the reference.
  const Vector reference = custom_base ? custom_base->reference()
                                       : Vector::Zero(cfg.source.size());
  const double source_radius =
      100.0 * std::max((cfg.source - reference).norm(), 1.0);

  CampaignResult result;
  result.config = cfg;
  for (std::uint32_t size_index = 0; size_index < cfg.sizes.size();
       ++size_index) {
    const int size = cfg.sizes[size_index];

    std::optional<SensorArray> fixed_geometry;
    if (!cfg.redraw()) {
      fixed_geometry = detail::make_geometry(
          cfg, custom_base ? &*custom_base : nullptr, size,
          derive_seed(cfg.seed, size_index, 0, detail::kPurposeGeometry));
    }

    std::vector<detail::TrialRecord> records(cfg.trials);
    {
      const int chunks = std::min(thread_count, cfg.trials);
      std::vector<std::thread> workers;
      workers.reserve(chunks);
      const int per = (cfg.trials + chunks - 1) / chunks;
      for (int c = 0; c < chunks; ++c) {
        const int begin = c * per;
        const int end = std::min(cfg.trials, begin + per);
        if (begin >= end) break;
        workers.emplace_back(detail::run_trial_range, std::cref(cfg),
                             custom_base ? &*custom_base : nullptr,
                             fixed_geometry ? &*fixed_geometry : nullptr,
                             size_index, size, begin, end, &records);
      }
      for (auto& w : workers) w.join();
    }

    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
      EstimatorSizeResult cell;
      cell.estimator = cfg.estimators[e];
      cell.size = size;

      Vector error_sum = Vector::Zero(cfg.source.size());
      double sq_error_sum = 0.0;
      double sigma2_sq_error_sum = 0.0;
      int sigma2_samples = 0;
      double wall_sum = 0.0;
      double crlb_sum = 0.0;
      int crlb_samples = 0;
      int included = 0;

      for (const detail::TrialRecord& record : records) {
        const detail::TrialOutcome& out = record.outcomes[e];
        wall_sum += out.wall_time;
        const bool diverged =
            out.failed || !out.position.allFinite() ||
            (out.position - cfg.source).norm() > source_radius;
        if (diverged) {
          ++cell.divergence_count;
          continue;
        }
        ++included;
        const Vector err = out.position - cfg.source;
        error_sum += err;
        sq_error_sum += err.squaredNorm();
        if (out.sigma2_hat) {
          const double de = *out.sigma2_hat - cfg.sigma * cfg.sigma;
          sigma2_sq_error_sum += de * de;
          ++sigma2_samples;
        }
        if (std::isfinite(record.crlb)) {
          crlb_sum += record.crlb;
          ++crlb_samples;
        }
      }

      const double nan = std::numeric_limits<double>::quiet_NaN();
      if (included > 0) {
        cell.bias = (error_sum / included).cwiseAbs().sum();
        cell.rmse = std::sqrt(sq_error_sum / included);
      } else {
        cell.bias = nan;
        cell.rmse = nan;
      }
      cell.rcrlb = crlb_samples > 0 ? std::sqrt(crlb_sum / crlb_samples) : nan;
      cell.sigma2_rmse = sigma2_samples > 0
                             ? std::sqrt(sigma2_sq_error_sum / sigma2_samples)
                             : nan;
      cell.mean_wall_time = wall_sum / cfg.trials;
      result.cells.push_back(cell);
    }
  }
  return result;
}

inline Json to_json(const ExperimentConfig& cfg) {
  Json estimators = Json::array();
  for (const EstimatorKind e : cfg.estimators) {
    estimators.push_back(to_string(e));
  }
  Json j{{"scenario", to_string(cfg.scenario)},
         {"source", detail::vector_to_json(cfg.source)},
         {"sigma", cfg.sigma},
         {"sizes", cfg.sizes},
         {"trials", cfg.trials},
         {"seed", cfg.seed},
         {"gn",
          {{"max_iterations", cfg.gn.max_iterations},
           {"step_tolerance", cfg.gn.step_tolerance},
           {"damping", cfg.gn.damping},
           {"use_true_sigma2", cfg.gn.use_true_sigma2}}},
         {"estimators", estimators},
         {"output_dir", cfg.output_dir},
         {"cube_edge", cfg.cube_edge},
         {"csv_path", cfg.csv_path},
         {"threads", cfg.threads}};
  if (cfg.redraw_geometry) j["redraw_geometry"] = *cfg.redraw_geometry;
  return j;
}

inline Json to_json(const CampaignResult& result) {
  Json cells = Json::array();
  for (const EstimatorSizeResult& cell : result.cells) {
    cells.push_back(Json{{"estimator", to_string(cell.estimator)},
                         {"size", cell.size},
                         {"bias", cell.bias},
                         {"rmse", cell.rmse},
                         {"rcrlb", cell.rcrlb},
                         {"sigma2_rmse", cell.sigma2_rmse},
                         {"mean_wall_time", cell.mean_wall_time},
                         {"divergence_count", cell.divergence_count}});
  }
  return Json{{"tool_version", kVersion},
              {"generator", kGeneratorId},
              {"seed", result.config.seed},
              {"config", to_json(result.config)},
              {"results", cells}};
}

/// Writes bias.csv, rmse.csv, sigma2.csv, timing.csv and campaign.json.
inline void emit_results(const CampaignResult& result,
                         const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory " + dir.string() + ": " +
                  ec.message());
  }

  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    return out;
  };
  auto write_cell = [](std::ofstream& out, const EstimatorSizeResult& cell,
                       double value, const double* extra = nullptr) {
    out << cell.size << "," << to_string(cell.estimator) << ",";
    detail::format_double(out, value);
    if (extra) {
      out << ",";
      detail::format_double(out, *extra);
    }
    out << "\n";
  };

  {
    std::ofstream out = open("bias.csv");
    out << "size,estimator,value\n";
    for (const auto& cell : result.cells) write_cell(out, cell, cell.bias);
  }
  {
    std::ofstream out = open("rmse.csv");
    out << "size,estimator,value,rcrlb\n";
    for (const auto& cell : result.cells) {
      write_cell(out, cell, cell.rmse, &cell.rcrlb);
    }
  }
  {
    std::ofstream out = open("sigma2.csv");
    out << "size,estimator,value\n";
    for (const auto& cell : result.cells) {
      write_cell(out, cell, cell.sigma2_rmse);
    }
  }
  {
    std::ofstream out = open("timing.csv");
    out << "size,estimator,value\n";
    for (const auto& cell : result.cells) {
      write_cell(out, cell, cell.mean_wall_time);
    }
  }
  {
    std::ofstream out = open("campaign.json");
    out << to_json(result).dump(2) << "\n";
    if (!out) throw IoError("write failed: " + (dir / "campaign.json").string());
  }
}

}  // namespace tdoa
