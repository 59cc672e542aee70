// Command-line front end: simulation, single-shot estimation, Monte-Carlo
// campaigns, CRLB evaluation, and geometry checks.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tdoa/tdoa.hpp"

namespace {

namespace fs = std::filesystem;

tdoa::Vector to_vector(const std::vector<double>& v) {
  tdoa::Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

tdoa::Vector read_measurements(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw tdoa::IoError("cannot open measurement file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "d") {
    throw tdoa::IoError("measurement file must start with header \"d\": " +
                        path.string());
  }
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      values.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw tdoa::IoError("bad measurement line in " + path.string() + ": " +
                          line);
    }
  }
  return to_vector(values);
}

void write_measurements(const fs::path& path, const tdoa::Vector& d) {
  std::ofstream out(path);
  if (!out) throw tdoa::IoError("cannot write " + path.string());
  out << "d\n";
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    tdoa::detail::format_double(out, d[i]);
    out << "\n";
  }
}

void emit_json(const tdoa::Json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw tdoa::IoError("cannot write " + out_path);
    out << j.dump(2) << "\n";
  }
}

// CLI11 only applies config files attached to the root command, so the
// campaign subcommand parses its TOML through the formatter directly.
// Flat keys mirror ExperimentConfig; Gauss-Newton knobs live in [gn].
struct TomlCampaignConfig {
  tdoa::ExperimentConfig cfg;
  std::string scenario;
  std::vector<double> source;
  std::vector<std::string> estimators;
};

TomlCampaignConfig read_campaign_toml(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw tdoa::IoError("cannot open config file: " + path.string());
  TomlCampaignConfig out;
  CLI::ConfigTOML format;
  auto as_double = [](const CLI::ConfigItem& item) {
    return std::stod(item.inputs.at(0));
  };
  auto as_int = [](const CLI::ConfigItem& item) {
    return std::stoi(item.inputs.at(0));
  };
  auto as_bool = [](const CLI::ConfigItem& item) {
    const std::string& s = item.inputs.at(0);
    return s == "true" || s == "1" || s == "yes" || s == "on";
  };
  for (const CLI::ConfigItem& item : format.from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    const std::string key =
        item.parents.empty() ? item.name : item.parents.at(0) + "." + item.name;
    try {
      if (key == "scenario") {
        out.scenario = item.inputs.at(0);
      } else if (key == "source") {
        for (const auto& s : item.inputs) out.source.push_back(std::stod(s));
      } else if (key == "sigma") {
        out.cfg.sigma = as_double(item);
      } else if (key == "sizes") {
        out.cfg.sizes.clear();
        for (const auto& s : item.inputs) out.cfg.sizes.push_back(std::stoi(s));
      } else if (key == "trials") {
        out.cfg.trials = as_int(item);
      } else if (key == "seed") {
        out.cfg.seed = std::stoull(item.inputs.at(0));
      } else if (key == "estimators") {
        out.estimators = item.inputs;
      } else if (key == "output_dir") {
        out.cfg.output_dir = item.inputs.at(0);
      } else if (key == "cube_edge") {
        out.cfg.cube_edge = as_double(item);
      } else if (key == "csv_path") {
        out.cfg.csv_path = item.inputs.at(0);
      } else if (key == "redraw_geometry") {
        out.cfg.redraw_geometry = as_bool(item);
      } else if (key == "threads") {
        out.cfg.threads = as_int(item);
      } else if (key == "gn.max_iterations") {
        out.cfg.gn.max_iterations = as_int(item);
      } else if (key == "gn.step_tolerance") {
        out.cfg.gn.step_tolerance = as_double(item);
      } else if (key == "gn.damping") {
        out.cfg.gn.damping = as_double(item);
      } else if (key == "gn.use_true_sigma2") {
        out.cfg.gn.use_true_sigma2 = as_bool(item);
      } else {
        throw tdoa::ConfigError("unknown config key: " + key);
      }
    } catch (const std::invalid_argument&) {
      throw tdoa::ConfigError("bad value for config key " + key);
    } catch (const std::out_of_range&) {
      throw tdoa::ConfigError("bad value for config key " + key);
    }
  }
  return out;
}

struct SimulateArgs {
  std::string scenario = "uniform_cube";
  int size = 100;
  double sigma = 10.0;
  std::vector<double> source;
  std::uint64_t seed = 0;
  double edge = 100.0;
  std::string array_csv;
  std::string out_dir = ".";
};

int run_simulate(const SimulateArgs& args) {
  const tdoa::Scenario scenario = tdoa::scenario_from_string(args.scenario);
  tdoa::SensorArray array = [&] {
    switch (scenario) {
      case tdoa::Scenario::uniform_cube:
        return tdoa::deploy_uniform_cube(args.edge, args.size, args.seed);
      case tdoa::Scenario::fixed_array:
        return tdoa::deploy_fixed_paper_array(args.size);
      case tdoa::Scenario::custom_csv: {
        if (args.array_csv.empty()) {
          throw tdoa::ConfigError("custom_csv scenario needs --array");
        }
        return tdoa::SensorArray::load_csv(args.array_csv);
      }
    }
    throw tdoa::ConfigError("unknown scenario");
  }();
  const tdoa::Vector source = to_vector(args.source);
  if (source.size() != array.dimension()) {
    throw tdoa::ConfigError("--source must match the array dimension");
  }
  const tdoa::MeasurementSet meas =
      tdoa::simulate(array, source, {args.sigma, args.seed});

  fs::create_directories(args.out_dir);
  array.save_csv(fs::path(args.out_dir) / "sensors.csv");
  write_measurements(fs::path(args.out_dir) / "measurements.csv", meas.d());
  tdoa::Json meta{{"scenario", args.scenario},
                  {"size", args.size},
                  {"sigma", args.sigma},
                  {"seed", args.seed},
                  {"source", tdoa::detail::vector_to_json(source)},
                  {"generator", tdoa::kGeneratorId},
                  {"tool_version", tdoa::kVersion}};
  std::ofstream out(fs::path(args.out_dir) / "sim.json");
  out << meta.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TDOA source localization: two-step consistent estimator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tdoa::kVersion));

  // --- simulate ---
  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Generate a sensor geometry and noisy measurements");
  simulate->add_option("--scenario", sim.scenario,
                       "uniform_cube | fixed_array | custom_csv");
  simulate->add_option("--size", sim.size, "sensor count m (or repeats T)");
  simulate->add_option("--sigma", sim.sigma, "noise standard deviation [m]");
  simulate->add_option("--source", sim.source, "true source x,y[,z]")
      ->delimiter(',')
      ->required();
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--edge", sim.edge, "cube edge length [m]");
  simulate->add_option("--array", sim.array_csv, "sensor CSV (custom_csv)");
  simulate->add_option("--out", sim.out_dir, "output directory");

  // --- estimate ---
  std::string est_array, est_meas, est_out;
  double est_sigma2 = -1.0;
  tdoa::GnConfig est_gn;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "Run the two-step estimator on a measurement file");
  estimate->add_option("--array", est_array, "sensor CSV")->required();
  estimate->add_option("--measurements", est_meas, "measurement CSV")
      ->required();
  estimate->add_option("--sigma2", est_sigma2,
                       "known noise variance; estimated when omitted");
  estimate->add_option("--gn-iterations", est_gn.max_iterations,
                       "Gauss-Newton iterations (default 1)");
  estimate->add_option("--damping", est_gn.damping, "Gauss-Newton damping");
  estimate->add_option("--out", est_out, "write report JSON here");

  // --- campaign ---
  tdoa::ExperimentConfig campaign_cfg;
  std::vector<double> campaign_source{15.0, 15.0, 15.0};
  std::string campaign_scenario = "uniform_cube";
  std::vector<std::string> campaign_estimators;
  std::optional<bool> campaign_redraw;
  std::string campaign_config_path;
  CLI::App* campaign = app.add_subcommand(
      "campaign", "Monte-Carlo benchmark producing CSV/JSON artifacts");
  campaign->add_option("--config", campaign_config_path,
                       "TOML config mirroring the options; flags override");
  campaign->add_option("--scenario", campaign_scenario,
                       "uniform_cube | fixed_array | custom_csv");
  campaign->add_option("--source", campaign_source, "true source x,y[,z]")
      ->delimiter(',');
  campaign->add_option("--sigma", campaign_cfg.sigma,
                       "noise standard deviation [m]");
  campaign->add_option("--sizes", campaign_cfg.sizes,
                       "ascending sensor counts m (or repeats T)")
      ->delimiter(',');
  campaign->add_option("--trials", campaign_cfg.trials, "Monte-Carlo trials");
  campaign->add_option("--seed", campaign_cfg.seed, "master seed");
  campaign->add_option("--estimators", campaign_estimators,
                       "subset of biased,bias_eliminated_true_sigma,"
                       "bias_eliminated_est_sigma,two_step")
      ->delimiter(',');
  campaign->add_option("--output_dir,--out", campaign_cfg.output_dir,
                       "output directory");
  campaign->add_option("--cube_edge", campaign_cfg.cube_edge,
                       "cube edge length [m]");
  campaign->add_option("--csv_path", campaign_cfg.csv_path,
                       "sensor CSV (custom_csv)");
  campaign->add_flag("--redraw_geometry,!--no-redraw_geometry",
                     [&campaign_redraw](std::int64_t count) {
                       campaign_redraw = count > 0;
                     },
                     "redraw geometry each trial (default: uniform_cube only)");
  campaign->add_option("--threads", campaign_cfg.threads,
                       "worker threads (0 = hardware)");
  campaign->add_option("--gn.max_iterations", campaign_cfg.gn.max_iterations,
                       "Gauss-Newton iterations");
  campaign->add_option("--gn.step_tolerance", campaign_cfg.gn.step_tolerance,
                       "Gauss-Newton stop tolerance [m]");
  campaign->add_option("--gn.damping", campaign_cfg.gn.damping,
                       "Gauss-Newton damping");
  campaign->add_flag("--gn.use_true_sigma2", campaign_cfg.gn.use_true_sigma2,
                     "feed the true noise variance to the pipeline");

  // --- crlb ---
  std::string crlb_array, crlb_out;
  std::vector<double> crlb_source;
  double crlb_sigma = 1.0;
  CLI::App* crlb = app.add_subcommand(
      "crlb", "Fisher information and CRLB for a geometry and source");
  crlb->add_option("--array", crlb_array, "sensor CSV")->required();
  crlb->add_option("--source", crlb_source, "source x,y[,z]")
      ->delimiter(',')
      ->required();
  crlb->add_option("--sigma", crlb_sigma, "noise standard deviation [m]");
  crlb->add_option("--out", crlb_out, "write report JSON here");

  // --- check-geometry ---
  std::string check_array, check_out;
  std::vector<double> check_probe;
  CLI::App* check = app.add_subcommand(
      "check-geometry", "Identifiability rank test for a sensor CSV");
  check->add_option("--array", check_array, "sensor CSV")->required();
  check->add_option("--probe", check_probe,
                    "probe position x,y[,z] for the information matrix")
      ->delimiter(',');
  check->add_option("--out", check_out, "write report JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) {
      return run_simulate(sim);
    }
    if (estimate->parsed()) {
      tdoa::SensorArray array = tdoa::SensorArray::load_csv(est_array);
      tdoa::Vector d = read_measurements(est_meas);
      std::optional<double> sigma2;
      if (est_sigma2 >= 0.0) {
        sigma2 = est_sigma2;
        est_gn.use_true_sigma2 = true;
      }
      const tdoa::MeasurementSet meas(std::move(array), std::move(d), sigma2);
      const tdoa::EstimateReport report = tdoa::localize(meas, est_gn);
      emit_json(tdoa::to_json(report), est_out);
      return 0;
    }
    if (campaign->parsed()) {
      tdoa::ExperimentConfig cfg;
      std::string scenario = campaign_scenario;
      std::vector<double> source = campaign_source;
      std::vector<std::string> estimators = campaign_estimators;
      if (!campaign_config_path.empty()) {
        TomlCampaignConfig file = read_campaign_toml(campaign_config_path);
        cfg = file.cfg;
        if (!file.scenario.empty()) scenario = file.scenario;
        if (!file.source.empty()) source = file.source;
        if (!file.estimators.empty()) estimators = file.estimators;
      }
      // explicit flags override config-file values
      if (campaign->count("--scenario")) scenario = campaign_scenario;
      if (campaign->count("--source")) source = campaign_source;
      if (campaign->count("--estimators")) estimators = campaign_estimators;
      if (campaign->count("--sigma")) cfg.sigma = campaign_cfg.sigma;
      if (campaign->count("--sizes")) cfg.sizes = campaign_cfg.sizes;
      if (campaign->count("--trials")) cfg.trials = campaign_cfg.trials;
      if (campaign->count("--seed")) cfg.seed = campaign_cfg.seed;
      if (campaign->count("--output_dir")) {
        cfg.output_dir = campaign_cfg.output_dir;
      }
      if (campaign->count("--cube_edge")) cfg.cube_edge = campaign_cfg.cube_edge;
      if (campaign->count("--csv_path")) cfg.csv_path = campaign_cfg.csv_path;
      if (campaign_redraw) cfg.redraw_geometry = campaign_redraw;
      if (campaign->count("--threads")) cfg.threads = campaign_cfg.threads;
      if (campaign->count("--gn.max_iterations")) {
        cfg.gn.max_iterations = campaign_cfg.gn.max_iterations;
      }
      if (campaign->count("--gn.step_tolerance")) {
        cfg.gn.step_tolerance = campaign_cfg.gn.step_tolerance;
      }
      if (campaign->count("--gn.damping")) {
        cfg.gn.damping = campaign_cfg.gn.damping;
      }
      if (campaign->count("--gn.use_true_sigma2")) {
        cfg.gn.use_true_sigma2 = campaign_cfg.gn.use_true_sigma2;
      }
      cfg.scenario = tdoa::scenario_from_string(scenario);
      cfg.source = to_vector(source);
      if (!estimators.empty()) {
        cfg.estimators.clear();
        for (const std::string& name : estimators) {
          cfg.estimators.push_back(tdoa::estimator_from_string(name));
        }
      }
      if (cfg.output_dir.empty()) {
        throw tdoa::ConfigError("output_dir (or --out) is required");
      }
      const tdoa::CampaignResult result = tdoa::run_campaign(cfg);
      tdoa::emit_results(result, cfg.output_dir);
      std::cout << "wrote " << cfg.output_dir
                << "/{bias,rmse,sigma2,timing}.csv and campaign.json\n";
      return 0;
    }
    if (crlb->parsed()) {
      const tdoa::SensorArray array = tdoa::SensorArray::load_csv(crlb_array);
      const tdoa::BoundsReport report = tdoa::fisher_information(
          array, to_vector(crlb_source), crlb_sigma * crlb_sigma);
      emit_json(tdoa::to_json(report), crlb_out);
      return 0;
    }
    if (check->parsed()) {
      const tdoa::SensorArray array = tdoa::SensorArray::load_csv(check_array);
      std::optional<tdoa::Vector> probe;
      if (!check_probe.empty()) probe = to_vector(check_probe);
      const tdoa::IdentifiabilityReport report =
          tdoa::check_assumption5(array, probe);
      emit_json(tdoa::to_json(report), check_out);
      return 0;
    }
  } catch (const tdoa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tdoa::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const tdoa::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
