#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "pnr/pipeline.hpp"

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw pnr::IoError("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"POVM tomography pipeline for continuous-output photon-number detectors"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic trace data set");
  std::string sim_config_path;
  std::string sim_out_override;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  simulate->add_option("--config", sim_config_path, "simulate config JSON")->required();
  simulate->add_option("--out", sim_out_override, "override output trace file path");
  simulate->add_option("--seed", sim_seed, "override rng seed")->each([&](const std::string&) {
    sim_seed_set = true;
  });

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "run the tomography pipeline on a trace file");
  std::string pipe_config_path, traces_path, out_dir, stages_csv, prior_text;
  int grid_points = 0, n_max = 0, threads = 0;
  double calib_sigma = -1.0, kde_bandwidth = -1.0;
  std::uint64_t pipe_seed = 0;
  bool pipe_seed_set = false, force = false;
  pipeline->add_option("--config", pipe_config_path, "pipeline config JSON");
  pipeline->add_option("--traces", traces_path, "input trace file");
  pipeline->add_option("--out", out_dir, "results archive directory");
  pipeline->add_option("--stages", stages_csv, "comma-separated stage subset");
  pipeline->add_option("--grid-points", grid_points, "outcome grid resolution");
  pipeline->add_option("--n-max", n_max, "photon-number truncation");
  pipeline->add_option("--prior", prior_text, "flat | thermal:<lambda_sq> | poisson:<alpha_sq>");
  pipeline->add_option("--calib-sigma", calib_sigma, "relative calibration uncertainty");
  pipeline->add_option("--kde-bandwidth", kde_bandwidth, "explicit shared KDE bandwidth");
  pipeline->add_option("--threads", threads, "worker cap");
  pipeline->add_option("--seed", pipe_seed, "seed recorded in the manifest")
      ->each([&](const std::string&) { pipe_seed_set = true; });
  pipeline->add_flag("--force", force, "overwrite an existing results archive");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return pnr::cli::kExitConfig;
  }

  try {
    if (simulate->parsed()) {
      auto spec = pnr::cli::simulate_spec_from_json(read_text_file(sim_config_path));
      if (!sim_out_override.empty()) spec.output = sim_out_override;
      if (sim_seed_set) spec.config.rng_seed = sim_seed;
      pnr::cli::run_simulate(spec);
      return pnr::cli::kExitOk;
    }

    pnr::cli::PipelineConfig cfg;
    if (!pipe_config_path.empty())
      cfg = pnr::cli::pipeline_config_from_json(read_text_file(pipe_config_path));
    if (!traces_path.empty()) cfg.traces_path = traces_path;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (grid_points > 0) cfg.grid_points = grid_points;
    if (n_max > 0) cfg.n_max = n_max;
    if (!prior_text.empty()) cfg.prior = pnr::cli::PriorSpec::parse(prior_text);
    if (calib_sigma >= 0) cfg.calib_sigma = calib_sigma;
    if (kde_bandwidth >= 0) cfg.kde_bandwidth = kde_bandwidth;
    if (threads > 0) cfg.threads = threads;
    if (pipe_seed_set) cfg.seed = pipe_seed;
    if (force) cfg.force = true;
    if (!stages_csv.empty()) {
      cfg.stages.clear();
      std::size_t start = 0;
      while (start <= stages_csv.size()) {
        const std::size_t comma = stages_csv.find(',', start);
        cfg.stages.push_back(stages_csv.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }
    pnr::cli::run_pipeline(cfg);
    return pnr::cli::kExitOk;
  } catch (const pnr::cli::IdempotenceRefusal& e) {
    std::cerr << "refused: " << e.what() << '\n';
    return pnr::cli::kExitRefused;
  } catch (const pnr::cli::StageFailure& e) {
    std::cerr << "stage '" << e.stage << "' failed: " << e.what() << '\n';
    return pnr::cli::kExitStage;
  } catch (const pnr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return pnr::cli::kExitConfig;
  } catch (const pnr::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return pnr::cli::kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pnr::cli::kExitStage;
  }
}
