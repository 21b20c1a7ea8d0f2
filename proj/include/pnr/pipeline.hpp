#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnr/errors.hpp"
#include "pnr/inference.hpp"
#include "pnr/io/trace_file.hpp"
#include "pnr/trace_sim.hpp"

namespace pnr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitStage = 4;
inline constexpr int kExitRefused = 5;

//! A pipeline stage failed; `stage` names it for the exit message.
struct StageFailure : std::runtime_error {
  std::string stage;

  StageFailure(std::string stage_name, const std::string& what)
      : std::runtime_error(what), stage(std::move(stage_name)) {}
};

//! Refusal to overwrite an existing results archive without --force.
struct IdempotenceRefusal : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PriorSpec {
  infer::PriorDistribution::Kind kind = infer::PriorDistribution::Kind::flat;
  double parameter = 0.0;

  //! Parses "flat", "thermal:<lambda_sq>" or "poisson:<alpha_sq>".
  static PriorSpec parse(const std::string& text);
  std::string str() const;
};

inline const std::vector<std::string> kStageNames = {"pca",        "density",    "em",
                                                     "marginalize", "efficiency", "confidence"};

struct PipelineConfig {
  std::string traces_path;
  std::string out_dir;
  int n_components = 2;
  int grid_points = 2048;
  int n_max = 17;
  double kde_bandwidth = 0.0;     // explicit shared bandwidth; 0 selects the policy below
  double bandwidth_factor = 2.0;  // shared bandwidth = factor * min per-probe Silverman
  int em_max_iterations = 2000;
  double em_rel_tol = 1e-8;
  double calib_sigma = 0.01;  // relative probe-energy uncertainty
  int calib_quad = 7;
  bool calib_exact = false;   // also run the refit marginalization path
  PriorSpec prior;
  int threads = 1;
  bool force = false;
  std::vector<std::string> stages;  // empty runs everything
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimulateSpec {
  sim::SimConfig config;
  sim::DetectorGroundTruth truth;
  std::string output;
  io::SampleFormat format = io::SampleFormat::float64;
  bool force = false;
};

//! Parses a simulate spec from the JSON config text. Throws ConfigError.
SimulateSpec simulate_spec_from_json(const std::string& json_text);

//! Parses pipeline config JSON. Throws ConfigError.
PipelineConfig pipeline_config_from_json(const std::string& json_text);

//! Writes the trace file plus its metadata sidecar. No partial file is left
//! behind on failure.
void run_simulate(const SimulateSpec& spec);

//! Runs the selected stages in order, writing the results archive directory
//! with a manifest recording hashes, timings and stage status.
void run_pipeline(const PipelineConfig& config);

}  // namespace pnr::cli
