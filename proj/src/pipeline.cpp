#include "pnr/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>

#include "pnr/calibration.hpp"
#include "pnr/io/csv.hpp"
#include "pnr/io/model_io.hpp"
#include "pnr/kde.hpp"
#include "pnr/pca.hpp"
#include "pnr/tomo.hpp"
#include "pnr/util.hpp"

namespace pnr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kToolVersion = "1.0.0";

PriorSpec PriorSpec::parse(const std::string& text) {
  using Kind = infer::PriorDistribution::Kind;
  if (text == "flat") return {Kind::flat, 0.0};
  auto parse_param = [&](const std::string& prefix) -> std::optional<double> {
    if (text.rfind(prefix, 0) != 0) return std::nullopt;
    try {
      return std::stod(text.substr(prefix.size()));
    } catch (const std::exception&) {
      throw ConfigError("prior: cannot parse parameter in '" + text + "'");
    }
  };
  if (auto v = parse_param("thermal:")) {
    if (!(*v >= 0) || *v >= 1) throw ConfigError("prior: thermal parameter must lie in [0, 1)");
    return {Kind::thermal, *v};
  }
  if (auto v = parse_param("poisson:")) {
    if (!(*v >= 0)) throw ConfigError("prior: poisson parameter must be nonnegative");
    return {Kind::poisson, *v};
  }
  throw ConfigError("prior: expected flat, thermal:<lambda_sq> or poisson:<alpha_sq>");
}

std::string PriorSpec::str() const {
  using Kind = infer::PriorDistribution::Kind;
  switch (kind) {
    case Kind::flat:
      return "flat";
    case Kind::thermal:
      return "thermal:" + io::format_double(parameter);
    case Kind::poisson:
      return "poisson:" + io::format_double(parameter);
    default:
      return "explicit";
  }
}

void PipelineConfig::validate() const {
  if (traces_path.empty()) throw ConfigError("pipeline: traces path missing");
  if (out_dir.empty()) throw ConfigError("pipeline: output directory missing");
  if (grid_points < 16) throw ConfigError("pipeline: grid_points must be >= 16");
  if (n_max < 1) throw ConfigError("pipeline: n_max must be >= 1");
  if (n_components < 1) throw ConfigError("pipeline: n_components must be >= 1");
  if (em_max_iterations < 1) throw ConfigError("pipeline: em_max_iterations must be >= 1");
  if (!(em_rel_tol > 0)) throw ConfigError("pipeline: em_rel_tol must be positive");
  if (calib_sigma < 0) throw ConfigError("pipeline: calib_sigma must be nonnegative");
  if (calib_quad < 1 || calib_quad % 2 == 0)
    throw ConfigError("pipeline: calib_quad must be odd and positive");
  if (kde_bandwidth < 0) throw ConfigError("pipeline: kde_bandwidth must be nonnegative");
  if (!(bandwidth_factor > 0)) throw ConfigError("pipeline: bandwidth_factor must be positive");
  if (threads < 1) throw ConfigError("pipeline: threads must be >= 1");
  for (const auto& stage : stages)
    if (std::find(kStageNames.begin(), kStageNames.end(), stage) == kStageNames.end())
      throw ConfigError("pipeline: unknown stage '" + stage + "'");
}

namespace {

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

sim::DetectorGroundTruth truth_from_json(const json& j, int samples_per_trace) {
  if (j.is_string()) {
    if (j.get<std::string>() != "default") throw ConfigError("truth: unknown preset");
    return sim::default_ground_truth(samples_per_trace);
  }
  const int n_peaks = j.value("n_peaks", 21);
  sim::DetectorGroundTruth truth = sim::default_ground_truth(samples_per_trace, n_peaks);
  truth.efficiency = j.value("efficiency", truth.efficiency);
  truth.noise_sigma = j.value("noise_sigma", truth.noise_sigma);
  truth.tail_linear = j.value("tail_linear", truth.tail_linear);
  truth.tail_quad = j.value("tail_quad", truth.tail_quad);
  const double spacing = j.value("peak_spacing", 1.0);
  const double width = j.value("peak_width", 0.15);
  for (int m = 0; m < n_peaks; ++m) {
    truth.peak_positions[static_cast<std::size_t>(m)] = m * spacing;
    truth.peak_widths[static_cast<std::size_t>(m)] = width;
  }
  if (j.contains("saturation")) {
    const auto& s = j.at("saturation");
    const std::string kind = s.value("kind", "identity");
    if (kind == "identity") {
      truth.saturation = {sim::Saturation::Kind::identity, 0.0};
    } else if (kind == "soft_clip") {
      truth.saturation = {sim::Saturation::Kind::soft_clip, s.value("level", 0.0)};
    } else {
      throw ConfigError("truth: unknown saturation kind");
    }
  }
  try {
    truth.validate();
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("truth: ") + e.what());
  }
  return truth;
}

json truth_to_json(const sim::DetectorGroundTruth& truth) {
  json j;
  j["efficiency"] = truth.efficiency;
  j["noise_sigma"] = truth.noise_sigma;
  j["tail_linear"] = truth.tail_linear;
  j["tail_quad"] = truth.tail_quad;
  j["peak_positions"] = truth.peak_positions;
  j["peak_widths"] = truth.peak_widths;
  j["saturation"] =
      json{{"kind", truth.saturation.kind == sim::Saturation::Kind::identity ? "identity"
                                                                             : "soft_clip"},
           {"level", truth.saturation.level}};
  return j;
}

}  // namespace

SimulateSpec simulate_spec_from_json(const std::string& json_text) {
  const json j = parse_json(json_text);
  SimulateSpec spec;
  try {
    spec.output = j.at("output").get<std::string>();
    const auto& s = j.at("sim");
    if (s.contains("probe_amplitudes")) {
      spec.config.probe_amplitudes = s.at("probe_amplitudes").get<std::vector<double>>();
    } else if (s.contains("probe_grid")) {
      const auto& g = s.at("probe_grid");
      const double lo = g.at("alpha_sq_min").get<double>();
      const double hi = g.at("alpha_sq_max").get<double>();
      const int count = g.at("count").get<int>();
      if (count < 1 || lo < 0 || hi < lo) throw ConfigError("sim: invalid probe grid");
      for (int k = 0; k < count; ++k) {
        const double alpha_sq = count == 1 ? lo : lo + (hi - lo) * k / (count - 1);
        spec.config.probe_amplitudes.push_back(std::sqrt(alpha_sq));
      }
    } else {
      throw ConfigError("sim: need probe_amplitudes or probe_grid");
    }
    spec.config.trials_per_probe = s.value("trials_per_probe", 1000);
    spec.config.samples_per_trace = s.value("samples_per_trace", 64);
    spec.config.rng_seed = s.value("rng_seed", static_cast<std::uint64_t>(1));
    spec.config.n_sim = s.value("n_sim", 20);
    const std::string format = j.value("format", "float64");
    if (format == "float64") {
      spec.format = io::SampleFormat::float64;
    } else if (format == "int16") {
      spec.format = io::SampleFormat::int16;
    } else {
      throw ConfigError("simulate: unknown sample format");
    }
    spec.truth = truth_from_json(j.value("truth", json("default")), spec.config.samples_per_trace);
    spec.config.validate();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("simulate config: ") + e.what());
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("simulate config: ") + e.what());
  }
  return spec;
}

PipelineConfig pipeline_config_from_json(const std::string& json_text) {
  const json j = parse_json(json_text);
  PipelineConfig cfg;
  try {
    cfg.traces_path = j.value("traces", "");
    cfg.out_dir = j.value("out", "");
    cfg.n_components = j.value("n_components", cfg.n_components);
    cfg.grid_points = j.value("grid_points", cfg.grid_points);
    cfg.n_max = j.value("n_max", cfg.n_max);
    cfg.kde_bandwidth = j.value("kde_bandwidth", cfg.kde_bandwidth);
    cfg.bandwidth_factor = j.value("bandwidth_factor", cfg.bandwidth_factor);
    cfg.em_max_iterations = j.value("em_max_iterations", cfg.em_max_iterations);
    cfg.em_rel_tol = j.value("em_rel_tol", cfg.em_rel_tol);
    cfg.calib_sigma = j.value("calib_sigma", cfg.calib_sigma);
    cfg.calib_quad = j.value("calib_quad", cfg.calib_quad);
    cfg.calib_exact = j.value("calib_exact", cfg.calib_exact);
    cfg.prior = PriorSpec::parse(j.value("prior", "flat"));
    cfg.threads = j.value("threads", cfg.threads);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("stages")) cfg.stages = j.at("stages").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  return cfg;
}

void run_simulate(const SimulateSpec& spec) {
  TraceSet traces;
  try {
    traces = sim::simulate_probe_ensemble(spec.config, spec.truth);
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("simulate: ") + e.what());
  }
  std::vector<double> alpha_sq;
  alpha_sq.reserve(spec.config.probe_amplitudes.size());
  for (double a : spec.config.probe_amplitudes) alpha_sq.push_back(a * a);

  const fs::path target(spec.output);
  const fs::path tmp = target.string() + ".tmp";
  try {
    io::write_trace_file(tmp, traces, alpha_sq, spec.format);
    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }

  json meta;
  meta["probe_amplitudes"] = spec.config.probe_amplitudes;
  meta["probe_alpha_sq"] = alpha_sq;
  meta["trials_per_probe"] = spec.config.trials_per_probe;
  meta["samples_per_trace"] = spec.config.samples_per_trace;
  meta["rng_seed"] = spec.config.rng_seed;
  meta["n_sim"] = spec.config.n_sim;
  meta["truth"] = truth_to_json(spec.truth);
  std::ofstream out(target.string() + ".meta.json", std::ios::trunc);
  if (!out) throw IoError("cannot write sidecar metadata");
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("cannot write sidecar metadata");
}

namespace {

// In-memory view of the pipeline artifacts; anything a selected stage needs
// that an earlier (skipped) stage would have produced is loaded back from the
// archive instead.
struct PipelineState {
  const PipelineConfig& cfg;
  fs::path out;
  json manifest;

  std::optional<io::TraceFile> traces;
  std::optional<pca::PrincipalBasis> basis;
  std::optional<pca::ScoreSet> scores;
  std::vector<double> probe_alpha_sq;
  std::optional<tomo::ProbeEnsemble> ensemble;
  std::optional<povm::GaussianMixturePovm> model;
  std::optional<povm::PovmTable> marginalized;
  double shared_bandwidth = 0.0;

  explicit PipelineState(const PipelineConfig& config) : cfg(config), out(config.out_dir) {}

  void record_input(const fs::path& path) {
    manifest["inputs"][path.string()] = hash_file(path);
  }
  void record_output(const fs::path& path) {
    manifest["outputs"][fs::relative(path, out).string()] = hash_file(path);
  }

  io::TraceFile& get_traces() {
    if (!traces) {
      try {
        traces = io::read_trace_file(cfg.traces_path);
      } catch (const IoError& e) {
        throw IoError(std::string("loading traces: ") + e.what());
      }
      record_input(cfg.traces_path);
      probe_alpha_sq.clear();
      for (const auto& p : traces->probes) probe_alpha_sq.push_back(p.alpha_sq);
    }
    return *traces;
  }

  // Per-probe first-component scores plus probe energies, reloading
  // scores.csv when the pca stage was skipped in this run.
  std::vector<Eigen::VectorXd> get_probe_scores() {
    if (!scores) {
      const Eigen::MatrixXd m = io::read_matrix_csv(out / "scores.csv");
      if (m.cols() < 3) throw IoError("scores.csv malformed");
      scores.emplace();
      scores->scores = m.rightCols(m.cols() - 2);
      scores->probe_labels.resize(static_cast<std::size_t>(m.rows()));
      int max_label = 0;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const int label = static_cast<int>(m(i, 0));
        scores->probe_labels[static_cast<std::size_t>(i)] = label;
        max_label = std::max(max_label, label);
      }
      probe_alpha_sq.assign(static_cast<std::size_t>(max_label) + 1, 0.0);
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        probe_alpha_sq[static_cast<std::size_t>(static_cast<int>(m(i, 0)))] = m(i, 1);
    }
    std::vector<Eigen::VectorXd> per_probe;
    per_probe.reserve(probe_alpha_sq.size());
    for (std::size_t k = 0; k < probe_alpha_sq.size(); ++k)
      per_probe.push_back(scores->probe_column(static_cast<int>(k), 0));
    return per_probe;
  }

  tomo::ProbeEnsemble& get_ensemble() {
    if (!ensemble) {
      const OutcomeGrid grid = [&] {
        std::ifstream in(out / "grid.json");
        if (!in) throw IoError("grid.json missing; run the density stage first");
        json j;
        in >> j;
        return io::grid_from_json(j);
      }();
      const Eigen::MatrixXd m = io::read_matrix_csv(out / "densities.csv");
      if (m.cols() != grid.n_points + 1) throw IoError("densities.csv does not match grid.json");
      ensemble.emplace();
      ensemble->grid = grid;
      for (Eigen::Index k = 0; k < m.rows(); ++k) {
        tomo::ProbeEnsemble::Probe probe;
        probe.alpha_sq = m(k, 0);
        probe.density.grid = grid;
        probe.density.values = m.row(k).tail(grid.n_points).transpose();
        probe.density.sample_count = 0;
        ensemble->probes.push_back(std::move(probe));
      }
      ensemble->finalize();
    }
    return *ensemble;
  }

  povm::GaussianMixturePovm& get_model() {
    if (!model) model = io::load_model(out / "model.json");
    return *model;
  }

  povm::PovmTable& get_marginalized() {
    if (!marginalized) marginalized = io::load_table(out / "marginalized.csv");
    return *marginalized;
  }
};

void stage_pca(PipelineState& state) {
  const io::TraceFile& file = state.get_traces();
  state.basis = pca::fit_basis(file.traces, state.cfg.n_components);
  state.scores = pca::project(file.traces, *state.basis);

  io::save_basis(state.out / "basis.bin", *state.basis);
  state.record_output(state.out / "basis.bin");

  const Eigen::Index rows = state.scores->scores.rows();
  Eigen::MatrixXd table(rows, 2 + state.scores->scores.cols());
  for (Eigen::Index i = 0; i < rows; ++i) {
    const int label = state.scores->probe_labels[static_cast<std::size_t>(i)];
    table(i, 0) = label;
    table(i, 1) = state.probe_alpha_sq[static_cast<std::size_t>(label)];
  }
  table.rightCols(state.scores->scores.cols()) = state.scores->scores;
  std::string header = "probe_index,alpha_sq";
  for (Eigen::Index j = 0; j < state.scores->scores.cols(); ++j)
    header += ",s" + std::to_string(j);
  io::write_matrix_csv(state.out / "scores.csv", header, table);
  state.record_output(state.out / "scores.csv");
}

void stage_density(PipelineState& state) {
  const std::vector<Eigen::VectorXd> per_probe = state.get_probe_scores();
  const OutcomeGrid grid = OutcomeGrid::covering(per_probe, state.cfg.grid_points);

  // Shared bandwidth across probes: the narrowest per-probe Silverman
  // estimate tracks the single-peak structure; the factor trades pointwise
  // variance for a small, bounded width bias.
  double bandwidth = state.cfg.kde_bandwidth;
  Eigen::VectorXd silverman(per_probe.size());
  for (std::size_t k = 0; k < per_probe.size(); ++k)
    silverman[static_cast<Eigen::Index>(k)] = kde::silverman_bandwidth(per_probe[k]);
  if (bandwidth <= 0) {
    double narrowest = 0.0;
    for (double h : silverman)
      if (h > 0 && (narrowest == 0.0 || h < narrowest)) narrowest = h;
    bandwidth = std::max(state.cfg.bandwidth_factor * narrowest, grid.spacing());
  }
  state.shared_bandwidth = bandwidth;

  state.ensemble.emplace();
  state.ensemble->grid = grid;
  Eigen::MatrixXd table(per_probe.size(), grid.n_points + 1);
  for (std::size_t k = 0; k < per_probe.size(); ++k) {
    tomo::ProbeEnsemble::Probe probe;
    probe.alpha_sq = state.probe_alpha_sq[k];
    probe.density = kde::estimate_density(per_probe[k], grid, bandwidth);
    table(static_cast<Eigen::Index>(k), 0) = probe.alpha_sq;
    table.row(static_cast<Eigen::Index>(k)).tail(grid.n_points) = probe.density.values.transpose();
    state.ensemble->probes.push_back(std::move(probe));
  }
  state.ensemble->finalize();

  {
    std::ofstream out(state.out / "grid.json", std::ios::trunc);
    if (!out) throw IoError("cannot write grid.json");
    out << io::grid_to_json(grid).dump(2) << '\n';
  }
  state.record_output(state.out / "grid.json");
  io::write_matrix_csv(state.out / "densities.csv", "alpha_sq,density_values", table);
  state.record_output(state.out / "densities.csv");
  {
    json meta;
    meta["bandwidth"] = bandwidth;
    json per;
    for (Eigen::Index k = 0; k < silverman.size(); ++k) per.push_back(silverman[k]);
    meta["per_probe_silverman"] = per;
    std::ofstream out(state.out / "density_meta.json", std::ios::trunc);
    if (!out) throw IoError("cannot write density_meta.json");
    out << meta.dump(2) << '\n';
  }
  state.record_output(state.out / "density_meta.json");
}

void stage_em(PipelineState& state) {
  tomo::EmConfig config;
  config.n_max = state.cfg.n_max;
  config.max_iterations = state.cfg.em_max_iterations;
  config.rel_tol = state.cfg.em_rel_tol;
  const tomo::EmResult result = tomo::em_fit(state.get_ensemble(), config);
  state.model = result.model;

  io::save_model(state.out / "model.json", result.model);
  state.record_output(state.out / "model.json");

  json diag;
  diag["iterations"] = result.diagnostics.iterations;
  diag["converged"] = result.diagnostics.converged;
  diag["final_log_likelihood"] = result.diagnostics.final_log_likelihood();
  diag["sigma_clamps"] = result.diagnostics.sigma_clamps;
  diag["dead_components"] = result.diagnostics.dead_components;
  diag["flags"] = result.diagnostics.flags;
  diag["log_likelihood"] = result.diagnostics.log_likelihood;
  diag["reconstruction_error"] = tomo::reconstruction_error(state.get_ensemble(), result.model);
  std::ofstream out(state.out / "em_diagnostics.json", std::ios::trunc);
  if (!out) throw IoError("cannot write em_diagnostics.json");
  out << diag.dump(2) << '\n';
  state.record_output(state.out / "em_diagnostics.json");
}

void stage_marginalize(PipelineState& state) {
  const povm::GaussianMixturePovm& model = state.get_model();
  const OutcomeGrid grid = state.get_ensemble().grid;
  calib::MarginalizeDiagnostics diag;
  state.marginalized = calib::marginalize_povm(model, {1.0, state.cfg.calib_sigma}, grid,
                                               state.cfg.calib_quad, &diag);
  io::save_table(state.out / "marginalized.csv", *state.marginalized);
  state.record_output(state.out / "marginalized.csv");

  json j;
  j["calib_sigma"] = state.cfg.calib_sigma;
  j["n_quad"] = state.cfg.calib_quad;
  j["clamped_negative_mass"] = diag.clamped_negative_mass;
  j["rows_rescaled"] = diag.rows_rescaled;
  j["max_row_excess"] = diag.max_row_excess;
  if (state.cfg.calib_exact) {
    tomo::EmConfig config;
    config.n_max = model.n_max;
    config.max_iterations = state.cfg.em_max_iterations;
    config.rel_tol = state.cfg.em_rel_tol;
    const povm::PovmTable refit = calib::marginalize_povm_refit(
        model, state.get_ensemble(), {1.0, state.cfg.calib_sigma}, grid, state.cfg.calib_quad,
        config);
    Eigen::VectorXd l1(model.n_max + 1);
    for (int n = 0; n <= model.n_max; ++n)
      l1[n] = trapezoid((refit.theta.row(n) - state.marginalized->theta.row(n)).cwiseAbs(),
                        grid.spacing());
    json rows;
    for (int n = 0; n <= model.n_max; ++n) rows.push_back(l1[n]);
    j["refit_l1_row_difference"] = rows;
  }
  std::ofstream out(state.out / "marginalize_diagnostics.json", std::ios::trunc);
  if (!out) throw IoError("cannot write marginalize_diagnostics.json");
  out << j.dump(2) << '\n';
  state.record_output(state.out / "marginalize_diagnostics.json");
}

void stage_efficiency(PipelineState& state) {
  const infer::EfficiencyEstimate est = infer::estimate_efficiency(state.get_model());
  json j;
  j["eta"] = est.eta;
  j["eta_low"] = est.eta_low;
  j["eta_high"] = est.eta_high;
  std::ofstream out(state.out / "efficiency.json", std::ios::trunc);
  if (!out) throw IoError("cannot write efficiency.json");
  out << j.dump(2) << '\n';
  state.record_output(state.out / "efficiency.json");

  Eigen::MatrixXd curve(est.curve_eta.size(), 2);
  curve.col(0) = est.curve_eta;
  curve.col(1) = est.curve_objective;
  io::write_matrix_csv(state.out / "efficiency_curve.csv", "eta,l2_objective", curve);
  state.record_output(state.out / "efficiency_curve.csv");
}

void stage_confidence(PipelineState& state) {
  const povm::PovmTable& table = state.get_marginalized();
  using Kind = infer::PriorDistribution::Kind;
  infer::PriorDistribution prior = infer::PriorDistribution::flat(table.n_max);
  if (state.cfg.prior.kind == Kind::thermal)
    prior = infer::PriorDistribution::thermal(state.cfg.prior.parameter, table.n_max);
  else if (state.cfg.prior.kind == Kind::poisson)
    prior = infer::PriorDistribution::poisson(state.cfg.prior.parameter, table.n_max);

  const infer::ConfidenceReport report = infer::confidence(table, prior);
  const Eigen::VectorXd peak_limit =
      infer::peak_confidence(table, prior, state.get_model().peak_means);

  Eigen::MatrixXd rows(table.n_max + 1, 3);
  for (int n = 0; n <= table.n_max; ++n) {
    rows(n, 0) = n;
    rows(n, 1) = report.c_values[n];
    rows(n, 2) = peak_limit[n];
  }
  io::write_matrix_csv(state.out / "confidence.csv", "n,confidence,peak_center_limit", rows);
  state.record_output(state.out / "confidence.csv");

  Eigen::VectorXd lambdas(18);
  for (int i = 0; i < 18; ++i) lambdas[i] = 0.05 * (i + 1);
  const Eigen::MatrixXd sweep = infer::confidence_vs_thermal_parameter(table, lambdas);
  Eigen::MatrixXd sweep_rows(lambdas.size(), table.n_max + 2);
  sweep_rows.col(0) = lambdas;
  sweep_rows.rightCols(table.n_max + 1) = sweep;
  std::string header = "lambda_sq";
  for (int n = 0; n <= table.n_max; ++n) header += ",C" + std::to_string(n);
  io::write_matrix_csv(state.out / "confidence_vs_lambda.csv", header, sweep_rows);
  state.record_output(state.out / "confidence_vs_lambda.csv");
}

}  // namespace

void run_pipeline(const PipelineConfig& config) {
  config.validate();

  const fs::path out(config.out_dir);
  if (fs::exists(out / "manifest.json") && !config.force)
    throw IdempotenceRefusal("results archive already exists at " + out.string() +
                             " (use --force to overwrite)");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory: " + out.string());

  PipelineState state(config);
  state.manifest["tool_version"] = kToolVersion;
  state.manifest["config"] = json::parse(R"({})");
  {
    json cfg;
    cfg["traces"] = config.traces_path;
    cfg["out"] = config.out_dir;
    cfg["n_components"] = config.n_components;
    cfg["grid_points"] = config.grid_points;
    cfg["n_max"] = config.n_max;
    cfg["kde_bandwidth"] = config.kde_bandwidth;
    cfg["bandwidth_factor"] = config.bandwidth_factor;
    cfg["em_max_iterations"] = config.em_max_iterations;
    cfg["em_rel_tol"] = config.em_rel_tol;
    cfg["calib_sigma"] = config.calib_sigma;
    cfg["calib_quad"] = config.calib_quad;
    cfg["calib_exact"] = config.calib_exact;
    cfg["prior"] = config.prior.str();
    cfg["seed"] = config.seed;
    cfg["threads"] = config.threads;
    cfg["stages"] = config.stages.empty() ? kStageNames : config.stages;
    state.manifest["config"] = cfg;
    state.manifest["config_hash"] = hash_string(cfg.dump());
  }
  state.manifest["stages"] = json::array();

  const auto selected = config.stages.empty() ? kStageNames : config.stages;
  auto is_selected = [&](const std::string& name) {
    return std::find(selected.begin(), selected.end(), name) != selected.end();
  };

  auto write_manifest = [&] {
    std::ofstream mf(out / "manifest.json", std::ios::trunc);
    if (!mf) throw IoError("cannot write manifest.json");
    mf << state.manifest.dump(2) << '\n';
  };

  struct Stage {
    const char* name;
    void (*run)(PipelineState&);
  };
  const Stage stages[] = {{"pca", stage_pca},
                          {"density", stage_density},
                          {"em", stage_em},
                          {"marginalize", stage_marginalize},
                          {"efficiency", stage_efficiency},
                          {"confidence", stage_confidence}};

  for (const auto& stage : stages) {
    if (!is_selected(stage.name)) {
      state.manifest["stages"].push_back(json{{"name", stage.name}, {"status", "skipped"}});
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    try {
      stage.run(state);
    } catch (const std::exception& e) {
      state.manifest["stages"].push_back(
          json{{"name", stage.name}, {"status", "FAILED"}, {"error", e.what()}});
      write_manifest();
      throw StageFailure(stage.name, e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    state.manifest["stages"].push_back(
        json{{"name", stage.name}, {"status", "ok"}, {"seconds", seconds}});
  }
  write_manifest();
}

}  // namespace pnr::cli
