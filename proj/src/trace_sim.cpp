#include "pnr/trace_sim.hpp"

#include <cmath>

#include "pnr/errors.hpp"
#include "pnr/mathutil.hpp"

namespace pnr::sim {

double Saturation::operator()(double amplitude) const {
  switch (kind) {
    case Kind::identity:
      return amplitude;
    case Kind::soft_clip:
      return level > 0 ? level * std::tanh(amplitude / level) : amplitude;
  }
  return amplitude;
}

void DetectorGroundTruth::validate() const {
  if (!(efficiency >= 0.0 && efficiency <= 1.0))
    throw DimensionError("DetectorGroundTruth: efficiency outside [0, 1]");
  if (peak_positions.empty() || peak_positions.size() != peak_widths.size())
    throw DimensionError("DetectorGroundTruth: peak table malformed");
  for (std::size_t m = 0; m < peak_positions.size(); ++m) {
    if (peak_widths[m] < 0) throw DimensionError("DetectorGroundTruth: negative peak width");
    if (m > 0 && !(peak_positions[m] > peak_positions[m - 1]))
      throw DimensionError("DetectorGroundTruth: peak positions must increase strictly");
  }
  if (pulse_shape.size() < 2 || pulse_shape.size() != tail_shape.size())
    throw DimensionError("DetectorGroundTruth: pulse/tail shapes must share a length >= 2");
  if (std::abs(pulse_shape.norm() - 1.0) > 1e-9 || std::abs(tail_shape.norm() - 1.0) > 1e-9)
    throw DimensionError("DetectorGroundTruth: shapes must have unit L2 norm");
  if (noise_sigma < 0) throw DimensionError("DetectorGroundTruth: negative noise sigma");
}

void SimConfig::validate() const {
  if (probe_amplitudes.empty()) throw DimensionError("SimConfig: no probes");
  for (double a : probe_amplitudes)
    if (!(a >= 0) || !std::isfinite(a))
      throw DimensionError("SimConfig: probe amplitudes must be finite and nonnegative");
  if (trials_per_probe < 1) throw DimensionError("SimConfig: trials_per_probe must be >= 1");
  if (samples_per_trace < 2) throw DimensionError("SimConfig: samples_per_trace must be >= 2");
  if (n_sim < 0) throw DimensionError("SimConfig: negative n_sim");
}

DetectorGroundTruth default_ground_truth(int samples_per_trace, int n_peaks) {
  if (samples_per_trace < 2) throw DimensionError("default_ground_truth: too few samples");
  if (n_peaks < 1) throw DimensionError("default_ground_truth: need at least one peak");

  DetectorGroundTruth truth;
  const double s = static_cast<double>(samples_per_trace);
  const double tau_rise = 0.05 * s;
  const double tau_decay = 0.20 * s;
  const double tau_tail = 0.35 * s;

  truth.pulse_shape.resize(samples_per_trace);
  truth.tail_shape.resize(samples_per_trace);
  for (int t = 0; t < samples_per_trace; ++t) {
    truth.pulse_shape[t] = (1.0 - std::exp(-t / tau_rise)) * std::exp(-t / tau_decay);
    truth.tail_shape[t] = t * std::exp(-t / tau_tail);
  }
  truth.pulse_shape.normalize();
  // Tail mode orthogonal to the pulse so the two trace components separate
  // cleanly under PCA.
  truth.tail_shape -= truth.tail_shape.dot(truth.pulse_shape) * truth.pulse_shape;
  truth.tail_shape.normalize();

  truth.peak_positions.resize(n_peaks);
  truth.peak_widths.assign(n_peaks, 0.15);
  for (int m = 0; m < n_peaks; ++m) truth.peak_positions[m] = static_cast<double>(m);
  truth.noise_sigma = 0.03;
  truth.efficiency = 0.9;
  return truth;
}

Eigen::VectorXd simulate_trace(int n_input, const DetectorGroundTruth& truth,
                               std::mt19937_64& rng) {
  if (n_input < 0) throw DimensionError("simulate_trace: negative photon number");
  if (n_input > truth.max_count())
    throw TruncationOverflow("simulate_trace: photon number exceeds the peak table");

  int detected = 0;
  if (n_input > 0) {
    std::binomial_distribution<int> loss(n_input, truth.efficiency);
    detected = loss(rng);
  }

  std::normal_distribution<double> unit;
  const auto m = static_cast<std::size_t>(detected);
  const double amplitude = truth.peak_positions[m] + truth.peak_widths[m] * unit(rng);
  const double tail_weight =
      truth.tail_linear * detected + truth.tail_quad * detected * detected;

  Eigen::VectorXd trace =
      truth.saturation(amplitude) * truth.pulse_shape + tail_weight * truth.tail_shape;
  if (truth.noise_sigma > 0)
    for (Eigen::Index t = 0; t < trace.size(); ++t) trace[t] += truth.noise_sigma * unit(rng);
  return trace;
}

TraceSet simulate_probe_ensemble(const SimConfig& config, const DetectorGroundTruth& truth) {
  config.validate();
  truth.validate();
  if (truth.pulse_shape.size() != config.samples_per_trace)
    throw DimensionError("simulate_probe_ensemble: shape length does not match samples_per_trace");

  const auto probes = static_cast<Eigen::Index>(config.probe_amplitudes.size());
  const Eigen::Index trials = config.trials_per_probe;

  TraceSet out;
  out.data.resize(probes * trials, config.samples_per_trace);
  out.probe_labels.resize(static_cast<std::size_t>(probes * trials));

  for (Eigen::Index k = 0; k < probes; ++k) {
    const double mean_photons = config.probe_amplitudes[k] * config.probe_amplitudes[k];
    for (Eigen::Index t = 0; t < trials; ++t) {
      auto rng = make_trial_rng(config.rng_seed, static_cast<std::uint64_t>(k),
                                static_cast<std::uint64_t>(t));
      int n_input = 0;
      if (mean_photons > 0) {
        std::poisson_distribution<int> photons(mean_photons);
        n_input = std::min(photons(rng), config.n_sim);  // simulator truncation
      }
      const Eigen::Index row = k * trials + t;
      out.data.row(row) = simulate_trace(n_input, truth, rng).transpose();
      out.probe_labels[static_cast<std::size_t>(row)] = static_cast<int>(k);
    }
  }
  return out;
}

}  // namespace pnr::sim
