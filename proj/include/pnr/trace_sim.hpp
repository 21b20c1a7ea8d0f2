#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

#include "pnr/trace_set.hpp"

namespace pnr::sim {

//! Monotone nonlinearity applied to the pulse amplitude. The default is the
//! identity (linear small-signal regime); soft_clip saturates smoothly at
//! `level` for saturation studies.
struct Saturation {
  enum class Kind { identity, soft_clip };

  Kind kind = Kind::identity;
  double level = 0.0;

  double operator()(double amplitude) const;
};

//! Ground-truth detector model for the synthetic trace generator.
//!
//! A trial with n_input photons detects m ~ Binomial(n_input, efficiency)
//! of them; the trace is
//!   saturation(a) * pulse_shape + (tail_linear m + tail_quad m^2) * tail_shape
//! plus white Gaussian sample noise, with the amplitude a drawn from a
//! Gaussian centered on peak_positions[m] with width peak_widths[m]. The
//! quadratic tail coupling models the recovery-time growth of the pulse with
//! photon number and is what makes the second principal component genuine.
struct DetectorGroundTruth {
  double efficiency = 0.9;
  std::vector<double> peak_positions;  // strictly increasing per detected count
  std::vector<double> peak_widths;     // >= 0; zero gives deterministic amplitudes
  Eigen::VectorXd pulse_shape;         // unit L2 norm
  Eigen::VectorXd tail_shape;          // unit L2 norm, same length
  double noise_sigma = 0.0;
  Saturation saturation;
  double tail_linear = 0.2;
  double tail_quad = 0.003;

  int max_count() const { return static_cast<int>(peak_positions.size()) - 1; }
  void validate() const;
};

struct SimConfig {
  std::vector<double> probe_amplitudes;  // |alpha_k|; mean photon number is the square
  int trials_per_probe = 1000;
  int samples_per_trace = 64;
  std::uint64_t rng_seed = 1;
  int n_sim = 20;  // photon-count truncation of the Poisson draws

  void validate() const;
};

//! Default phenomenological detector: fast-rise exponential-decay pulse,
//! slower tail mode orthogonalized against it, unit peak spacing.
DetectorGroundTruth default_ground_truth(int samples_per_trace, int n_peaks = 21);

//! One synthetic trace for a trial with `n_input` photons at the input.
//! Throws TruncationOverflow when n_input exceeds the peak table.
Eigen::VectorXd simulate_trace(int n_input, const DetectorGroundTruth& truth,
                               std::mt19937_64& rng);

//! Full probe ensemble: per probe k, trials with photon numbers drawn
//! Poisson with mean |alpha_k|^2, truncated at config.n_sim. Deterministic
//! given the seed; rows are ordered by (probe, trial) and each trial owns an
//! independent substream, so the output is independent of scheduling.
TraceSet simulate_probe_ensemble(const SimConfig& config, const DetectorGroundTruth& truth);

}  // namespace pnr::sim
