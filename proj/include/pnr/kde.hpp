#pragma once

#include <Eigen/Core>
#include <optional>

#include "pnr/grid.hpp"

namespace pnr::kde {

//! A probability density sampled on an OutcomeGrid.
//!
//! Estimates produced by estimate_density are renormalized so the trapezoidal
//! integral is exactly 1. Model-predicted densities (povm::probe_density)
//! reuse this type; there `model_mass` records the represented Poisson mass,
//! which can fall below 1 when the photon-number truncation bites.
struct DensityEstimate {
  OutcomeGrid grid;
  Eigen::VectorXd values;
  double bandwidth = 0.0;
  Eigen::Index sample_count = 0;
  double model_mass = 1.0;

  bool truncation_warning() const { return model_mass < 0.999; }
  double integral() const { return trapezoid(values, grid.spacing()); }
  //! Throws unless values are nonnegative and integrate to 1 within 1e-6.
  void validate() const;
};

//! Silverman's rule of thumb 0.9 min(sigma, IQR/1.34) N^(-1/5).
//! Returns 0 for degenerate samples (fewer than two distinct values); callers
//! fall back to a floor bandwidth, typically the grid spacing.
double silverman_bandwidth(const Eigen::VectorXd& samples);

//! Gaussian-kernel density estimate on `grid`, renormalized to unit
//! trapezoidal integral. If `bandwidth` is absent it is selected by
//! silverman_bandwidth with the grid spacing as floor. Kernels are evaluated
//! within 8.5 bandwidths of each sample; the neglected tail mass is below
//! 1e-16 per sample.
DensityEstimate estimate_density(const Eigen::VectorXd& samples, const OutcomeGrid& grid,
                                 std::optional<double> bandwidth = std::nullopt);

}  // namespace pnr::kde
