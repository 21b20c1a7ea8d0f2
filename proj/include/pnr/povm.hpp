#pragma once

#include <Eigen/Core>

#include "pnr/grid.hpp"
#include "pnr/kde.hpp"

namespace pnr::povm {

//! Grid-discretized POVM coefficients for a phase-insensitive detector:
//! row n holds the outcome density theta_n(s) for an n-photon input.
struct PovmTable {
  OutcomeGrid grid;
  Eigen::MatrixXd theta;  // (n_max + 1) x grid.n_points
  int n_max = 0;

  Eigen::VectorXd row_integrals() const;
  //! Throws unless theta >= 0 and every row integral is <= 1 + 1e-9.
  void validate() const;
};

//! Gaussian-mixture parameterization of the POVM: the response to n photons
//! is a sum of n + 1 Gaussians whose means are shared across photon numbers.
//! `weights` and `widths` are lower-triangular: entry (n, j) is defined for
//! j <= n only; weight rows sum to 1.
struct GaussianMixturePovm {
  int n_max = 0;
  Eigen::VectorXd peak_means;  // size n_max + 1, strictly increasing
  Eigen::MatrixXd weights;     // beta(n, j)
  Eigen::MatrixXd widths;      // sigma(n, j) > 0

  void validate() const;
};

struct CoherentProbe {
  double alpha_sq = 0.0;  // mean photon number |alpha|^2
};

//! Phase-insensitive (diagonal) state: weights[n] = p(n), summing to 1.
struct DiagonalState {
  Eigen::VectorXd weights;

  void validate() const;
};

//! Poisson coefficient F(alpha_sq, n) = alpha_sq^n exp(-alpha_sq) / n!,
//! evaluated in log space so it stays finite up to n of a few hundred.
double poisson_coeff(double alpha_sq, int n);

//! Evaluates the mixture on a grid. The grid must cover every peak mean
//! +/- 6 widths; rows whose trapezoidal integral exceeds 1 through
//! discretization are scaled back onto the physical range.
PovmTable mixture_to_table(const GaussianMixturePovm& model, const OutcomeGrid& grid);

//! Outcome density for a coherent probe: p(s|alpha) = sum_n F(alpha,n) theta_n(s).
//! The returned estimate records the represented Poisson mass; a value below
//! 0.999 marks a photon-number truncation warning.
kde::DensityEstimate probe_density(const PovmTable& table, CoherentProbe probe);
kde::DensityEstimate probe_density(const GaussianMixturePovm& model, CoherentProbe probe,
                                   const OutcomeGrid& grid);

//! Born-rule outcome density p(s|rho) = sum_n p(n) theta_n(s).
kde::DensityEstimate born_probability(const PovmTable& table, const DiagonalState& state);

}  // namespace pnr::povm
