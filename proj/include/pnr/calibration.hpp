#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "pnr/povm.hpp"

namespace pnr::calib {

//! One paired power reading with absolute 1-sigma errors on both meters.
struct PowerPair {
  double x = 0.0;
  double x_error = 0.0;
  double y = 0.0;
  double y_error = 0.0;
};

using PowerPairSeries = std::vector<PowerPair>;

struct RatioEstimate {
  double ratio = 1.0;
  double sigma = 0.0;

  double relative_sigma() const { return sigma / ratio; }
};

struct ValueWithError {
  double value = 0.0;
  double sigma = 0.0;
};

//! Calibrated attenuation of the full chain, including the unterminated-fibre
//! reflection correction.
struct AttenuationFit {
  double eta_att = 1.0;
  double sigma_eta = 0.0;
  ValueWithError fresnel_correction{0.033, 0.01};
};

//! Weighted total-least-squares fit of y = r x with Gaussian errors in both
//! coordinates and zero intercept. Returns the maximum-likelihood ratio and
//! its standard error from the profile curvature.
RatioEstimate fit_attenuation(const PowerPairSeries& series);

//! Serial composition of attenuation stages: ratios multiply and relative
//! errors add linearly (stage errors are correlated, not independent).
RatioEstimate chain_attenuations(const std::vector<RatioEstimate>& fits);

//! Multiplies the chain by (1 - c) for a reflection loss c, adding its
//! relative error under the same linear policy.
RatioEstimate apply_fresnel(const RatioEstimate& chain, const ValueWithError& correction);

//! Gaussian prior on the relative probe-energy scale (1.0 = the calibration
//! used during tomography).
struct EtaPrior {
  double mean = 1.0;
  double sigma = 0.0;
};

struct MarginalizeDiagnostics {
  double clamped_negative_mass = 0.0;
  int rows_rescaled = 0;
  double max_row_excess = 0.0;
};

//! Binomial row-mixing matrix M(c) mapping a POVM fitted at energy scale 1 to
//! the POVM at scale c: theta'_n = sum_{m<=n} C(n,m) (1-1/c)^(n-m) (1/c)^m theta_m.
//! For c < 1 the coefficients are signed; physicality is restored after
//! averaging.
Eigen::MatrixXd energy_scale_mixing(int n_max, double scale);

//! Marginalizes the POVM over the calibration uncertainty with Gauss-Hermite
//! quadrature (n_quad odd). sigma = 0 returns mixture_to_table exactly. The
//! default fast path mixes rows of the fixed model per node; negative
//! excursions from signed mixing are clamped and row integrals capped at 1,
//! with the adjustments reported in `diag`.
povm::PovmTable marginalize_povm(const povm::GaussianMixturePovm& model, EtaPrior prior,
                                 const OutcomeGrid& grid, int n_quad = 7,
                                 MarginalizeDiagnostics* diag = nullptr);

//! Gauss-Hermite nodes and weights for integrals against exp(-x^2).
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n);

}  // namespace pnr::calib

namespace pnr::tomo {
struct ProbeEnsemble;
struct EmConfig;
}

namespace pnr::calib {

//! Exact marginalization path: refits the model per quadrature node with the
//! probe energies rescaled by the node's relative scale, then averages the
//! node tables. Much slower than the fast path; intended for validating it.
povm::PovmTable marginalize_povm_refit(const povm::GaussianMixturePovm& model,
                                       const tomo::ProbeEnsemble& data, EtaPrior prior,
                                       const OutcomeGrid& grid, int n_quad,
                                       const tomo::EmConfig& config,
                                       MarginalizeDiagnostics* diag = nullptr);

}  // namespace pnr::calib
