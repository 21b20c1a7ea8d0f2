#pragma once

#include <Eigen/Core>
#include <optional>

#include "pnr/povm.hpp"

namespace pnr::infer {

//! Photon-number prior over a finite support 0..N.
struct PriorDistribution {
  enum class Kind { flat, thermal, poisson, explicit_weights };

  Kind kind = Kind::flat;
  double parameter = 0.0;    // lambda^2 for thermal, |alpha|^2 for poisson
  Eigen::VectorXd weights;   // normalized over the support

  int support() const { return static_cast<int>(weights.size()) - 1; }

  static PriorDistribution flat(int n_support);
  //! p(n) proportional to lambda_sq^n, renormalized over the support.
  static PriorDistribution thermal(double lambda_sq, int n_support);
  //! Poisson pmf at mean alpha_sq, renormalized over the support.
  static PriorDistribution poisson(double alpha_sq, int n_support);
  static PriorDistribution explicit_weights(const Eigen::VectorXd& w);
};

//! Bayes posterior p(n|s) per grid point. Columns where the evidence
//! p(s) falls below 1e-300 are undefined and stored as NaN.
struct PosteriorTable {
  OutcomeGrid grid;
  Eigen::MatrixXd values;  // (support + 1) x n_points
  PriorDistribution prior;
};

//! Post-selection acceptance region: symmetric windows of a common
//! half-width around each peak center.
struct Window {
  Eigen::VectorXd centers;
  double half_width = 0.0;

  bool accepts(double s) const;
};

struct ConfidenceReport {
  PriorDistribution prior;
  Eigen::VectorXd c_values;
  std::optional<Window> window;
  Eigen::VectorXd acceptance_fraction;  // per n; empty without a window
};

struct EfficiencyEstimate {
  double eta = 1.0;
  double eta_low = 1.0;    // interval where the objective stays within
  double eta_high = 1.0;   // twice its minimum, clipped to [0, 1]
  Eigen::VectorXd curve_eta;
  Eigen::VectorXd curve_objective;
};

//! System detection efficiency from the fitted mixture weights: finds the
//! eta whose binomial weight pattern C(n,j) eta^j (1-eta)^(n-j) is closest in
//! L2 to the fitted beta, by golden-section search to 1e-6.
EfficiencyEstimate estimate_efficiency(const povm::GaussianMixturePovm& model);

PosteriorTable posterior(const povm::PovmTable& table, const PriorDistribution& prior);

//! Prior-weighted confidence C_n = int p(s|n)^2 p(n) / sum_k p(s|k) p(k) ds.
//! With a window the integral is restricted to the accepted region and the
//! p(s|n) weighting renormalized by the acceptance fraction, so the
//! full-line window reproduces the unwindowed value exactly.
ConfidenceReport confidence(const povm::PovmTable& table, const PriorDistribution& prior,
                            const std::optional<Window>& window = std::nullopt);

//! Zero-width-window limit: the posterior probability p(n | s = centers[n]),
//! the upper bound of the post-selection strategy.
Eigen::VectorXd peak_confidence(const povm::PovmTable& table, const PriorDistribution& prior,
                                const Eigen::VectorXd& centers);

//! Confidence sweep under thermal priors; row i holds C_n for
//! lambda_sq_values[i], columns are photon numbers.
Eigen::MatrixXd confidence_vs_thermal_parameter(const povm::PovmTable& table,
                                                const Eigen::VectorXd& lambda_sq_values);

}  // namespace pnr::infer
