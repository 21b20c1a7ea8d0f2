#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "pnr/kde.hpp"
#include "pnr/povm.hpp"

namespace pnr::tomo {

//! Estimated outcome densities for a set of coherent probes on a shared grid.
struct ProbeEnsemble {
  struct Probe {
    double alpha_sq = 0.0;
    kde::DensityEstimate density;
  };

  OutcomeGrid grid;
  std::vector<Probe> probes;

  //! Validates the shared grid and sorts probes by ascending alpha_sq;
  //! throws on duplicate probe energies.
  void finalize();
  Eigen::Index probe_count() const { return static_cast<Eigen::Index>(probes.size()); }
};

struct EmConfig {
  enum class Init { quantile_spaced, kmeans_on_scores, explicit_model };

  int n_max = 17;
  int max_iterations = 2000;
  double rel_tol = 1e-8;
  double sigma_floor = 0.0;  // 0 selects 0.5 * grid spacing
  Init init = Init::quantile_spaced;
  std::optional<povm::GaussianMixturePovm> init_model;
};

struct EmDiagnostics {
  std::vector<double> log_likelihood;  // one entry per evaluated iteration
  int iterations = 0;
  bool converged = false;
  int sigma_clamps = 0;
  int dead_components = 0;
  int log_clamps = 0;
  std::vector<std::string> flags;

  double final_log_likelihood() const {
    return log_likelihood.empty() ? 0.0 : log_likelihood.back();
  }
};

struct EmResult {
  povm::GaussianMixturePovm model;
  EmDiagnostics diagnostics;
};

//! Maximum-likelihood Gaussian-mixture POVM reconstruction.
//!
//! Alternates responsibility computation with conditional M-steps (shared
//! peak means first, then widths, then weights); every step maximizes the
//! same EM surrogate, so the quadrature log-likelihood
//!   L = sum_k integral q(s|alpha_k) log p(s|alpha_k, model) ds
//! is non-decreasing across iterations. Stops when the relative change in L
//! drops below rel_tol or max_iterations is reached.
EmResult em_fit(const ProbeEnsemble& data, const EmConfig& config);

struct LsqDiagnostics {
  int negative_solution_points = 0;    // grid points whose unconstrained solve went negative
  double min_unconstrained = 0.0;      // most negative unconstrained entry seen
  int unconverged_points = 0;
  int max_inner_iterations = 0;
  Eigen::VectorXd row_integrals;
  Eigen::VectorXd row_roughness;       // per-row total second difference / peak value
  std::vector<std::string> flags;
};

struct LsqResult {
  povm::PovmTable table;
  LsqDiagnostics diagnostics;
};

//! Model-free baseline: per grid point, nonnegative least squares against the
//! Poisson design matrix with a smoothness penalty coupling neighboring grid
//! points, solved by accelerated projected gradient descent.
LsqResult lsq_fit(const ProbeEnsemble& data, int n_max, double regularization = 1e-3);

//! L1 misfit between the ensemble and the model prediction, normalized by the
//! L1 norm of the data: sum_k int |q - p| ds / sum_k int q ds.
double reconstruction_error(const ProbeEnsemble& data, const povm::PovmTable& table);
double reconstruction_error(const ProbeEnsemble& data, const povm::GaussianMixturePovm& model);

}  // namespace pnr::tomo
