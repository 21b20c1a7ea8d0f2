#include "pnr/povm.hpp"

#include <cmath>

#include "pnr/mathutil.hpp"

namespace pnr::povm {

Eigen::VectorXd PovmTable::row_integrals() const {
  Eigen::VectorXd out(theta.rows());
  for (Eigen::Index n = 0; n < theta.rows(); ++n)
    out[n] = trapezoid(theta.row(n).transpose(), grid.spacing());
  return out;
}

void PovmTable::validate() const {
  grid.validate();
  if (theta.rows() != n_max + 1 || theta.cols() != grid.n_points)
    throw DimensionError("PovmTable: shape mismatch");
  if ((theta.array() < 0).any()) throw DimensionError("PovmTable: negative coefficient");
  const Eigen::VectorXd integrals = row_integrals();
  if ((integrals.array() > 1.0 + 1e-9).any())
    throw DimensionError("PovmTable: row integral exceeds 1");
}

void GaussianMixturePovm::validate() const {
  const int rows = n_max + 1;
  if (peak_means.size() != rows || weights.rows() != rows || weights.cols() != rows ||
      widths.rows() != rows || widths.cols() != rows)
    throw DimensionError("GaussianMixturePovm: shape mismatch");
  for (int j = 1; j < rows; ++j)
    if (!(peak_means[j] > peak_means[j - 1]))
      throw DimensionError("GaussianMixturePovm: peak means must increase strictly");
  for (int n = 0; n < rows; ++n) {
    double sum = 0.0;
    for (int j = 0; j <= n; ++j) {
      if (weights(n, j) < 0) throw DimensionError("GaussianMixturePovm: negative weight");
      if (!(widths(n, j) > 0)) throw DimensionError("GaussianMixturePovm: nonpositive width");
      sum += weights(n, j);
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw DimensionError("GaussianMixturePovm: weight row does not sum to 1");
    for (int j = n + 1; j < rows; ++j)
      if (weights(n, j) != 0.0)
        throw DimensionError("GaussianMixturePovm: weight above the diagonal");
  }
}

void DiagonalState::validate() const {
  if (weights.size() == 0) throw DimensionError("DiagonalState: empty");
  if ((weights.array() < 0).any()) throw DimensionError("DiagonalState: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-9)
    throw DimensionError("DiagonalState: weights do not sum to 1");
}

double poisson_coeff(double alpha_sq, int n) {
  if (n < 0) throw DimensionError("poisson_coeff: negative photon number");
  if (!(alpha_sq >= 0) || !std::isfinite(alpha_sq))
    throw DimensionError("poisson_coeff: alpha_sq must be finite and nonnegative");
  if (alpha_sq == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(n * std::log(alpha_sq) - alpha_sq - std::lgamma(n + 1.0));
}

PovmTable mixture_to_table(const GaussianMixturePovm& model, const OutcomeGrid& grid) {
  model.validate();
  grid.validate();

  double max_width = 0.0;
  for (int n = 0; n <= model.n_max; ++n)
    for (int j = 0; j <= n; ++j) max_width = std::max(max_width, model.widths(n, j));
  if (grid.s_min > model.peak_means.minCoeff() - 6.0 * max_width ||
      grid.s_max < model.peak_means.maxCoeff() + 6.0 * max_width)
    throw CoverageError("mixture_to_table: grid does not cover peaks +/- 6 widths");

  PovmTable table;
  table.grid = grid;
  table.n_max = model.n_max;
  table.theta = Eigen::MatrixXd::Zero(model.n_max + 1, grid.n_points);
  const Eigen::VectorXd s = grid.points();
  for (int n = 0; n <= model.n_max; ++n) {
    for (int j = 0; j <= n; ++j) {
      const double beta = model.weights(n, j);
      if (beta == 0.0) continue;
      const double mu = model.peak_means[j];
      const double sigma = model.widths(n, j);
      for (int g = 0; g < grid.n_points; ++g)
        table.theta(n, g) += beta * norm_pdf(s[g], mu, sigma);
    }
    // Trapezoidal discretization of near-floor widths can push the row mass
    // above 1; scaling back is part of the truncation policy.
    const double mass = trapezoid(table.theta.row(n).transpose(), grid.spacing());
    if (mass > 1.0) table.theta.row(n) /= mass;
  }
  return table;
}

namespace {

kde::DensityEstimate combine_rows(const PovmTable& table, const Eigen::VectorXd& coeffs,
                                  double mass) {
  kde::DensityEstimate out;
  out.grid = table.grid;
  out.values = table.theta.transpose() * coeffs;
  out.model_mass = mass;
  return out;
}

}  // namespace

kde::DensityEstimate probe_density(const PovmTable& table, CoherentProbe probe) {
  Eigen::VectorXd coeffs(table.n_max + 1);
  for (int n = 0; n <= table.n_max; ++n) coeffs[n] = poisson_coeff(probe.alpha_sq, n);
  return combine_rows(table, coeffs, coeffs.sum());
}

kde::DensityEstimate probe_density(const GaussianMixturePovm& model, CoherentProbe probe,
                                   const OutcomeGrid& grid) {
  return probe_density(mixture_to_table(model, grid), probe);
}

kde::DensityEstimate born_probability(const PovmTable& table, const DiagonalState& state) {
  state.validate();
  if (state.weights.size() > table.n_max + 1)
    throw DimensionError("born_probability: state longer than table");
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(table.n_max + 1);
  coeffs.head(state.weights.size()) = state.weights;
  return combine_rows(table, coeffs, coeffs.sum());
}

}  // namespace pnr::povm
