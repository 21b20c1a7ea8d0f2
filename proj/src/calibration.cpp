#include "pnr/calibration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "pnr/errors.hpp"
#include "pnr/tomo.hpp"

namespace pnr::calib {

namespace {

double chi_sq(const PowerPairSeries& series, double r) {
  double total = 0.0;
  for (const auto& p : series) {
    const double u = p.y - r * p.x;
    const double d = p.y_error * p.y_error + r * r * p.x_error * p.x_error;
    total += u * u / d;
  }
  return total;
}

double chi_sq_deriv(const PowerPairSeries& series, double r) {
  double total = 0.0;
  for (const auto& p : series) {
    const double u = p.y - r * p.x;
    const double d = p.y_error * p.y_error + r * r * p.x_error * p.x_error;
    total += -2.0 * (p.x * u * d + r * p.x_error * p.x_error * u * u) / (d * d);
  }
  return total;
}

}  // namespace

RatioEstimate fit_attenuation(const PowerPairSeries& series) {
  if (series.size() < 2) throw DimensionError("fit_attenuation: need at least two points");
  bool all_x_equal = true;
  for (const auto& p : series) {
    if (!(p.x > 0) || !(p.y > 0)) throw DimensionError("fit_attenuation: powers must be positive");
    if (!(p.x_error > 0) || !(p.y_error > 0))
      throw DimensionError("fit_attenuation: errors must be positive");
    if (p.x != series.front().x) all_x_equal = false;
  }
  if (all_x_equal) throw DimensionError("fit_attenuation: degenerate series (constant x)");

  // Profile likelihood of the slope for the zero-intercept errors-in-variables
  // model; minimized first by golden section in log r, then polished with
  // Newton steps on the derivative.
  std::vector<double> ratios;
  ratios.reserve(series.size());
  for (const auto& p : series) ratios.push_back(p.y / p.x);
  std::nth_element(ratios.begin(), ratios.begin() + ratios.size() / 2, ratios.end());
  const double r0 = ratios[ratios.size() / 2];

  double lo = std::log(r0) - 14.0;
  double hi = std::log(r0) + 14.0;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
  double fa = chi_sq(series, std::exp(a)), fb = chi_sq(series, std::exp(b));
  for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - gr * (hi - lo);
      fa = chi_sq(series, std::exp(a));
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + gr * (hi - lo);
      fb = chi_sq(series, std::exp(b));
    }
  }
  double r = std::exp(0.5 * (lo + hi));

  for (int i = 0; i < 100; ++i) {
    const double g = chi_sq_deriv(series, r);
    const double h = std::max(std::abs(r), 1e-300) * 1e-7;
    const double gg = (chi_sq_deriv(series, r + h) - chi_sq_deriv(series, r - h)) / (2.0 * h);
    if (!(gg > 0)) break;
    const double step = g / gg;
    r -= step;
    if (std::abs(step) < 1e-15 * std::max(std::abs(r), 1e-300)) break;
  }

  const double h = std::max(std::abs(r), 1e-300) * 1e-6;
  const double curvature = (chi_sq_deriv(series, r + h) - chi_sq_deriv(series, r - h)) / (2.0 * h);
  RatioEstimate out;
  out.ratio = r;
  out.sigma = curvature > 0 ? std::sqrt(2.0 / curvature) : 0.0;
  return out;
}

RatioEstimate chain_attenuations(const std::vector<RatioEstimate>& fits) {
  if (fits.empty()) throw DimensionError("chain_attenuations: empty chain");
  double ratio = 1.0;
  double rel = 0.0;
  for (const auto& f : fits) {
    ratio *= f.ratio;
    rel += f.sigma / f.ratio;  // correlated stages: relative errors add linearly
  }
  return {ratio, std::abs(ratio) * rel};
}

RatioEstimate apply_fresnel(const RatioEstimate& chain, const ValueWithError& correction) {
  const double factor = 1.0 - correction.value;
  if (!(factor > 0)) throw DimensionError("apply_fresnel: correction >= 1");
  return chain_attenuations({chain, {factor, correction.sigma}});
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
  if (n < 1) throw DimensionError("gauss_hermite: n must be positive");
  if (n == 1) {
    Eigen::VectorXd x(1), w(1);
    x[0] = 0.0;
    w[0] = std::sqrt(M_PI);
    return {x, w};
  }
  // Golub-Welsch on the Jacobi matrix of the (physicists') Hermite recurrence.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(0.5 * i);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  Eigen::VectorXd nodes = eig.eigenvalues();
  Eigen::VectorXd weights(n);
  const double mu0 = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    const double v0 = eig.eigenvectors()(0, i);
    weights[i] = mu0 * v0 * v0;
  }
  return {nodes, weights};
}

Eigen::MatrixXd energy_scale_mixing(int n_max, double scale) {
  if (!(scale > 0)) throw DimensionError("energy_scale_mixing: scale must be positive");
  const int rows = n_max + 1;
  const double p = 1.0 / scale;  // survival probability; > 1 gives signed mixing
  const double q = 1.0 - p;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, rows);
  for (int n = 0; n < rows; ++n) {
    for (int j = 0; j <= n; ++j) {
      double coeff = 1.0;
      for (int i = 0; i < j; ++i) coeff *= static_cast<double>(n - i) / static_cast<double>(i + 1);
      double value = coeff;
      for (int i = 0; i < j; ++i) value *= p;
      for (int i = 0; i < n - j; ++i) value *= q;
      m(n, j) = value;
    }
  }
  return m;
}

namespace {

povm::PovmTable project_physical(Eigen::MatrixXd accum, const OutcomeGrid& grid, int n_max,
                                 MarginalizeDiagnostics* diag) {
  const Eigen::VectorXd w = grid.trapezoid_weights();
  MarginalizeDiagnostics local;
  for (Eigen::Index n = 0; n < accum.rows(); ++n)
    for (int g = 0; g < grid.n_points; ++g)
      if (accum(n, g) < 0) {
        local.clamped_negative_mass += -accum(n, g) * w[g];
        accum(n, g) = 0.0;
      }
  for (Eigen::Index n = 0; n < accum.rows(); ++n) {
    const double mass = trapezoid(accum.row(n).transpose(), grid.spacing());
    if (mass > 1.0) {
      ++local.rows_rescaled;
      local.max_row_excess = std::max(local.max_row_excess, mass - 1.0);
      accum.row(n) /= mass;
    }
  }
  if (diag) *diag = local;
  povm::PovmTable table;
  table.grid = grid;
  table.n_max = n_max;
  table.theta = std::move(accum);
  return table;
}

struct QuadratureRule {
  Eigen::VectorXd scales;   // relative energy scale per node
  Eigen::VectorXd weights;  // normalized to sum to 1
};

QuadratureRule eta_quadrature(EtaPrior prior, int n_quad) {
  if (!(prior.mean > 0)) throw DimensionError("marginalize_povm: prior mean must be positive");
  if (prior.sigma < 0) throw DimensionError("marginalize_povm: negative prior sigma");
  if (n_quad < 1 || n_quad % 2 == 0)
    throw DimensionError("marginalize_povm: n_quad must be odd and positive");
  auto [x, wq] = gauss_hermite(n_quad);
  QuadratureRule rule;
  rule.scales.resize(n_quad);
  rule.weights = wq / wq.sum();
  for (int i = 0; i < n_quad; ++i) {
    const double eta = prior.mean + std::sqrt(2.0) * prior.sigma * x[i];
    rule.scales[i] = std::max(eta / prior.mean, 0.05);
  }
  return rule;
}

}  // namespace

povm::PovmTable marginalize_povm(const povm::GaussianMixturePovm& model, EtaPrior prior,
                                 const OutcomeGrid& grid, int n_quad,
                                 MarginalizeDiagnostics* diag) {
  const povm::PovmTable base = povm::mixture_to_table(model, grid);
  if (prior.sigma == 0.0) {
    if (diag) *diag = {};
    return base;
  }
  const QuadratureRule rule = eta_quadrature(prior, n_quad);
  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(model.n_max + 1, grid.n_points);
  for (int i = 0; i < rule.scales.size(); ++i)
    accum.noalias() +=
        rule.weights[i] * (energy_scale_mixing(model.n_max, rule.scales[i]) * base.theta);
  return project_physical(std::move(accum), grid, model.n_max, diag);
}

povm::PovmTable marginalize_povm_refit(const povm::GaussianMixturePovm& model,
                                       const tomo::ProbeEnsemble& data, EtaPrior prior,
                                       const OutcomeGrid& grid, int n_quad,
                                       const tomo::EmConfig& config,
                                       MarginalizeDiagnostics* diag) {
  if (prior.sigma == 0.0) {
    if (diag) *diag = {};
    return povm::mixture_to_table(model, grid);
  }
  const QuadratureRule rule = eta_quadrature(prior, n_quad);
  tomo::EmConfig node_config = config;
  node_config.n_max = model.n_max;
  node_config.init = tomo::EmConfig::Init::explicit_model;
  node_config.init_model = model;
  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(model.n_max + 1, grid.n_points);
  for (int i = 0; i < rule.scales.size(); ++i) {
    tomo::ProbeEnsemble scaled = data;
    for (auto& probe : scaled.probes) probe.alpha_sq *= rule.scales[i];
    const tomo::EmResult fit = tomo::em_fit(scaled, node_config);
    accum.noalias() += rule.weights[i] * povm::mixture_to_table(fit.model, grid).theta;
  }
  return project_physical(std::move(accum), grid, model.n_max, diag);
}

}  // namespace pnr::calib
