#include "pnr/inference.hpp"

#include <cmath>
#include <limits>

#include "pnr/mathutil.hpp"

namespace pnr::infer {

namespace {

Eigen::VectorXd normalized(Eigen::VectorXd w) {
  const double total = w.sum();
  if (!(total > 0)) throw DimensionError("PriorDistribution: zero total weight");
  return w / total;
}

}  // namespace

PriorDistribution PriorDistribution::flat(int n_support) {
  if (n_support < 0) throw DimensionError("flat prior: negative support");
  PriorDistribution p;
  p.kind = Kind::flat;
  p.weights = Eigen::VectorXd::Constant(n_support + 1, 1.0 / (n_support + 1));
  return p;
}

PriorDistribution PriorDistribution::thermal(double lambda_sq, int n_support) {
  if (n_support < 0) throw DimensionError("thermal prior: negative support");
  if (!(lambda_sq >= 0) || lambda_sq >= 1)
    throw DimensionError("thermal prior: lambda_sq must lie in [0, 1)");
  PriorDistribution p;
  p.kind = Kind::thermal;
  p.parameter = lambda_sq;
  Eigen::VectorXd w(n_support + 1);
  double term = 1.0;
  for (int n = 0; n <= n_support; ++n) {
    w[n] = term;
    term *= lambda_sq;
  }
  p.weights = normalized(std::move(w));
  return p;
}

PriorDistribution PriorDistribution::poisson(double alpha_sq, int n_support) {
  if (n_support < 0) throw DimensionError("poisson prior: negative support");
  PriorDistribution p;
  p.kind = Kind::poisson;
  p.parameter = alpha_sq;
  Eigen::VectorXd w(n_support + 1);
  for (int n = 0; n <= n_support; ++n) w[n] = povm::poisson_coeff(alpha_sq, n);
  p.weights = normalized(std::move(w));
  return p;
}

PriorDistribution PriorDistribution::explicit_weights(const Eigen::VectorXd& w) {
  if (w.size() == 0) throw DimensionError("explicit prior: empty weights");
  if ((w.array() < 0).any()) throw DimensionError("explicit prior: negative weight");
  PriorDistribution p;
  p.kind = Kind::explicit_weights;
  p.weights = normalized(w);
  return p;
}

bool Window::accepts(double s) const {
  for (Eigen::Index i = 0; i < centers.size(); ++i)
    if (std::abs(s - centers[i]) <= half_width) return true;
  return false;
}

EfficiencyEstimate estimate_efficiency(const povm::GaussianMixturePovm& model) {
  if (model.n_max < 1) throw DimensionError("estimate_efficiency: need n_max >= 1");

  auto objective = [&](double eta) {
    double total = 0.0;
    for (int n = 0; n <= model.n_max; ++n)
      for (int j = 0; j <= n; ++j) {
        const double d = model.weights(n, j) - binomial_pmf(j, n, eta);
        total += d * d;
      }
    return total;
  };

  double lo = 0.0, hi = 1.0;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
  double fa = objective(a), fb = objective(b);
  while (hi - lo > 1e-9) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - gr * (hi - lo);
      fa = objective(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + gr * (hi - lo);
      fb = objective(b);
    }
  }

  EfficiencyEstimate out;
  out.eta = 0.5 * (lo + hi);
  const double f_min = objective(out.eta);

  const int curve_points = 401;
  out.curve_eta.resize(curve_points);
  out.curve_objective.resize(curve_points);
  for (int i = 0; i < curve_points; ++i) {
    out.curve_eta[i] = static_cast<double>(i) / (curve_points - 1);
    out.curve_objective[i] = objective(out.curve_eta[i]);
  }

  // Uncertainty interval: where the objective stays within twice its minimum.
  const double threshold = 2.0 * f_min;
  auto crossing = [&](double inside, double outside) {
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (inside + outside);
      (objective(mid) <= threshold ? inside : outside) = mid;
    }
    return inside;
  };
  out.eta_low = out.eta;
  out.eta_high = out.eta;
  for (int i = 0; i < curve_points; ++i) {
    if (out.curve_objective[i] <= threshold) {
      out.eta_low = std::min(out.eta_low, out.curve_eta[i]);
      out.eta_high = std::max(out.eta_high, out.curve_eta[i]);
    }
  }
  if (out.eta_low > 0.0) out.eta_low = crossing(out.eta_low, std::max(0.0, out.eta_low - 1.0 / (curve_points - 1)));
  if (out.eta_high < 1.0) out.eta_high = crossing(out.eta_high, std::min(1.0, out.eta_high + 1.0 / (curve_points - 1)));
  return out;
}

PosteriorTable posterior(const povm::PovmTable& table, const PriorDistribution& prior) {
  const int rows = static_cast<int>(prior.weights.size());
  if (rows > table.n_max + 1) throw DimensionError("posterior: prior support exceeds table");

  PosteriorTable out;
  out.grid = table.grid;
  out.prior = prior;
  out.values.resize(rows, table.grid.n_points);
  for (int g = 0; g < table.grid.n_points; ++g) {
    double den = 0.0;
    for (int n = 0; n < rows; ++n) den += table.theta(n, g) * prior.weights[n];
    if (den < 1e-300) {
      out.values.col(g).setConstant(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    for (int n = 0; n < rows; ++n) out.values(n, g) = table.theta(n, g) * prior.weights[n] / den;
  }
  return out;
}

namespace {

Eigen::VectorXd confidence_values(const povm::PovmTable& table, const PriorDistribution& prior,
                                  const std::vector<bool>& mask) {
  const int rows = static_cast<int>(prior.weights.size());
  const Eigen::VectorXd w = table.grid.trapezoid_weights();
  const bool flat = prior.kind == PriorDistribution::Kind::flat;

  Eigen::VectorXd c = Eigen::VectorXd::Zero(rows);
  for (int g = 0; g < table.grid.n_points; ++g) {
    if (!mask.empty() && !mask[g]) continue;
    double den = 0.0;
    for (int n = 0; n < rows; ++n)
      den += flat ? table.theta(n, g) : table.theta(n, g) * prior.weights[n];
    if (!(den > 0)) continue;
    for (int n = 0; n < rows; ++n) {
      const double t = table.theta(n, g);
      c[n] += flat ? w[g] * t * t / den : w[g] * t * t * prior.weights[n] / den;
    }
  }
  return c;
}

}  // namespace

ConfidenceReport confidence(const povm::PovmTable& table, const PriorDistribution& prior,
                            const std::optional<Window>& window) {
  const int rows = static_cast<int>(prior.weights.size());
  if (rows > table.n_max + 1) throw DimensionError("confidence: prior support exceeds table");

  ConfidenceReport report;
  report.prior = prior;
  report.window = window;
  if (!window) {
    report.c_values = confidence_values(table, prior, {});
    return report;
  }

  std::vector<bool> mask(table.grid.n_points);
  for (int g = 0; g < table.grid.n_points; ++g) mask[g] = window->accepts(table.grid.point(g));

  // Acceptance fraction per photon number: accepted row mass over total row
  // mass. The p(s|n) weighting renormalizes by this fraction, so the
  // full-line window reduces to the unwindowed confidence exactly.
  const Eigen::VectorXd w = table.grid.trapezoid_weights();
  report.acceptance_fraction.resize(rows);
  for (int n = 0; n < rows; ++n) {
    double accepted = 0.0, total = 0.0;
    for (int g = 0; g < table.grid.n_points; ++g) {
      const double mass = w[g] * table.theta(n, g);
      total += mass;
      if (mask[g]) accepted += mass;
    }
    report.acceptance_fraction[n] = total > 0 ? accepted / total : 0.0;
  }

  report.c_values = confidence_values(table, prior, mask);
  for (int n = 0; n < rows; ++n)
    if (report.acceptance_fraction[n] > 0) report.c_values[n] /= report.acceptance_fraction[n];
  return report;
}

Eigen::VectorXd peak_confidence(const povm::PovmTable& table, const PriorDistribution& prior,
                                const Eigen::VectorXd& centers) {
  const int rows = static_cast<int>(prior.weights.size());
  if (rows > table.n_max + 1) throw DimensionError("peak_confidence: prior support exceeds table");
  if (centers.size() < rows) throw DimensionError("peak_confidence: need one center per n");

  const double h = table.grid.spacing();
  Eigen::VectorXd out(rows);
  for (int n = 0; n < rows; ++n) {
    const double pos = (centers[n] - table.grid.s_min) / h;
    const int g0 = std::clamp(static_cast<int>(std::floor(pos)), 0, table.grid.n_points - 2);
    const double frac = std::clamp(pos - g0, 0.0, 1.0);
    double den = 0.0, num = 0.0;
    for (int k = 0; k < rows; ++k) {
      const double t = (1.0 - frac) * table.theta(k, g0) + frac * table.theta(k, g0 + 1);
      den += t * prior.weights[k];
      if (k == n) num = t * prior.weights[k];
    }
    out[n] = den > 0 ? num / den : 0.0;
  }
  return out;
}

Eigen::MatrixXd confidence_vs_thermal_parameter(const povm::PovmTable& table,
                                                const Eigen::VectorXd& lambda_sq_values) {
  Eigen::MatrixXd out(lambda_sq_values.size(), table.n_max + 1);
  for (Eigen::Index i = 0; i < lambda_sq_values.size(); ++i) {
    const auto report =
        confidence(table, PriorDistribution::thermal(lambda_sq_values[i], table.n_max));
    out.row(i) = report.c_values.transpose();
  }
  return out;
}

}  // namespace pnr::infer
