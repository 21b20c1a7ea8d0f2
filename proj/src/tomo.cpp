#include "pnr/tomo.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>

#include "pnr/mathutil.hpp"

namespace pnr::tomo {

void ProbeEnsemble::finalize() {
  grid.validate();
  if (probes.empty()) throw DimensionError("ProbeEnsemble: no probes");
  for (const auto& p : probes) {
    if (!(p.density.grid == grid)) throw DimensionError("ProbeEnsemble: probe on a different grid");
    if (p.density.values.size() != grid.n_points)
      throw DimensionError("ProbeEnsemble: density length mismatch");
  }
  std::sort(probes.begin(), probes.end(),
            [](const Probe& a, const Probe& b) { return a.alpha_sq < b.alpha_sq; });
  for (std::size_t i = 1; i < probes.size(); ++i)
    if (probes[i].alpha_sq == probes[i - 1].alpha_sq)
      throw DimensionError("ProbeEnsemble: duplicate probe energy");
}

namespace {

// Inverts the cumulative trapezoidal integral of a grid density.
double density_quantile(const OutcomeGrid& grid, const Eigen::VectorXd& q, double p) {
  const double h = grid.spacing();
  double total = trapezoid(q, h);
  if (!(total > 0)) return grid.s_min;
  const double target = p * total;
  double cum = 0.0;
  for (int g = 1; g < grid.n_points; ++g) {
    const double step = 0.5 * h * (q[g - 1] + q[g]);
    if (cum + step >= target) {
      const double frac = step > 0 ? (target - cum) / step : 0.0;
      return grid.point(g - 1) + frac * h;
    }
    cum += step;
  }
  return grid.s_max;
}

Eigen::VectorXd pooled_density(const ProbeEnsemble& data) {
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(data.grid.n_points);
  for (const auto& p : data.probes) pooled += p.density.values;
  pooled /= static_cast<double>(data.probes.size());
  return pooled;
}

Eigen::VectorXd kmeans_centers(const OutcomeGrid& grid, const Eigen::VectorXd& weights,
                               Eigen::VectorXd centers) {
  const Eigen::VectorXd s = grid.points();
  for (int pass = 0; pass < 100; ++pass) {
    Eigen::VectorXd num = Eigen::VectorXd::Zero(centers.size());
    Eigen::VectorXd den = Eigen::VectorXd::Zero(centers.size());
    for (int g = 0; g < grid.n_points; ++g) {
      if (weights[g] <= 0) continue;
      Eigen::Index best = 0;
      (centers.array() - s[g]).abs().minCoeff(&best);
      num[best] += weights[g] * s[g];
      den[best] += weights[g];
    }
    Eigen::VectorXd next = centers;
    for (Eigen::Index j = 0; j < centers.size(); ++j)
      if (den[j] > 0) next[j] = num[j] / den[j];
    std::sort(next.data(), next.data() + next.size());
    if ((next - centers).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + centers.cwiseAbs().maxCoeff())) {
      centers = next;
      break;
    }
    centers = next;
  }
  return centers;
}

povm::GaussianMixturePovm initial_model(const ProbeEnsemble& data, const EmConfig& config,
                                        double sigma_floor) {
  const int rows = config.n_max + 1;
  povm::GaussianMixturePovm model;
  model.n_max = config.n_max;
  model.weights = Eigen::MatrixXd::Zero(rows, rows);
  model.widths = Eigen::MatrixXd::Zero(rows, rows);

  if (config.init == EmConfig::Init::explicit_model) {
    if (!config.init_model) throw DimensionError("em_fit: explicit init without init_model");
    config.init_model->validate();
    if (config.init_model->n_max != config.n_max)
      throw DimensionError("em_fit: init_model n_max mismatch");
    return *config.init_model;
  }

  // Peak seeds at evenly spaced quantiles of the pooled probe density; the
  // pooled distribution covers the vacuum and the highest-energy structure at
  // the same time.
  const Eigen::VectorXd pooled = pooled_density(data);
  model.peak_means.resize(rows);
  for (int j = 0; j < rows; ++j)
    model.peak_means[j] =
        density_quantile(data.grid, pooled, (j + 0.5) / static_cast<double>(rows));

  if (config.init == EmConfig::Init::kmeans_on_scores)
    model.peak_means = kmeans_centers(data.grid, pooled, model.peak_means);

  // Enforce strict ordering with a minimum separation.
  const double min_sep = std::max(sigma_floor, 1e-9 * (data.grid.s_max - data.grid.s_min));
  for (int j = 1; j < rows; ++j)
    model.peak_means[j] = std::max(model.peak_means[j], model.peak_means[j - 1] + min_sep);

  double spacing = rows > 1
                       ? (model.peak_means[rows - 1] - model.peak_means[0]) / (rows - 1)
                       : (data.grid.s_max - data.grid.s_min) / 4.0;
  const double sigma0 = std::max(spacing / 4.0, sigma_floor);
  for (int n = 0; n < rows; ++n)
    for (int j = 0; j <= n; ++j) {
      model.widths(n, j) = sigma0;
      model.weights(n, j) = binomial_pmf(j, n, 0.9);
    }
  return model;
}

struct ComponentIndex {
  std::vector<int> n_of, j_of;
  std::vector<std::vector<int>> by_peak;  // component ids sharing peak j
  std::vector<std::vector<int>> by_n;     // component ids of photon number n

  explicit ComponentIndex(int n_max) : by_peak(n_max + 1), by_n(n_max + 1) {
    for (int n = 0; n <= n_max; ++n)
      for (int j = 0; j <= n; ++j) {
        by_peak[j].push_back(static_cast<int>(n_of.size()));
        by_n[n].push_back(static_cast<int>(n_of.size()));
        n_of.push_back(n);
        j_of.push_back(j);
      }
  }
  int count() const { return static_cast<int>(n_of.size()); }
};

}  // namespace

EmResult em_fit(const ProbeEnsemble& data_in, const EmConfig& config) {
  ProbeEnsemble data = data_in;
  data.finalize();
  if (config.n_max < 0) throw DimensionError("em_fit: negative n_max");
  if (config.max_iterations < 0 || !(config.rel_tol > 0))
    throw DimensionError("em_fit: invalid iteration controls");

  const int n_rows = config.n_max + 1;
  const int K = static_cast<int>(data.probes.size());
  const int G = data.grid.n_points;
  const double sigma_floor =
      config.sigma_floor > 0 ? config.sigma_floor : 0.5 * data.grid.spacing();

  EmResult result;
  result.model = initial_model(data, config, sigma_floor);
  auto& model = result.model;
  auto& diag = result.diagnostics;
  if (K < n_rows)
    diag.flags.push_back("fewer probes than photon numbers; fit may be underdetermined");

  const ComponentIndex comp(config.n_max);
  const int C = comp.count();
  const Eigen::VectorXd s = data.grid.points();
  const Eigen::VectorXd w = data.grid.trapezoid_weights();

  Eigen::MatrixXd F(K, n_rows);  // Poisson design
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < n_rows; ++n) F(k, n) = povm::poisson_coeff(data.probes[k].alpha_sq, n);

  Eigen::MatrixXd W(G, K);  // quadrature-weighted data
  for (int k = 0; k < K; ++k) W.col(k) = w.cwiseProduct(data.probes[k].density.values);

  Eigen::MatrixXd D(G, C), theta(G, n_rows), P(G, K), Q(G, K), R(G, n_rows);
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 0;; ++iter) {
    // Component pdfs and mixture rows at the current parameters.
    for (int c = 0; c < C; ++c) {
      const double mu = model.peak_means[comp.j_of[c]];
      const double sigma = model.widths(comp.n_of[c], comp.j_of[c]);
      for (int g = 0; g < G; ++g) D(g, c) = norm_pdf(s[g], mu, sigma);
    }
    theta.setZero();
    for (int c = 0; c < C; ++c)
      theta.col(comp.n_of[c]) += model.weights(comp.n_of[c], comp.j_of[c]) * D.col(c);
    P.noalias() = theta * F.transpose();

    double ll = 0.0;
    for (int k = 0; k < K; ++k)
      for (int g = 0; g < G; ++g) {
        const double weight = W(g, k);
        if (weight <= 0) continue;
        double p = P(g, k);
        if (p < DBL_MIN) {
          p = DBL_MIN;
          ++diag.log_clamps;
        }
        ll += weight * std::log(p);
      }
    diag.log_likelihood.push_back(ll);

    const bool converged = iter > 0 && std::abs(ll - prev_ll) < config.rel_tol * std::max(1.0, std::abs(ll));
    prev_ll = ll;
    if (converged) {
      diag.converged = true;
      break;
    }
    if (iter >= config.max_iterations) break;

    // E step: responsibilities enter only through the per-photon-number
    // aggregates R(g, n) = sum_k F(k, n) w_g q_k(g) / p_k(g).
    for (int k = 0; k < K; ++k)
      for (int g = 0; g < G; ++g)
        Q(g, k) = (W(g, k) > 0 && P(g, k) >= DBL_MIN) ? W(g, k) / P(g, k) : 0.0;
    R.noalias() = Q * F;

    // Component moments under the current responsibilities.
    Eigen::VectorXd m0(C), m1(C);
    for (int c = 0; c < C; ++c) {
      const double beta = model.weights(comp.n_of[c], comp.j_of[c]);
      if (beta <= 0) {
        m0[c] = m1[c] = 0.0;
        continue;
      }
      const auto r = R.col(comp.n_of[c]);
      m0[c] = beta * D.col(c).dot(r);
      m1[c] = beta * D.col(c).dot(r.cwiseProduct(s));
    }

    // M step, conditional updates sharing one set of responsibilities:
    // first the shared means (contributions pooled over photon numbers,
    // weighted by the component precisions), then the widths about the new
    // means, then the weights. Each step maximizes the same surrogate, which
    // keeps the log-likelihood monotone.
    Eigen::VectorXd new_means = model.peak_means;
    for (int j = 0; j < n_rows; ++j) {
      double num = 0.0, den = 0.0;
      for (int c : comp.by_peak[j]) {
        if (m0[c] <= 0) continue;
        const double inv_var = 1.0 / (model.widths(comp.n_of[c], j) * model.widths(comp.n_of[c], j));
        num += m1[c] * inv_var;
        den += m0[c] * inv_var;
      }
      if (den > 0) new_means[j] = num / den;
    }
    bool ordered = true;
    for (int j = 1; j < n_rows; ++j)
      if (!(new_means[j] > new_means[j - 1])) ordered = false;
    if (!ordered && diag.flags.empty())
      diag.flags.push_back("peak order violated during updates");
    model.peak_means = new_means;

    for (int c = 0; c < C; ++c) {
      const int n = comp.n_of[c];
      const int j = comp.j_of[c];
      if (m0[c] <= 0) continue;
      const double beta = model.weights(n, j);
      const auto r = R.col(n);
      const double mu = model.peak_means[j];
      double m2 = 0.0;
      for (int g = 0; g < G; ++g) {
        const double d = s[g] - mu;
        m2 += D(g, c) * r[g] * d * d;
      }
      m2 *= beta;
      double sigma = std::sqrt(std::max(m2 / m0[c], 0.0));
      if (sigma < sigma_floor) {
        sigma = sigma_floor;
        ++diag.sigma_clamps;
      }
      model.widths(n, j) = sigma;
    }

    for (int n = 0; n < n_rows; ++n) {
      double total = 0.0;
      for (int c : comp.by_n[n]) total += m0[c];
      if (total <= 0) {
        ++diag.dead_components;
        continue;  // photon number unsupported by the data: keep prior weights
      }
      for (int c : comp.by_n[n]) {
        const double beta = m0[c] / total;
        if (beta == 0.0 && model.weights(n, comp.j_of[c]) > 0) ++diag.dead_components;
        model.weights(n, comp.j_of[c]) = beta;
      }
    }
    ++diag.iterations;
  }

  if (diag.sigma_clamps > 0) diag.flags.push_back("width clamped at sigma floor");
  if (diag.log_clamps > 0) diag.flags.push_back("log-likelihood clamped at underflow");
  return result;
}

namespace {

double roughness(const Eigen::VectorXd& row) {
  const double peak = row.cwiseAbs().maxCoeff();
  if (!(peak > 0)) return 0.0;
  double total = 0.0;
  for (Eigen::Index g = 1; g + 1 < row.size(); ++g)
    total += std::abs(row[g + 1] - 2.0 * row[g] + row[g - 1]);
  return total / peak;
}

}  // namespace

LsqResult lsq_fit(const ProbeEnsemble& data_in, int n_max, double regularization) {
  ProbeEnsemble data = data_in;
  data.finalize();
  if (n_max < 0) throw DimensionError("lsq_fit: negative n_max");
  if (regularization < 0) throw DimensionError("lsq_fit: negative regularization");

  const int rows = n_max + 1;
  const int K = static_cast<int>(data.probes.size());
  const int G = data.grid.n_points;

  LsqResult result;
  auto& diag = result.diagnostics;
  if (K < rows) diag.flags.push_back("fewer probes than photon numbers; system underdetermined");

  Eigen::MatrixXd A(K, rows);
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < rows; ++n) A(k, n) = povm::poisson_coeff(data.probes[k].alpha_sq, n);
  const Eigen::MatrixXd AtA = A.transpose() * A;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(AtA);
  const double eig_max = eig.eigenvalues().maxCoeff();

  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(rows, G);
  Eigen::VectorXd q(K);
  diag.min_unconstrained = 0.0;

  constexpr double kTol = 1e-10;
  constexpr int kMaxInner = 20000;

  for (int g = 0; g < G; ++g) {
    for (int k = 0; k < K; ++k) q[k] = data.probes[k].density.values[g];
    const Eigen::VectorXd Atq = A.transpose() * q;
    const bool has_prev = g > 0;
    const double reg = has_prev ? regularization : 0.0;
    const Eigen::VectorXd target =
        has_prev ? Eigen::VectorXd(theta.col(g - 1)) : Eigen::VectorXd(Eigen::VectorXd::Zero(rows));
    const double lipschitz = 2.0 * (eig_max + reg);

    auto gradient = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      Eigen::VectorXd grad = 2.0 * (AtA * x - Atq);
      if (reg > 0) grad += 2.0 * reg * (x - target);
      return grad;
    };

    // FISTA with a warm start from the neighboring grid point.
    Eigen::VectorXd x = target.cwiseMax(0.0);
    Eigen::VectorXd y = x;
    double t = 1.0;
    bool converged = false;
    int inner = 0;
    for (; inner < kMaxInner; ++inner) {
      const Eigen::VectorXd x_new = (y - gradient(y) / lipschitz).cwiseMax(0.0);
      const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = x_new + ((t - 1.0) / t_new) * (x_new - x);
      x = x_new;
      t = t_new;
      const double residual =
          (x - (x - gradient(x) / lipschitz).cwiseMax(0.0)).cwiseAbs().maxCoeff();
      if (residual < kTol) {
        converged = true;
        break;
      }
    }
    if (!converged) ++diag.unconverged_points;
    diag.max_inner_iterations = std::max(diag.max_inner_iterations, inner + 1);
    theta.col(g) = x;

    // Unconstrained solve for the physicality diagnostics.
    Eigen::MatrixXd M = AtA;
    if (reg > 0) M.diagonal().array() += reg;
    const Eigen::VectorXd rhs = reg > 0 ? Eigen::VectorXd(Atq + reg * target) : Atq;
    const Eigen::VectorXd u = M.colPivHouseholderQr().solve(rhs);
    const double u_min = u.minCoeff();
    if (u_min < -1e-9) {
      ++diag.negative_solution_points;
      diag.min_unconstrained = std::min(diag.min_unconstrained, u_min);
    }
  }

  diag.row_integrals.resize(rows);
  diag.row_roughness.resize(rows);
  for (int n = 0; n < rows; ++n) {
    diag.row_integrals[n] = trapezoid(theta.row(n).transpose(), data.grid.spacing());
    diag.row_roughness[n] = roughness(theta.row(n).transpose());
    // Row mass above 1 is unphysical; scale the whole row back and leave the
    // raw integral in the diagnostics.
    if (diag.row_integrals[n] > 1.0) theta.row(n) /= diag.row_integrals[n];
  }
  if (diag.negative_solution_points > 0)
    diag.flags.push_back("unconstrained solution went negative; projection active");

  result.table.grid = data.grid;
  result.table.n_max = n_max;
  result.table.theta = theta;
  return result;
}

namespace {

double reconstruction_error_impl(const ProbeEnsemble& data,
                                 const std::vector<Eigen::VectorXd>& predicted) {
  double num = 0.0, den = 0.0;
  const double h = data.grid.spacing();
  for (std::size_t k = 0; k < data.probes.size(); ++k) {
    num += trapezoid((data.probes[k].density.values - predicted[k]).cwiseAbs(), h);
    den += trapezoid(data.probes[k].density.values, h);
  }
  if (!(den > 0)) throw DimensionError("reconstruction_error: zero data mass");
  return num / den;
}

}  // namespace

double reconstruction_error(const ProbeEnsemble& data, const povm::PovmTable& table) {
  std::vector<Eigen::VectorXd> predicted;
  predicted.reserve(data.probes.size());
  for (const auto& probe : data.probes)
    predicted.push_back(povm::probe_density(table, {probe.alpha_sq}).values);
  return reconstruction_error_impl(data, predicted);
}

double reconstruction_error(const ProbeEnsemble& data, const povm::GaussianMixturePovm& model) {
  return reconstruction_error(data, povm::mixture_to_table(model, data.grid));
}

}  // namespace pnr::tomo
