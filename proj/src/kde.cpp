#include "pnr/kde.hpp"

#include <algorithm>
#include <cmath>

#include "pnr/mathutil.hpp"

namespace pnr::kde {

void DensityEstimate::validate() const {
  if (values.size() != grid.n_points)
    throw DimensionError("DensityEstimate: value count does not match grid");
  if ((values.array() < 0).any()) throw DimensionError("DensityEstimate: negative density");
  const double mass = integral();
  if (std::abs(mass - 1.0) > 1e-6)
    throw DimensionError("DensityEstimate: integral deviates from 1");
}

double silverman_bandwidth(const Eigen::VectorXd& samples) {
  const Eigen::Index n = samples.size();
  if (n < 2) return 0.0;
  Eigen::VectorXd sorted = samples;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  if (sorted[0] == sorted[n - 1]) return 0.0;

  const double sigma = sample_stddev(sorted);
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double scale = sigma;
  if (iqr > 0.0) scale = std::min(scale, iqr / 1.34);
  if (scale <= 0.0) scale = sigma;  // heavy ties: fall back to the plain deviation
  return 0.9 * scale * std::pow(static_cast<double>(n), -0.2);
}

DensityEstimate estimate_density(const Eigen::VectorXd& samples, const OutcomeGrid& grid,
                                 std::optional<double> bandwidth) {
  grid.validate();
  if (samples.size() == 0) throw DimensionError("estimate_density: empty sample set");

  double h = bandwidth.value_or(silverman_bandwidth(samples));
  if (bandwidth && !(h > 0))
    throw DimensionError("estimate_density: bandwidth must be positive");
  if (h <= 0.0) h = grid.spacing();  // degenerate samples: documented floor

  DensityEstimate out;
  out.grid = grid;
  out.bandwidth = h;
  out.sample_count = samples.size();
  out.values = Eigen::VectorXd::Zero(grid.n_points);

  const double spacing = grid.spacing();
  const double cutoff = 8.5 * h;
  const double norm = kInvSqrt2Pi / (h * static_cast<double>(samples.size()));
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const double x = samples[i];
    const int g_lo = std::max(0, static_cast<int>(std::ceil((x - cutoff - grid.s_min) / spacing)));
    const int g_hi = std::min(grid.n_points - 1,
                              static_cast<int>(std::floor((x + cutoff - grid.s_min) / spacing)));
    for (int g = g_lo; g <= g_hi; ++g) {
      const double z = (grid.point(g) - x) / h;
      out.values[g] += norm * std::exp(-0.5 * z * z);
    }
  }

  const double mass = out.integral();
  if (!(mass > 0.0))
    throw CoverageError("estimate_density: grid does not cover the samples");
  out.values /= mass;
  return out;
}

}  // namespace pnr::kde
