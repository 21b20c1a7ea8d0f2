#include "pnr/mathutil.hpp"

#include <stdexcept>

namespace pnr {

double quantile_sorted(const Eigen::VectorXd& sorted, double p) {
  const Eigen::Index n = sorted.size();
  if (n == 0) throw std::invalid_argument("quantile of empty sample");
  if (n == 1) return sorted[0];
  const double pos = p * static_cast<double>(n - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const auto hi = std::min<Eigen::Index>(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double sample_stddev(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  if (n < 2) return 0.0;
  const double mean = x.mean();
  const double ss = (x.array() - mean).square().sum();
  return std::sqrt(ss / static_cast<double>(n - 1));
}

double binomial_pmf(int j, int n, double p) {
  if (j < 0 || j > n) return 0.0;
  // Exact up to roundoff for the n <= ~30 used in this project.
  double coeff = 1.0;
  for (int i = 0; i < j; ++i) coeff *= static_cast<double>(n - i) / static_cast<double>(i + 1);
  return coeff * std::pow(p, j) * std::pow(1.0 - p, n - j);
}

}  // namespace pnr
