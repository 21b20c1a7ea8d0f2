#include "pnr/grid.hpp"

#include <algorithm>
#include <cmath>

#include "pnr/mathutil.hpp"

namespace pnr {

Eigen::VectorXd OutcomeGrid::points() const {
  Eigen::VectorXd p(n_points);
  const double h = spacing();
  for (int g = 0; g < n_points; ++g) p[g] = s_min + g * h;
  return p;
}

Eigen::VectorXd OutcomeGrid::trapezoid_weights() const {
  const double h = spacing();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n_points, h);
  w[0] = 0.5 * h;
  w[n_points - 1] = 0.5 * h;
  return w;
}

void OutcomeGrid::validate() const {
  if (n_points < 16) throw DimensionError("OutcomeGrid: n_points must be >= 16");
  if (!(s_max > s_min)) throw DimensionError("OutcomeGrid: s_max must exceed s_min");
  if (!std::isfinite(s_min) || !std::isfinite(s_max))
    throw DimensionError("OutcomeGrid: bounds must be finite");
}

OutcomeGrid OutcomeGrid::covering(const std::vector<Eigen::VectorXd>& per_probe_samples,
                                  int n_points) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double widest = 0.0;
  for (const auto& s : per_probe_samples) {
    if (s.size() == 0) continue;
    lo = std::min(lo, s.minCoeff());
    hi = std::max(hi, s.maxCoeff());
    widest = std::max(widest, sample_stddev(s));
  }
  if (!(hi > -std::numeric_limits<double>::infinity()))
    throw DimensionError("OutcomeGrid::covering: no samples");
  if (hi == lo) {
    const double pad = std::max(1.0, std::abs(lo));
    return OutcomeGrid{lo - pad, hi + pad, n_points};
  }
  const double pad = 4.0 * widest;
  OutcomeGrid grid{lo - pad, hi + pad, n_points};
  grid.validate();
  return grid;
}

double trapezoid(const Eigen::VectorXd& values, double spacing) {
  const Eigen::Index n = values.size();
  if (n < 2) return 0.0;
  return spacing * (values.sum() - 0.5 * (values[0] + values[n - 1]));
}

}  // namespace pnr
