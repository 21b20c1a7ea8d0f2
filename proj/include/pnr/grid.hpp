#pragma once

#include <Eigen/Core>
#include <vector>

#include "pnr/errors.hpp"

namespace pnr {

//! Uniform grid over the 1-d outcome variable s.
//!
//! All quadrature in the project is trapezoidal on such a grid, so the
//! weights live here next to the points.
struct OutcomeGrid {
  double s_min = 0.0;
  double s_max = 1.0;
  int n_points = 2048;

  double spacing() const { return (s_max - s_min) / (n_points - 1); }
  double point(int g) const { return s_min + g * spacing(); }

  Eigen::VectorXd points() const;
  //! Trapezoid weights: h/2 at the ends, h inside.
  Eigen::VectorXd trapezoid_weights() const;

  void validate() const;

  //! Grid covering the pooled range of all sample sets, padded by four
  //! standard deviations of the widest per-probe spread.
  static OutcomeGrid covering(const std::vector<Eigen::VectorXd>& per_probe_samples,
                              int n_points = 2048);

  bool operator==(const OutcomeGrid&) const = default;
};

//! Trapezoidal integral of `values` sampled on a uniform grid.
double trapezoid(const Eigen::VectorXd& values, double spacing);

}  // namespace pnr
