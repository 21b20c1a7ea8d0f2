#pragma once

#include <Eigen/Core>
#include <vector>

#include "pnr/trace_set.hpp"

namespace pnr::pca {

//! Orthonormal principal-component basis of a trace matrix.
//! `components` holds one component per column; `variances[j]` is the
//! variance of the scores along component j, sorted non-increasing.
struct PrincipalBasis {
  Eigen::VectorXd mean_trace;
  Eigen::MatrixXd components;
  Eigen::VectorXd variances;

  Eigen::Index n_components() const { return components.cols(); }
  Eigen::Index sample_count() const { return components.rows(); }
};

//! Projections of traces onto a PrincipalBasis, one trial per row.
struct ScoreSet {
  Eigen::MatrixXd scores;
  std::vector<int> probe_labels;

  //! Scores of component j restricted to one probe.
  Eigen::VectorXd probe_column(int probe, int j) const;
};

//! Fits the top `n_components` principal components of the mean-subtracted
//! trace matrix via SVD. Component signs are fixed so that the inner product
//! with the mean trace (falling back to the largest-magnitude entry) is
//! positive.
PrincipalBasis fit_basis(const TraceSet& traces, int n_components);

ScoreSet project(const TraceSet& traces, const PrincipalBasis& basis);

//! Rank-k reconstruction: mean + sum of the first k score-weighted
//! components.
TraceSet reconstruct(const ScoreSet& scores, const PrincipalBasis& basis, int k);

}  // namespace pnr::pca
