#include "pnr/pca.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "pnr/errors.hpp"

namespace pnr::pca {

namespace {

// Deterministic sign convention: positive inner product with the mean trace,
// falling back to a positive largest-magnitude entry when that projection is
// negligible.
void fix_signs(Eigen::MatrixXd& components, const Eigen::VectorXd& mean_trace) {
  const double tol = 1e-12 * (1.0 + mean_trace.norm());
  for (Eigen::Index j = 0; j < components.cols(); ++j) {
    const double d = components.col(j).dot(mean_trace);
    double sign = 0.0;
    if (std::abs(d) > tol) {
      sign = d > 0 ? 1.0 : -1.0;
    } else {
      Eigen::Index imax = 0;
      components.col(j).cwiseAbs().maxCoeff(&imax);
      sign = components(imax, j) >= 0 ? 1.0 : -1.0;
    }
    components.col(j) *= sign;
  }
}

}  // namespace

Eigen::VectorXd ScoreSet::probe_column(int probe, int j) const {
  Eigen::Index count = 0;
  for (int label : probe_labels)
    if (label == probe) ++count;
  Eigen::VectorXd out(count);
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    if (probe_labels[static_cast<std::size_t>(i)] == probe) out[at++] = scores(i, j);
  return out;
}

PrincipalBasis fit_basis(const TraceSet& traces, int n_components) {
  const Eigen::Index trials = traces.trial_count();
  const Eigen::Index samples = traces.sample_count();
  if (trials < 1) throw DimensionError("fit_basis: empty trace set");
  if (n_components < 1 || n_components > std::min(trials, samples))
    throw DimensionError("fit_basis: n_components out of range");
  if (!traces.data.allFinite()) throw DimensionError("fit_basis: non-finite trace entries");

  PrincipalBasis basis;
  basis.mean_trace = traces.data.colwise().mean();
  Eigen::MatrixXd centered = traces.data.rowwise() - basis.mean_trace.transpose();

  // SVD on the centered matrix directly; the right singular vectors are the
  // principal components and the squared singular values give the score
  // variances.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  basis.components = svd.matrixV().leftCols(n_components);
  const double denom = trials > 1 ? static_cast<double>(trials - 1) : 1.0;
  basis.variances =
      svd.singularValues().head(n_components).array().square().matrix() / denom;
  fix_signs(basis.components, basis.mean_trace);
  return basis;
}

ScoreSet project(const TraceSet& traces, const PrincipalBasis& basis) {
  if (traces.sample_count() != basis.sample_count())
    throw DimensionError("project: trace length does not match basis");
  ScoreSet out;
  out.scores = (traces.data.rowwise() - basis.mean_trace.transpose()) * basis.components;
  out.probe_labels = traces.probe_labels;
  return out;
}

TraceSet reconstruct(const ScoreSet& scores, const PrincipalBasis& basis, int k) {
  if (k < 0 || k > basis.n_components() || k > scores.scores.cols())
    throw DimensionError("reconstruct: k out of range");
  TraceSet out;
  out.data = scores.scores.leftCols(k) * basis.components.leftCols(k).transpose();
  out.data.rowwise() += basis.mean_trace.transpose();
  out.probe_labels = scores.probe_labels;
  return out;
}

}  // namespace pnr::pca
