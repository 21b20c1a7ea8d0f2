#pragma once

#include <Eigen/Core>
#include <vector>

namespace pnr {

//! A set of raw detector signals, one trial per row, one time sample per
//! column. `probe_labels`, when nonempty, assigns each row to the probe it
//! was recorded with (indices into an external probe table).
struct TraceSet {
  Eigen::MatrixXd data;
  std::vector<int> probe_labels;

  Eigen::Index trial_count() const { return data.rows(); }
  Eigen::Index sample_count() const { return data.cols(); }
};

}  // namespace pnr
