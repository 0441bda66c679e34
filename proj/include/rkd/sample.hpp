#pragma once

#include <Eigen/Dense>
#include <optional>

namespace rkd {

//! Observed outcome and running variable, plus the treatment when recorded.
struct Sample
{
  Eigen::VectorXd y;
  Eigen::VectorXd x;
  std::optional<Eigen::VectorXd> b;

  Eigen::Index size() const { return x.size(); }

  //! Throws std::invalid_argument on empty input, length mismatch, or
  //! non-finite entries.
  void validate() const;
};

} // namespace rkd
