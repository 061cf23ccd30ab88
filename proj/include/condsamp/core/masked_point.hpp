#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "condsamp/core/error.hpp"

namespace condsamp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A data vector split into observed (mask true) and missing coordinates.
///
/// Values at missing coordinates are carried along but never read by the
/// samplers; they are kept so that generated tasks can retain the ground truth.
class MaskedPoint {
 public:
  MaskedPoint() = default;

  MaskedPoint(Vector values, std::vector<bool> mask) : values_(std::move(values)), mask_(std::move(mask)) {
    if (values_.size() == 0 || static_cast<std::size_t>(values_.size()) != mask_.size())
      throw UsageError("MaskedPoint: mask and values must have equal length >= 1");
    for (std::size_t i = 0; i < mask_.size(); ++i) (mask_[i] ? observed_ : missing_).push_back(i);
  }

  [[nodiscard]] std::size_t size() const { return mask_.size(); }
  [[nodiscard]] const Vector& values() const { return values_; }
  [[nodiscard]] const std::vector<bool>& mask() const { return mask_; }
  [[nodiscard]] bool observed(std::size_t i) const { return mask_[i]; }
  [[nodiscard]] const std::vector<std::size_t>& observed_indices() const { return observed_; }
  [[nodiscard]] const std::vector<std::size_t>& missing_indices() const { return missing_; }
  [[nodiscard]] std::size_t n_missing() const { return missing_.size(); }
  [[nodiscard]] std::size_t n_observed() const { return observed_.size(); }

  /// True when the point can be used for conditional sampling.
  [[nodiscard]] bool is_conditional_task() const { return !observed_.empty() && !missing_.empty(); }

  void require_conditional_task() const {
    if (!is_conditional_task())
      throw UsageError("conditional sampling needs at least one observed and one missing coordinate");
  }

  [[nodiscard]] Vector observed_values() const {
    Vector out(static_cast<Eigen::Index>(observed_.size()));
    for (std::size_t j = 0; j < observed_.size(); ++j) out[static_cast<Eigen::Index>(j)] = values_[idx(observed_[j])];
    return out;
  }

  /// Missing-coordinate values stored in the point (ground truth, if known).
  [[nodiscard]] Vector missing_values() const { return gather_missing(values_); }

  [[nodiscard]] Vector gather_missing(const Vector& full) const {
    Vector out(static_cast<Eigen::Index>(missing_.size()));
    for (std::size_t j = 0; j < missing_.size(); ++j) out[static_cast<Eigen::Index>(j)] = full[idx(missing_[j])];
    return out;
  }

  /// Observed values merged with a candidate imputation.
  [[nodiscard]] Vector merge(const Vector& x_mis) const {
    if (static_cast<std::size_t>(x_mis.size()) != missing_.size())
      throw UsageError("merge: imputation length " + std::to_string(x_mis.size()) + " != missing count " +
                       std::to_string(missing_.size()));
    Vector full = values_;
    for (std::size_t j = 0; j < missing_.size(); ++j) full[idx(missing_[j])] = x_mis[static_cast<Eigen::Index>(j)];
    return full;
  }

 private:
  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

  Vector values_;
  std::vector<bool> mask_;
  std::vector<std::size_t> observed_;
  std::vector<std::size_t> missing_;
};

}  // namespace condsamp
