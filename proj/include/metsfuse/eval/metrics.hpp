#pragma once

#include <cstddef>
#include <span>

#include <nlohmann/json.hpp>

namespace metsfuse::eval {

struct ConfusionCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::size_t total() const noexcept { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Positive prediction iff score >= threshold.
ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// ACC, PRE, REC, F1. Undefined precision (no positive predictions) or recall (no
/// positives) is reported as 0 with its flag set; F1 is 0 when PRE + REC is 0.
struct Metrics {
  double acc = 0.0, pre = 0.0, rec = 0.0, f1 = 0.0;
  bool pre_degenerate = false, rec_degenerate = false;
};

Metrics metrics(const ConfusionCounts& c);

/// Probability that a random positive outscores a random negative, ties counted 1/2,
/// from the rank-sum (Mann-Whitney) statistic with averaged tie ranks. Throws DataError
/// unless both classes are present.
double auroc(std::span<const double> scores, std::span<const int> labels);
/// Same quantity by trapezoidal integration of the ROC curve.
double auroc_trapezoid(std::span<const double> scores, std::span<const int> labels);

/// All five scores at one threshold.
struct Scores {
  double acc = 0.0, pre = 0.0, rec = 0.0, f1 = 0.0, auroc = 0.0;
  bool pre_degenerate = false, rec_degenerate = false;

  nlohmann::json to_json() const;
};

Scores evaluate(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

}  // namespace metsfuse::eval
