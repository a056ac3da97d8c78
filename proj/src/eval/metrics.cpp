#include "metsfuse/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <fmt/format.h>

#include "metsfuse/error.hpp"

namespace metsfuse::eval {
namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels, const char* what) {
  if (scores.size() != labels.size()) {
    throw ShapeError(fmt::format("{}: {} scores but {} labels", what, scores.size(), labels.size()));
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError(fmt::format("{}: non-finite score", what));
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw DataError(fmt::format("{}: labels must be 0 or 1, got {}", what, l));
  }
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels, const char* what) {
  std::size_t pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DataError(fmt::format("{}: both classes must be present", what));
  return {pos, neg};
}

}  // namespace

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_inputs(scores, labels, "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      ++(predicted ? c.tp : c.fn);
    } else {
      ++(predicted ? c.fp : c.tn);
    }
  }
  return c;
}

Metrics metrics(const ConfusionCounts& c) {
  Metrics m;
  auto d = [](std::size_t x) { return static_cast<double>(x); };
  if (c.total() > 0) m.acc = d(c.tp + c.tn) / d(c.total());
  if (c.tp + c.fp == 0) {
    m.pre_degenerate = true;
  } else {
    m.pre = d(c.tp) / d(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    m.rec_degenerate = true;
  } else {
    m.rec = d(c.tp) / d(c.tp + c.fn);
  }
  if (m.pre + m.rec > 0.0) m.f1 = 2.0 * m.pre * m.rec / (m.pre + m.rec);
  return m;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "auroc");
  auto [pos, neg] = class_counts(labels, "auroc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // twice the rank sum of positives, so tied groups stay integral
  double rank_sum2 = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double avg2 = static_cast<double>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum2 += avg2;
    }
    i = j;
  }
  double p = static_cast<double>(pos), n = static_cast<double>(neg);
  double u = 0.5 * rank_sum2 - p * (p + 1.0) / 2.0;
  return u / (p * n);
}

double auroc_trapezoid(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "auroc_trapezoid");
  auto [pos, neg] = class_counts(labels, "auroc_trapezoid");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t tp = 0, fp = 0, prev_tp = 0, prev_fp = 0;
  double area2 = 0.0;  // in units of 1/(pos*neg), doubled
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      ++(labels[order[j]] == 1 ? tp : fp);
      ++j;
    }
    area2 += static_cast<double>(fp - prev_fp) * static_cast<double>(tp + prev_tp);
    prev_tp = tp;
    prev_fp = fp;
    i = j;
  }
  return area2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

nlohmann::json Scores::to_json() const {
  return {{"acc", acc}, {"pre", pre}, {"rec", rec}, {"f1", f1}, {"auroc", auroc},
          {"pre_degenerate", pre_degenerate}, {"rec_degenerate", rec_degenerate}};
}

Scores evaluate(std::span<const double> scores, std::span<const int> labels, double threshold) {
  auto m = metrics(confusion(scores, labels, threshold));
  Scores s;
  s.acc = m.acc;
  s.pre = m.pre;
  s.rec = m.rec;
  s.f1 = m.f1;
  s.pre_degenerate = m.pre_degenerate;
  s.rec_degenerate = m.rec_degenerate;
  s.auroc = eval::auroc(scores, labels);
  return s;
}

}  // namespace metsfuse::eval
