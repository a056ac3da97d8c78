#include "metsfuse/cohort/stats.hpp"

#include <cmath>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "metsfuse/error.hpp"

namespace metsfuse::cohort {

double mean(std::span<const double> x) {
  if (x.empty()) throw NumericError("mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw NumericError("variance needs at least two values");
  double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw NumericError(fmt::format("welch_t_test: samples of size {} and {}; need at least 2 each", a.size(), b.size()));
  }
  double va = sample_variance(a), vb = sample_variance(b);
  if (!(va > 0.0) || !(vb > 0.0)) {
    throw NumericError(fmt::format("welch_t_test: degenerate variance ({}, {})", va, vb));
  }
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double sa = va / na, sb = vb / nb;
  WelchResult r;
  r.t = (mean(a) - mean(b)) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
  if (r.p > 1.0) r.p = 1.0;
  return r;
}

}  // namespace metsfuse::cohort
