#include "metsfuse/models/loss.hpp"

#include <cmath>

#include <fmt/format.h>

#include "metsfuse/error.hpp"
#include "metsfuse/numerics/ops.hpp"

namespace metsfuse::models {

using num::Tape;
using num::Tensor;
using num::Var;

namespace {

double squared_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

double pair_term(double d2, bool same, double eps, bool classical) {
  if (same) return d2;
  if (classical) {
    double m = eps - std::sqrt(d2);
    return m > 0.0 ? m * m : 0.0;
  }
  return std::max(0.0, eps - d2);
}

/// Derivative of the pair term with respect to d2 (the squared distance).
double pair_slope(double d2, bool same, double eps, bool classical) {
  if (same) return 1.0;
  if (classical) {
    double d = std::sqrt(d2);
    if (d >= eps || d == 0.0) return 0.0;  // at d = 0 the direction is undefined; no push
    return -(eps - d) / d;
  }
  return eps - d2 > 0.0 ? -1.0 : 0.0;
}

}  // namespace

double contrastive_loss(std::span<const double> zi, std::span<const double> zj, int yi, int yj, double epsilon,
                        bool classical) {
  if (zi.size() != zj.size()) {
    throw ShapeError(fmt::format("contrastive_loss: dimensions {} and {} differ", zi.size(), zj.size()));
  }
  return pair_term(squared_distance(zi.data(), zj.data(), zi.size()), yi == yj, epsilon, classical);
}

Var contrastive_all_pairs(Var z, std::span<const int> labels, double epsilon, bool classical) {
  const Tensor& zv = z.value();
  if (zv.rank() != 2 || zv.rows() != labels.size()) {
    throw ShapeError(fmt::format("contrastive_all_pairs: z {} does not match {} labels", num::to_string(zv.shape()),
                                 labels.size()));
  }
  const std::size_t n = zv.rows(), dim = zv.cols();
  if (n < 2) throw ShapeError("contrastive_all_pairs: a batch of one has no pairs");
  if (!zv.all_finite()) throw NumericError("contrastive_all_pairs: non-finite input");
  std::vector<int> y(labels.begin(), labels.end());
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = squared_distance(zv.data().data() + i * dim, zv.data().data() + j * dim, dim);
      total += pair_term(d2, y[i] == y[j], epsilon, classical);
    }
  }
  return z.tape->record(Tensor::scalar(total / pairs), {z.id},
                        [y = std::move(y), epsilon, classical, pairs](Tape& tape, std::size_t node) {
                          auto in = tape.inputs(node)[0];
                          const Tensor& zv = tape.value(in);
                          const std::size_t n = zv.rows(), dim = zv.cols();
                          double g = tape.out_grad(node).item() / pairs;
                          Tensor& gz = tape.grad(in);
                          for (std::size_t i = 0; i < n; ++i) {
                            for (std::size_t j = i + 1; j < n; ++j) {
                              double d2 = squared_distance(zv.data().data() + i * dim, zv.data().data() + j * dim, dim);
                              double s = g * pair_slope(d2, y[i] == y[j], epsilon, classical);
                              if (s == 0.0) continue;
                              for (std::size_t k = 0; k < dim; ++k) {
                                double diff = 2.0 * (zv.at(i, k) - zv.at(j, k)) * s;
                                gz.at(i, k) += diff;
                                gz.at(j, k) -= diff;
                              }
                            }
                          }
                        });
}

Var cross_entropy(Var probs, std::span<const int> labels) {
  const Tensor& pv = probs.value();
  if (pv.rank() != 2 || pv.cols() != 2 || pv.rows() != labels.size()) {
    throw ShapeError(fmt::format("cross_entropy: probs {} do not match {} labels", num::to_string(pv.shape()),
                                 labels.size()));
  }
  const std::size_t n = labels.size();
  Tensor y({n, 1}), not_y({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = labels[i] ? 1.0 : 0.0;
    not_y[i] = 1.0 - y[i];
  }
  Tape& tape = *probs.tape;
  Var p = num::clamp(num::slice_cols(probs, 1, 1), 1e-12, 1.0 - 1e-12);
  Var q = num::add_scalar(num::scale(p, -1.0), 1.0);
  Var ll = num::add(num::mul(tape.constant(std::move(y)), num::log(p)),
                    num::mul(tape.constant(std::move(not_y)), num::log(q)));
  return num::scale(num::mean(ll), -1.0);
}

LossParts batch_loss(Var probs, Var z, std::span<const int> labels, const HyperParams& hp) {
  LossParts out;
  Var ce = cross_entropy(probs, labels);
  out.ce = ce.value().item();
  if (hp.alpha >= 1.0) {
    out.total = ce;
    out.loss = out.ce;
    return out;
  }
  if (labels.size() < 2) throw ShapeError("batch_loss: alpha < 1 needs a batch of at least two");
  Var con = contrastive_all_pairs(z, labels, hp.epsilon_margin, hp.classical_contrastive);
  out.con = con.value().item();
  out.total = num::add(num::scale(ce, hp.alpha), num::scale(con, 1.0 - hp.alpha));
  out.loss = out.total.value().item();
  return out;
}

}  // namespace metsfuse::models
