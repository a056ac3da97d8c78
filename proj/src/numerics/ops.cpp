#include "metsfuse/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "metsfuse/error.hpp"

namespace metsfuse::num {
namespace {

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw ShapeError(fmt::format("{}: {}", op, detail));
}

void require_finite(const char* op, const Tensor& t) {
  if (!t.all_finite()) throw NumericError(fmt::format("{}: non-finite input of shape {}", op, to_string(t.shape())));
}

void require_same_tape(const char* op, Var a, Var b) {
  require(a.tape == b.tape && a.tape != nullptr, op, "operands live on different tapes");
}

void require_rank2(const char* op, const Tensor& t) {
  require(t.rank() == 2, op, fmt::format("expected a rank-2 tensor, got {}", to_string(t.shape())));
}

void accumulate(Tensor& dst, const Tensor& src) {
  auto& d = dst.storage();
  const auto& s = src.storage();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <typename F>
Var unary(const char* op, Var x, F&& f, std::function<double(double x, double y)> dfdx) {
  const Tensor& xv = x.value();
  require_finite(op, xv);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return x.tape->record(std::move(out), {x.id}, [dfdx = std::move(dfdx)](Tape& tape, std::size_t node) {
    auto in = tape.inputs(node)[0];
    const Tensor& xv = tape.value(in);
    const Tensor& yv = tape.value(node);
    const Tensor& g = tape.out_grad(node);
    Tensor& gx = tape.grad(in);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2("matmul", av);
  require_rank2("matmul", bv);
  require(av.cols() == bv.rows(), "matmul",
          fmt::format("shapes {} and {} do not conform", to_string(av.shape()), to_string(bv.shape())));
  require_finite("matmul", av);
  require_finite("matmul", bv);
  const std::size_t m = av.rows();
  const std::size_t k = av.cols();
  const std::size_t n = bv.cols();
  Tensor out({m, n});
  const double* A = av.data().data();
  const double* B = bv.data().data();
  double* C = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return a.tape->record(std::move(out), {a.id, b.id}, [m, k, n](Tape& tape, std::size_t node) {
    const auto& ins = tape.inputs(node);
    const double* G = tape.out_grad(node).data().data();
    const double* A = tape.value(ins[0]).data().data();
    const double* B = tape.value(ins[1]).data().data();
    if (tape.needs_grad(ins[0])) {
      double* GA = tape.grad(ins[0]).data().data();
      // Transposing B turns the inner dot products into contiguous axpy updates.
      std::vector<double> bt(k * n);
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = B[p * n + j];
      }
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G + i * n;
        double* garow = GA + i * k;
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = grow[j];
          const double* btrow = bt.data() + j * k;
          for (std::size_t p = 0; p < k; ++p) garow[p] += gij * btrow[p];
        }
      }
    }
    if (tape.needs_grad(ins[1])) {
      double* GB = tape.grad(ins[1]).data().data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          double* gbrow = GB + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

namespace {

Var binary_same_shape(const char* op, Var a, Var b, int kind) {
  require_same_tape(op, a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.shape() == bv.shape(), op,
          fmt::format("shapes {} and {} differ", to_string(av.shape()), to_string(bv.shape())));
  require_finite(op, av);
  require_finite(op, bv);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = kind == 0 ? av[i] + bv[i] : kind == 1 ? av[i] - bv[i] : av[i] * bv[i];
  }
  return a.tape->record(std::move(out), {a.id, b.id}, [kind](Tape& tape, std::size_t node) {
    const auto& ins = tape.inputs(node);
    const Tensor& g = tape.out_grad(node);
    if (tape.needs_grad(ins[0])) {
      Tensor& ga = tape.grad(ins[0]);
      const Tensor& bv = tape.value(ins[1]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += kind == 2 ? g[i] * bv[i] : g[i];
    }
    if (tape.needs_grad(ins[1])) {
      Tensor& gb = tape.grad(ins[1]);
      const Tensor& av = tape.value(ins[0]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        gb[i] += kind == 0 ? g[i] : kind == 1 ? -g[i] : g[i] * av[i];
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return binary_same_shape("add", a, b, 0); }
Var sub(Var a, Var b) { return binary_same_shape("sub", a, b, 1); }
Var mul(Var a, Var b) { return binary_same_shape("mul", a, b, 2); }

Var scale(Var x, double factor) {
  return unary("scale", x, [factor](double v) { return v * factor; },
               [factor](double, double) { return factor; });
}

Var add_scalar(Var x, double value) {
  return unary("add_scalar", x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Var add_bias(Var x, Var bias) {
  require_same_tape("add_bias", x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require_rank2("add_bias", xv);
  require(bv.size() == xv.cols() && bv.rows() == 1, "add_bias",
          fmt::format("bias {} does not match input {}", to_string(bv.shape()), to_string(xv.shape())));
  require_finite("add_bias", xv);
  require_finite("add_bias", bv);
  const std::size_t m = xv.rows();
  const std::size_t n = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  }
  return x.tape->record(std::move(out), {x.id, bias.id}, [m, n](Tape& tape, std::size_t node) {
    const auto& ins = tape.inputs(node);
    const Tensor& g = tape.out_grad(node);
    if (tape.needs_grad(ins[0])) accumulate(tape.grad(ins[0]), g);
    if (tape.needs_grad(ins[1])) {
      Tensor& gb = tape.grad(ins[1]);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
      }
    }
  });
}

Var reshape(Var x, Shape shape) {
  const Tensor& xv = x.value();
  require(element_count(shape) == xv.size(), "reshape",
          fmt::format("cannot reshape {} to {}", to_string(xv.shape()), to_string(shape)));
  return x.tape->record(xv.reshaped(std::move(shape)), {x.id}, [](Tape& tape, std::size_t node) {
    auto in = tape.inputs(node)[0];
    auto& gi = tape.grad(in).storage();
    const auto& g = tape.out_grad(node).storage();
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i];
  });
}

Var relu(Var x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var gelu(Var x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  return unary("gelu", x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
               [](double v, double) {
                 const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
                 return cdf + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
               });
}

Var log(Var x) {
  const Tensor& xv = x.value();
  for (double v : xv.storage()) {
    if (!(v > 0.0)) throw NumericError(fmt::format("log: non-positive input {}", v));
  }
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var clamp(Var x, double lo, double hi) {
  return unary("clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Var softmax(Var x) {
  const Tensor& xv = x.value();
  require(xv.rank() >= 1 && xv.rank() <= 2, "softmax", "expected rank 1 or 2, got " + to_string(xv.shape()));
  require_finite("softmax", xv);
  const std::size_t m = xv.rows();
  const std::size_t n = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data().data() + i * n;
    double* o = out.data().data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += (o[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  return x.tape->record(std::move(out), {x.id}, [m, n](Tape& tape, std::size_t node) {
    auto in = tape.inputs(node)[0];
    const Tensor& y = tape.value(node);
    const Tensor& g = tape.out_grad(node);
    Tensor& gx = tape.grad(in);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  require_same_tape("layer_norm", x, gamma);
  require_same_tape("layer_norm", x, beta);
  const Tensor& xv = x.value();
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  require(xv.rank() >= 1 && xv.rank() <= 2, "layer_norm", "expected rank 1 or 2, got " + to_string(xv.shape()));
  const std::size_t m = xv.rows();
  const std::size_t n = xv.cols();
  require(gv.size() == n && bv.size() == n, "layer_norm",
          fmt::format("gain {} / shift {} do not match input {}", to_string(gv.shape()), to_string(bv.shape()),
                      to_string(xv.shape())));
  require_finite("layer_norm", xv);
  require_finite("layer_norm", gv);
  require_finite("layer_norm", bv);
  Tensor out(xv.shape());
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data().data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mu) * inv_std[i];
      out[i * n + j] = xhat[i * n + j] * gv[j] + bv[j];
    }
  }
  return x.tape->record(
      std::move(out), {x.id, gamma.id, beta.id},
      [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tape, std::size_t node) {
        const auto& ins = tape.inputs(node);
        const Tensor& g = tape.out_grad(node);
        const Tensor& gv = tape.value(ins[1]);
        if (tape.needs_grad(ins[1])) {
          Tensor& gg = tape.grad(ins[1]);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
        }
        if (tape.needs_grad(ins[2])) {
          Tensor& gb = tape.grad(ins[2]);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
        if (tape.needs_grad(ins[0])) {
          Tensor& gx = tape.grad(ins[0]);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double sum_d = 0.0;
            double sum_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = g[i * n + j] * gv[j];
              sum_d += d;
              sum_dx += d * xhat[i * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
              const double d = g[i * n + j] * gv[j];
              gx[i * n + j] += inv_std[i] * (d - inv_n * sum_d - xhat[i * n + j] * inv_n * sum_dx);
            }
          }
        }
      });
}

Var masked_mean_pool(Var x, std::span<const double> mask, std::size_t batch, std::size_t seq) {
  const Tensor& xv = x.value();
  require_rank2("masked_mean_pool", xv);
  require(xv.rows() == batch * seq && mask.size() == batch * seq, "masked_mean_pool",
          fmt::format("input {} / mask of {} do not match batch {} x seq {}", to_string(xv.shape()), mask.size(),
                      batch, seq));
  require_finite("masked_mean_pool", xv);
  const std::size_t d = xv.cols();
  std::vector<double> counts(batch, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < seq; ++t) counts[b] += mask[b * seq + t] != 0.0 ? 1.0 : 0.0;
    require(counts[b] > 0.0, "masked_mean_pool", fmt::format("sequence {} has no unmasked rows", b));
  }
  Tensor out({batch, d});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < seq; ++t) {
      if (mask[b * seq + t] == 0.0) continue;
      const double* row = xv.data().data() + (b * seq + t) * d;
      for (std::size_t j = 0; j < d; ++j) out[b * d + j] += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) out[b * d + j] /= counts[b];
  }
  std::vector<double> mask_copy(mask.begin(), mask.end());
  return x.tape->record(std::move(out), {x.id},
                        [batch, seq, d, counts = std::move(counts), mask = std::move(mask_copy)](Tape& tape,
                                                                                               std::size_t node) {
                          auto in = tape.inputs(node)[0];
                          const Tensor& g = tape.out_grad(node);
                          Tensor& gx = tape.grad(in);
                          for (std::size_t b = 0; b < batch; ++b) {
                            for (std::size_t t = 0; t < seq; ++t) {
                              if (mask[b * seq + t] == 0.0) continue;
                              for (std::size_t j = 0; j < d; ++j) {
                                gx[(b * seq + t) * d + j] += g[b * d + j] / counts[b];
                              }
                            }
                          }
                        });
}

Var select_rows(Var x, std::span<const std::size_t> rows) {
  const Tensor& xv = x.value();
  require_rank2("select_rows", xv);
  const std::size_t d = xv.cols();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  require(!idx.empty(), "select_rows", "no rows selected");
  for (auto r : idx) require(r < xv.rows(), "select_rows", fmt::format("row {} out of range for {}", r, to_string(xv.shape())));
  require_finite("select_rows", xv);
  Tensor out({idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(xv.data().data() + idx[i] * d, d, out.data().data() + i * d);
  }
  return x.tape->record(std::move(out), {x.id}, [d, idx = std::move(idx)](Tape& tape, std::size_t node) {
    auto in = tape.inputs(node)[0];
    const Tensor& g = tape.out_grad(node);
    Tensor& gx = tape.grad(in);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) gx[idx[i] * d + j] += g[i * d + j];
    }
  });
}

Var concat(std::span<const Var> parts) {
  require(!parts.empty(), "concat", "no inputs");
  const std::size_t m = parts[0].value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    require_same_tape("concat", parts[0], p);
    const Tensor& v = p.value();
    require_rank2("concat", v);
    require(v.rows() == m, "concat",
            fmt::format("row counts differ: {} vs {}", to_string(parts[0].shape()), to_string(v.shape())));
    require_finite("concat", v);
    widths.push_back(v.cols());
    ids.push_back(p.id);
    total += v.cols();
  }
  Tensor out({m, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(v.data().data() + i * widths[k], widths[k], out.data().data() + i * total + offset);
    }
    offset += widths[k];
  }
  return parts[0].tape->record(std::move(out), std::move(ids),
                               [m, total, widths = std::move(widths)](Tape& tape, std::size_t node) {
                                 const auto& ins = tape.inputs(node);
                                 const Tensor& g = tape.out_grad(node);
                                 std::size_t offset = 0;
                                 for (std::size_t k = 0; k < ins.size(); ++k) {
                                   if (tape.needs_grad(ins[k])) {
                                     Tensor& gk = tape.grad(ins[k]);
                                     for (std::size_t i = 0; i < m; ++i) {
                                       for (std::size_t j = 0; j < widths[k]; ++j) {
                                         gk[i * widths[k] + j] += g[i * total + offset + j];
                                       }
                                     }
                                   }
                                   offset += widths[k];
                                 }
                               });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  require_rank2("slice_cols", xv);
  require(count > 0 && begin + count <= xv.cols(), "slice_cols",
          fmt::format("columns [{}, {}) out of range for {}", begin, begin + count, to_string(xv.shape())));
  require_finite("slice_cols", xv);
  const std::size_t m = xv.rows();
  const std::size_t n = xv.cols();
  Tensor out({m, count});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = xv[i * n + begin + j];
  }
  return x.tape->record(std::move(out), {x.id}, [m, n, begin, count](Tape& tape, std::size_t node) {
    auto in = tape.inputs(node)[0];
    const Tensor& g = tape.out_grad(node);
    Tensor& gx = tape.grad(in);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < count; ++j) gx[i * n + begin + j] += g[i * count + j];
    }
  });
}

Var embedding(Var table, std::span<const std::size_t> ids) {
  const Tensor& tv = table.value();
  require_rank2("embedding", tv);
  require(!ids.empty(), "embedding", "empty id list");
  const std::size_t d = tv.cols();
  for (auto id : ids) {
    require(id < tv.rows(), "embedding", fmt::format("id {} out of range for table {}", id, to_string(tv.shape())));
  }
  require_finite("embedding", tv);
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  Tensor out({idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(tv.data().data() + idx[i] * d, d, out.data().data() + i * d);
  }
  return table.tape->record(std::move(out), {table.id}, [d, idx = std::move(idx)](Tape& tape, std::size_t node) {
    auto in = tape.inputs(node)[0];
    const Tensor& g = tape.out_grad(node);
    Tensor& gt = tape.grad(in);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) gt[idx[i] * d + j] += g[i * d + j];
    }
  });
}

Var dropout(Var x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError(fmt::format("dropout: probability {} outside [0, 1)", p));
  if (mode == Mode::Eval || p == 0.0) return x;
  const Tensor& xv = x.value();
  require_finite("dropout", xv);
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> factor(xv.size());
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    factor[i] = rng.uniform() < p ? 0.0 : keep_scale;
    out[i] = xv[i] * factor[i];
  }
  return x.tape->record(std::move(out), {x.id}, [factor = std::move(factor)](Tape& tape, std::size_t node) {
    auto in = tape.inputs(node)[0];
    const Tensor& g = tape.out_grad(node);
    Tensor& gx = tape.grad(in);
    for (std::size_t i = 0; i < factor.size(); ++i) gx[i] += g[i] * factor[i];
  });
}

Var sum(Var x) {
  const Tensor& xv = x.value();
  require_finite("sum", xv);
  double total = 0.0;
  for (double v : xv.storage()) total += v;
  return x.tape->record(Tensor::scalar(total), {x.id}, [](Tape& tape, std::size_t node) {
    auto in = tape.inputs(node)[0];
    const double g = tape.out_grad(node)[0];
    for (auto& v : tape.grad(in).storage()) v += g;
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var multi_head_attention(Var q, Var k, Var v, std::span<const double> key_mask, std::size_t batch, std::size_t seq,
                         std::size_t heads) {
  require_same_tape("multi_head_attention", q, k);
  require_same_tape("multi_head_attention", q, v);
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  require_rank2("multi_head_attention", qv);
  require(qv.shape() == kv.shape() && qv.shape() == vv.shape(), "multi_head_attention",
          fmt::format("q {} k {} v {} differ", to_string(qv.shape()), to_string(kv.shape()), to_string(vv.shape())));
  require(qv.rows() == batch * seq && key_mask.size() == batch * seq, "multi_head_attention",
          fmt::format("rows {} / mask {} do not match batch {} x seq {}", qv.rows(), key_mask.size(), batch, seq));
  require(heads > 0 && qv.cols() % heads == 0, "multi_head_attention",
          fmt::format("width {} not divisible by {} heads", qv.cols(), heads));
  require_finite("multi_head_attention", qv);
  require_finite("multi_head_attention", kv);
  require_finite("multi_head_attention", vv);
  const std::size_t d = qv.cols();
  const std::size_t dh = d / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> mask(key_mask.begin(), key_mask.end());
  // probs[((b * heads + h) * seq + i) * seq + j]; zero on padded keys.
  std::vector<double> probs(batch * heads * seq * seq, 0.0);
  Tensor out({batch * seq, d});
  const double* Q = qv.data().data();
  const double* K = kv.data().data();
  const double* V = vv.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    bool any = false;
    for (std::size_t j = 0; j < seq; ++j) any = any || mask[b * seq + j] != 0.0;
    require(any, "multi_head_attention", fmt::format("sequence {} has no unmasked keys", b));
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < seq; ++i) {
        double* p = probs.data() + ((b * heads + h) * seq + i) * seq;
        const double* qi = Q + (b * seq + i) * d + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < seq; ++j) {
          if (mask[b * seq + j] == 0.0) continue;
          const double* kj = K + (b * seq + j) * d + h * dh;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          p[j] = s * scale_factor;
          mx = std::max(mx, p[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < seq; ++j) {
          if (mask[b * seq + j] == 0.0) continue;
          p[j] = std::exp(p[j] - mx);
          total += p[j];
        }
        double* oi = out.data().data() + (b * seq + i) * d + h * dh;
        for (std::size_t j = 0; j < seq; ++j) {
          if (mask[b * seq + j] == 0.0) continue;
          p[j] /= total;
          const double* vj = V + (b * seq + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) oi[c] += p[j] * vj[c];
        }
      }
    }
  }
  return q.tape->record(
      std::move(out), {q.id, k.id, v.id},
      [batch, seq, heads, d, dh, scale_factor, mask = std::move(mask), probs = std::move(probs)](Tape& tape,
                                                                                              std::size_t node) {
        const auto& ins = tape.inputs(node);
        const double* G = tape.out_grad(node).data().data();
        const double* Q = tape.value(ins[0]).data().data();
        const double* K = tape.value(ins[1]).data().data();
        const double* V = tape.value(ins[2]).data().data();
        const bool need_q = tape.needs_grad(ins[0]);
        const bool need_k = tape.needs_grad(ins[1]);
        const bool need_v = tape.needs_grad(ins[2]);
        double* GQ = need_q ? tape.grad(ins[0]).data().data() : nullptr;
        double* GK = need_k ? tape.grad(ins[1]).data().data() : nullptr;
        double* GV = need_v ? tape.grad(ins[2]).data().data() : nullptr;
        std::vector<double> dp(seq);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t i = 0; i < seq; ++i) {
              const double* p = probs.data() + ((b * heads + h) * seq + i) * seq;
              const double* gi = G + (b * seq + i) * d + h * dh;
              double weighted = 0.0;
              for (std::size_t j = 0; j < seq; ++j) {
                dp[j] = 0.0;
                if (mask[b * seq + j] == 0.0) continue;
                const double* vj = V + (b * seq + j) * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) dp[j] += gi[c] * vj[c];
                weighted += p[j] * dp[j];
                if (need_v) {
                  double* gvj = GV + (b * seq + j) * d + h * dh;
                  for (std::size_t c = 0; c < dh; ++c) gvj[c] += p[j] * gi[c];
                }
              }
              const double* qi = Q + (b * seq + i) * d + h * dh;
              for (std::size_t j = 0; j < seq; ++j) {
                if (mask[b * seq + j] == 0.0) continue;
                const double ds = p[j] * (dp[j] - weighted) * scale_factor;
                const double* kj = K + (b * seq + j) * d + h * dh;
                if (need_q) {
                  double* gqi = GQ + (b * seq + i) * d + h * dh;
                  for (std::size_t c = 0; c < dh; ++c) gqi[c] += ds * kj[c];
                }
                if (need_k) {
                  double* gkj = GK + (b * seq + j) * d + h * dh;
                  for (std::size_t c = 0; c < dh; ++c) gkj[c] += ds * qi[c];
                }
              }
            }
          }
        }
      });
}

}  // namespace metsfuse::num
