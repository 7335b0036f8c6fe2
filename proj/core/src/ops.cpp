#include "gcgpn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gcgpn/errors.hpp"

namespace gcgpn {
namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw TapeError("operation on an unbound variable");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw TapeError("operands recorded on different tapes");
  return t;
}

void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                     shape_string(b));
  }
}

void require_scalar(const Matrix& s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw ShapeError(std::string(op) + ": expected 1x1 scalar, got " + shape_string(s));
  }
}

// Per-row norms with the epsilon guard resolved: 0 means pass-through.
std::vector<double> guarded_row_norms(const Matrix& x) {
  std::vector<double> norms(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double sq = 0.0;
    for (double v : x.row(r)) sq += v * v;
    const double n = std::sqrt(sq);
    norms[r] = n > kNormEpsilon ? n : 0.0;
  }
  return norms;
}

Matrix softmax_impl(const Matrix& x, const Matrix* mask, double beta) {
  Matrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (mask == nullptr || (*mask)(r, c) != 0.0) mx = std::max(mx, beta * x(r, c));
    }
    if (!std::isfinite(mx)) continue;  // fully masked row
    double total = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (mask != nullptr && (*mask)(r, c) == 0.0) continue;
      const double e = std::exp(beta * x(r, c) - mx);
      y(r, c) = e;
      total += e;
    }
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) /= total;
  }
  return y;
}

// Shared backward for (masked) softmax of beta * x. Masked entries have y = 0
// and therefore contribute nothing.
void softmax_backward(Tape& t, Var x, Var beta_var, bool beta_is_var, double beta,
                      const Matrix& y, const Matrix& g) {
  const Matrix& xv = x.value();
  const bool want_x = t.requires_grad(x);
  const bool want_beta = beta_is_var && t.requires_grad(beta_var);
  double dbeta = 0.0;
  Matrix* gx = want_x ? &t.grad_of(x) : nullptr;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
    for (std::size_t c = 0; c < y.cols(); ++c) {
      const double local = y(r, c) * (g(r, c) - dot);
      if (gx != nullptr) (*gx)(r, c) += beta * local;
      if (want_beta) dbeta += xv(r, c) * local;
    }
  }
  if (want_beta) t.grad_of(beta_var)(0, 0) += dbeta;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_shape(av.cols() == bv.rows(), "matmul", av, bv);
  return t.record(product(av, bv), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_of(a) += product(g, b.value().transposed());
    if (t.requires_grad(b)) t.grad_of(b) += product(a.value().transposed(), g);
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  return t.record(a.value().transposed(), {a},
                  [a](Tape& t, const Matrix& g) { t.grad_of(a) += g.transposed(); });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_shape(a.value().same_shape(b.value()), "add", a.value(), b.value());
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_of(a) += g;
    if (t.requires_grad(b)) t.grad_of(b) += g;
  });
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw ShapeError("add_n of an empty list");
  Var acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  return t.record(a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) { t.grad_of(a) += g * s; });
}

Var mul_scalar(Var a, Var s) {
  Tape& t = tape_of(a, s);
  require_scalar(s.value(), "mul_scalar");
  return t.record(a.value() * s.value().item(), {a, s}, [a, s](Tape& t, const Matrix& g) {
    const double sv = s.value().item();
    if (t.requires_grad(a)) t.grad_of(a) += g * sv;
    if (t.requires_grad(s)) {
      double d = 0.0;
      const Matrix& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) d += g[i] * av[i];
      t.grad_of(s)(0, 0) += d;
    }
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_shape(a.value().same_shape(b.value()), "hadamard", a.value(), b.value());
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) {
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (t.requires_grad(b)) {
      Matrix& gb = t.grad_of(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
}

Var exp(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value();
  for (double& v : out.data()) v = std::exp(v);
  return t.record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * std::exp(a.value()[i]);
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value();
  for (double& v : out.data()) v = std::max(v, 0.0);
  return t.record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (a.value()[i] > 0.0) ga[i] += g[i];
    }
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return t.record(Matrix::scalar(s), {a}, [a](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_of(a);
    const double gv = g(0, 0);
    for (double& v : ga.data()) v += gv;
  });
}

Var mul_cols(Var a, Var v) {
  Tape& t = tape_of(a, v);
  const Matrix& av = a.value();
  const Matrix& vv = v.value();
  require_shape(vv.rows() == 1 && vv.cols() == av.cols(), "mul_cols", av, vv);
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= vv(0, c);
  return t.record(std::move(out), {a, v}, [a, v](Tape& t, const Matrix& g) {
    const Matrix& av = a.value();
    const Matrix& vv = v.value();
    if (t.requires_grad(a)) {
      Matrix& ga = t.grad_of(a);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) += g(r, c) * vv(0, c);
    }
    if (t.requires_grad(v)) {
      Matrix& gv = t.grad_of(v);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gv(0, c) += g(r, c) * av(r, c);
    }
  });
}

Var add_row(Var a, Var v) {
  Tape& t = tape_of(a, v);
  const Matrix& av = a.value();
  const Matrix& vv = v.value();
  require_shape(vv.rows() == 1 && vv.cols() == av.cols(), "add_row", av, vv);
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += vv(0, c);
  return t.record(std::move(out), {a, v}, [a, v](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_of(a) += g;
    if (t.requires_grad(v)) {
      Matrix& gv = t.grad_of(v);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gv(0, c) += g(r, c);
    }
  });
}

Var mul_mask(Var a, const Matrix& mask) {
  Tape& t = tape_of(a);
  require_shape(a.value().same_shape(mask), "mul_mask", a.value(), mask);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return t.record(std::move(out), {a}, [a, mask](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

Matrix row_normalized(const Matrix& x) {
  const auto norms = guarded_row_norms(x);
  Matrix y = x;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    if (norms[r] == 0.0) continue;
    for (double& v : y.row(r)) v /= norms[r];
  }
  return y;
}

Var row_normalize(Var x) {
  Tape& t = tape_of(x);
  auto norms = guarded_row_norms(x.value());
  Matrix y = x.value();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    if (norms[r] == 0.0) continue;
    for (double& v : y.row(r)) v /= norms[r];
  }
  Matrix saved = t.recording() ? y : Matrix{};
  return t.record(std::move(y), {x},
                  [x, norms = std::move(norms), y = std::move(saved)](Tape& t, const Matrix& g) {
                    Matrix& gx = t.grad_of(x);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      if (norms[r] == 0.0) continue;
                      double dot = 0.0;
                      for (std::size_t c = 0; c < g.cols(); ++c) dot += g(r, c) * y(r, c);
                      for (std::size_t c = 0; c < g.cols(); ++c) {
                        gx(r, c) += (g(r, c) - y(r, c) * dot) / norms[r];
                      }
                    }
                  });
}

Matrix softmax_rows(const Matrix& x, double inv_temperature) {
  return softmax_impl(x, nullptr, inv_temperature);
}

Var softmax_rows(Var x, double inv_temperature) {
  Tape& t = tape_of(x);
  Matrix y = softmax_impl(x.value(), nullptr, inv_temperature);
  Matrix saved = t.recording() ? y : Matrix{};
  return t.record(std::move(y), {x},
                  [x, inv_temperature, y = std::move(saved)](Tape& t, const Matrix& g) {
                    softmax_backward(t, x, Var{}, false, inv_temperature, y, g);
                  });
}

Var softmax_rows(Var x, Var inv_temperature) {
  Tape& t = tape_of(x, inv_temperature);
  require_scalar(inv_temperature.value(), "softmax_rows");
  const double beta = inv_temperature.value().item();
  Matrix y = softmax_impl(x.value(), nullptr, beta);
  Matrix saved = t.recording() ? y : Matrix{};
  return t.record(std::move(y), {x, inv_temperature},
                  [x, inv_temperature, beta, y = std::move(saved)](Tape& t, const Matrix& g) {
                    softmax_backward(t, x, inv_temperature, true, beta, y, g);
                  });
}

Var masked_softmax_rows(Var x, const Matrix& mask, Var inv_temperature) {
  Tape& t = tape_of(x, inv_temperature);
  require_shape(x.value().same_shape(mask), "masked_softmax_rows", x.value(), mask);
  require_scalar(inv_temperature.value(), "masked_softmax_rows");
  const double beta = inv_temperature.value().item();
  Matrix y = softmax_impl(x.value(), &mask, beta);
  Matrix saved = t.recording() ? y : Matrix{};
  return t.record(std::move(y), {x, inv_temperature},
                  [x, inv_temperature, beta, y = std::move(saved)](Tape& t, const Matrix& g) {
                    softmax_backward(t, x, inv_temperature, true, beta, y, g);
                  });
}

Var log_softmax_rows(Var x) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  Matrix y(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const auto row = xv.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < xv.cols(); ++c) y(r, c) = xv(r, c) - lse;
  }
  Matrix saved = t.recording() ? y : Matrix{};
  return t.record(std::move(y), {x}, [x, y = std::move(saved)](Tape& t, const Matrix& g) {
    Matrix& gx = t.grad_of(x);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) gsum += g(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) gx(r, c) += g(r, c) - std::exp(y(r, c)) * gsum;
    }
  });
}

Var cosine_similarity(Var a, Var b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("cosine_similarity: feature dims " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.cols()));
  }
  return matmul(row_normalize(a), transpose(row_normalize(b)));
}

Var neg_sq_distances(Var a) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  const std::size_t n = av.rows();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < av.cols(); ++c) {
        const double diff = av(i, c) - av(j, c);
        s += diff * diff;
      }
      d(i, j) = -s;
      d(j, i) = -s;
    }
  }
  return t.record(std::move(d), {a}, [a](Tape& t, const Matrix& g) {
    const Matrix& av = a.value();
    Matrix& ga = t.grad_of(a);
    for (std::size_t i = 0; i < av.rows(); ++i) {
      for (std::size_t j = 0; j < av.rows(); ++j) {
        if (i == j) continue;
        const double w = -2.0 * (g(i, j) + g(j, i));
        for (std::size_t c = 0; c < av.cols(); ++c) ga(i, c) += w * (av(i, c) - av(j, c));
      }
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  Matrix out(rows.size(), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) {
      throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                       shape_string(av));
    }
    std::copy_n(av.row(rows[i]).begin(), av.cols(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return t.record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_of(a);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(idx[i], c) += g(i, c);
  });
}

Var select_cols(Var a, std::span<const std::size_t> cols) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  Matrix out(av.rows(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] >= av.cols()) {
      throw IndexError("select_cols: column " + std::to_string(cols[j]) + " out of range for " +
                       shape_string(av));
    }
    for (std::size_t r = 0; r < av.rows(); ++r) out(r, j) = av(r, cols[j]);
  }
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return t.record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_of(a);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t j = 0; j < idx.size(); ++j) ga(r, idx[j]) += g(r, j);
  });
}

Var concat_rows(Var top, Var bottom) {
  Tape& t = tape_of(top, bottom);
  const Matrix& tv = top.value();
  const Matrix& bv = bottom.value();
  require_shape(tv.cols() == bv.cols() || tv.rows() == 0 || bv.rows() == 0, "concat_rows", tv, bv);
  const std::size_t cols = tv.rows() == 0 ? bv.cols() : tv.cols();
  Matrix out(tv.rows() + bv.rows(), cols);
  std::copy(tv.data().begin(), tv.data().end(), out.data().begin());
  std::copy(bv.data().begin(), bv.data().end(), out.data().begin() + tv.size());
  const std::size_t split = tv.size();
  return t.record(std::move(out), {top, bottom}, [top, bottom, split](Tape& t, const Matrix& g) {
    if (t.requires_grad(top)) {
      Matrix& gt = t.grad_of(top);
      for (std::size_t i = 0; i < split; ++i) gt[i] += g[i];
    }
    if (t.requires_grad(bottom)) {
      Matrix& gb = t.grad_of(bottom);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[split + i];
    }
  });
}

Var mean_row_groups(Var a, std::size_t group_size) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  if (group_size == 0 || av.rows() % group_size != 0) {
    throw ShapeError("mean_row_groups: " + std::to_string(av.rows()) +
                     " rows not divisible into groups of " + std::to_string(group_size));
  }
  const std::size_t groups = av.rows() / group_size;
  Matrix out(groups, av.cols());
  for (std::size_t gi = 0; gi < groups; ++gi) {
    for (std::size_t k = 0; k < group_size; ++k)
      for (std::size_t c = 0; c < av.cols(); ++c) out(gi, c) += av(gi * group_size + k, c);
    for (double& v : out.row(gi)) v /= static_cast<double>(group_size);
  }
  return t.record(std::move(out), {a}, [a, group_size](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_of(a);
    const double inv = 1.0 / static_cast<double>(group_size);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(r / group_size, c) * inv;
  });
}

Var embed_block(Var a, std::size_t rows, std::size_t cols, std::size_t row0, std::size_t col0) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  if (row0 + av.rows() > rows || col0 + av.cols() > cols) {
    throw ShapeError("embed_block: " + shape_string(av) + " does not fit at (" +
                     std::to_string(row0) + "," + std::to_string(col0) + ") in " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(row0 + r, col0 + c) = av(r, c);
  return t.record(std::move(out), {a}, [a, row0, col0](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_of(a);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(row0 + r, col0 + c);
  });
}

Var cross_entropy(Var log_probs, std::span<const std::size_t> labels) {
  Tape& t = tape_of(log_probs);
  const Matrix& lp = log_probs.value();
  if (labels.size() != lp.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(lp.rows()) + " rows");
  }
  if (lp.rows() == 0) throw ShapeError("cross_entropy over zero rows");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= lp.cols()) {
      throw IndexError("cross_entropy: label " + std::to_string(labels[i]) + " out of range [0, " +
                       std::to_string(lp.cols()) + ")");
    }
    total -= lp(i, labels[i]);
  }
  const double n = static_cast<double>(labels.size());
  std::vector<std::size_t> idx(labels.begin(), labels.end());
  return t.record(Matrix::scalar(total / n), {log_probs},
                  [log_probs, idx = std::move(idx), n](Tape& t, const Matrix& g) {
                    Matrix& gl = t.grad_of(log_probs);
                    for (std::size_t i = 0; i < idx.size(); ++i) gl(i, idx[i]) -= g(0, 0) / n;
                  });
}

}  // namespace gcgpn
