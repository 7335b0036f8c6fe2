#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gcgpn/tape.hpp"

namespace gcgpn {

// Guard used by every norm division.
inline constexpr double kNormEpsilon = 1e-12;

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var add_n(std::span<const Var> terms);
Var scale(Var a, double s);
// Multiplies a by the 1x1 value s.
Var mul_scalar(Var a, Var s);
Var hadamard(Var a, Var b);
Var exp(Var a);
Var relu(Var a);
Var sum(Var a);

// Row-broadcast products: a (m x n) with v (1 x n).
Var mul_cols(Var a, Var v);
Var add_row(Var a, Var v);

// Elementwise product with a constant 0/1 pattern.
Var mul_mask(Var a, const Matrix& mask);

// Divides each row by its L2 norm. Rows with norm <= kNormEpsilon pass
// through unchanged and receive zero gradient.
Var row_normalize(Var x);

// Row-wise softmax of inv_temperature * x with max subtraction.
Var softmax_rows(Var x, double inv_temperature);
Var softmax_rows(Var x, Var inv_temperature);
// Softmax restricted to entries where mask != 0; masked entries are exactly
// zero and fully masked rows come out as zero rows.
Var masked_softmax_rows(Var x, const Matrix& mask, Var inv_temperature);
Var log_softmax_rows(Var x);

// (i, j) -> <a_i, b_j> / (|a_i| |b_j|), composed from row_normalize so the
// epsilon guard applies per row.
Var cosine_similarity(Var a, Var b);
// (i, j) -> -|a_i - a_j|^2.
Var neg_sq_distances(Var a);

Var gather_rows(Var a, std::span<const std::size_t> rows);
Var select_cols(Var a, std::span<const std::size_t> cols);
Var concat_rows(Var top, Var bottom);
// Averages consecutive groups of group_size rows.
Var mean_row_groups(Var a, std::size_t group_size);
// Places a into a zero matrix of shape rows x cols at (row0, col0).
Var embed_block(Var a, std::size_t rows, std::size_t cols, std::size_t row0, std::size_t col0);

// Mean over rows of -log_probs(i, labels[i]).
Var cross_entropy(Var log_probs, std::span<const std::size_t> labels);

// Non-recording helpers used by static code paths and oracles.
Matrix row_normalized(const Matrix& x);
Matrix softmax_rows(const Matrix& x, double inv_temperature);

}  // namespace gcgpn
