#pragma once

#include <cavg/nn/tape.hpp>

namespace cavg::nn {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b); // element-wise
Var neg(Var a);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);

/// a (n x c) + row (1 x c), broadcast over rows.
Var add_row(Var a, Var row);
/// a (n x c) + s (1 x 1) and a * s, broadcast everywhere.
Var add_broadcast(Var a, Var s);
Var mul_broadcast(Var a, Var s);

Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var square(Var a);

Var sum(Var a);  // -> 1 x 1
Var mean(Var a); // -> 1 x 1

Var concat_cols(Var a, Var b);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index width);
Var concat_cols(const std::vector<Var>& parts);
Var transpose(Var a);

/// Element-wise clamp; gradient is zero where the input lies outside [lo, hi].
Var clamp(Var a, double lo, double hi);
/// Element-wise minimum; the gradient flows to the selected operand (ties -> a).
Var minimum(Var a, Var b);

enum class AttentionNormalization {
	/// softmax_j(s_ij)
	Softmax,
	/// softmax_j(s_ij / sum_l s_il): the literal double normalisation variant.
	RatioSoftmax,
};

/// Row-wise softmax restricted to entries where `mask` is non-zero. Entries
/// outside the mask are exactly 0. Throws EmptyNeighborSet for an empty row.
Var masked_softmax(Var logits, const Matrix& mask, AttentionNormalization mode = AttentionNormalization::Softmax);

// Block-diagonal graph ops. The rows of a feature matrix are split into
// consecutive groups, one per graph block (one block per simulator step when
// several steps are stacked into a minibatch).

/// Row group b of the result is blocks[b] * x_b.
Var block_matmul(const std::vector<Matrix>& blocks, Var x);

/// Per-block q_b k_b^T in the compact layout: row r of block b holds its scores
/// against the members of b in columns [0, n_b); remaining columns are 0.
/// Width is the largest block size.
Var block_scores(Var q, Var k, const std::vector<Eigen::Index>& sizes);

/// Per-block p_b v_b for `p` in the compact layout of block_scores.
Var block_mix(Var p, Var v, const std::vector<Eigen::Index>& sizes);

} // namespace cavg::nn
