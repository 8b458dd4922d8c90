#pragma once

#include <cavg/common/rng.hpp>
#include <cavg/nn/ops.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace cavg::nn {

enum class Activation { Tanh, ReLU };

std::string_view to_string(Activation a) noexcept;
Var activate(Var x, Activation a);

/// Orthogonal init (QR of a Gaussian matrix) scaled by `gain`.
Matrix orthogonal_init(Eigen::Index rows, Eigen::Index cols, double gain, Rng& rng);

/// y = x W + b
class Dense {
public:
	Dense() = default;
	Dense(ParameterSet& params, const std::string& name, Eigen::Index in, Eigen::Index out, double gain, Rng& rng);

	Var forward(Tape& tape, ParameterSet& params, Var x) const;

	std::size_t weight_index() const noexcept { return w_; }
	std::size_t bias_index() const noexcept { return b_; }

private:
	std::size_t w_ = 0;
	std::size_t b_ = 0;
};

/// h' = f(concat[M H, D^-1 M H] W), one W shared by all agents.
class GraphConvLayer {
public:
	GraphConvLayer() = default;
	GraphConvLayer(ParameterSet& params, const std::string& name, Eigen::Index d_in, Eigen::Index d_out,
		Activation activation, double gain, Rng& rng);

	Var forward(Tape& tape, ParameterSet& params, Var features, const Matrix& adjacency, const Matrix& normalized) const;
	/// Block-diagonal form: the feature rows are split into consecutive groups, one per block.
	Var forward(Tape& tape, ParameterSet& params, Var features, const std::vector<Matrix>& adjacency,
		const std::vector<Matrix>& normalized) const;

	std::size_t weight_index() const noexcept { return w_; }
	Activation activation() const noexcept { return f_; }

private:
	std::size_t w_ = 0;
	Activation f_ = Activation::Tanh;
};

/// Scaled dot-product attention restricted to each agent's neighbour set.
/// Head h uses columns [h d_h, (h+1) d_h) of the shared query/key/value
/// projections; the concatenated heads go through an output projection.
class AttentionLayer {
public:
	struct Output {
		Var features;
		/// Attention weights phi per head, recorded for inspection. N x N for a
		/// single block; in the compact layout of `block_scores` otherwise.
		std::vector<Matrix> scores;
	};

	AttentionLayer() = default;
	AttentionLayer(ParameterSet& params, const std::string& name, Eigen::Index width, int heads, double gain, Rng& rng,
		AttentionNormalization normalization = AttentionNormalization::Softmax);

	/// `mask(i, j) != 0` iff j is in N_i; every row must contain i itself.
	Output forward(Tape& tape, ParameterSet& params, Var features, const Matrix& mask) const;
	/// One mask per block of consecutive feature rows.
	Output forward(Tape& tape, ParameterSet& params, Var features, const std::vector<Matrix>& masks) const;

	int heads() const noexcept { return heads_; }
	Eigen::Index head_width() const noexcept { return width_ / heads_; }

private:
	std::size_t wq_ = 0, wk_ = 0, wv_ = 0, wo_ = 0, bo_ = 0;
	Eigen::Index width_ = 0;
	int heads_ = 1;
	AttentionNormalization normalization_ = AttentionNormalization::Softmax;
};

/// Per-agent Gaussian over the acceleration: mean = mid + half * tanh(z),
/// spread = exp(log_spread) shared by all agents.
class GaussianPolicyHead {
public:
	struct Output {
		Var mean;       // N x 1
		Var log_spread; // 1 x 1
	};

	GaussianPolicyHead() = default;
	GaussianPolicyHead(ParameterSet& params, const std::string& name, Eigen::Index width, double action_min,
		double action_max, double gain, Rng& rng);

	Output forward(Tape& tape, ParameterSet& params, Var trunk) const;

	std::size_t log_spread_index() const noexcept { return log_spread_; }
	const Dense& mean_layer() const noexcept { return mean_; }
	double action_min() const noexcept { return lo_; }
	double action_max() const noexcept { return hi_; }

private:
	Dense mean_;
	std::size_t log_spread_ = 0;
	double lo_ = -3.0;
	double hi_ = 3.0;
};

/// log N(actions | mean, exp(log_spread)^2), element-wise (N x 1).
Var gaussian_log_density(Var actions, Var mean, Var log_spread);

/// Plain-double reference of the same density.
double gaussian_log_density(double action, double mean, double log_spread) noexcept;

} // namespace cavg::nn
