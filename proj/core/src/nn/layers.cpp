#include <cavg/nn/layers.hpp>

#include <cavg/common/error.hpp>

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace cavg::nn {

std::string_view to_string(Activation a) noexcept {
	return a == Activation::Tanh ? "tanh" : "relu";
}

Var activate(Var x, Activation a) {
	return a == Activation::Tanh ? tanh(x) : relu(x);
}

Matrix orthogonal_init(Eigen::Index rows, Eigen::Index cols, double gain, Rng& rng) {
	std::normal_distribution<double> normal(0.0, 1.0);
	const Eigen::Index big = std::max(rows, cols);
	const Eigen::Index small = std::min(rows, cols);
	Eigen::MatrixXd g(big, small);
	for (Eigen::Index i = 0; i < big; ++i) {
		for (Eigen::Index j = 0; j < small; ++j) {
			g(i, j) = normal(rng);
		}
	}
	Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
	Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
	// Sign fix so the distribution is uniform over orthogonal matrices.
	const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
	for (Eigen::Index j = 0; j < small; ++j) {
		if (r(j, j) < 0.0) {
			q.col(j) *= -1.0;
		}
	}
	Matrix out = rows >= cols ? Matrix(q) : Matrix(q.transpose());
	return out * gain;
}

Dense::Dense(ParameterSet& params, const std::string& name, Eigen::Index in, Eigen::Index out, double gain, Rng& rng)
	: w_(params.add(name + ".weight", orthogonal_init(in, out, gain, rng)))
	, b_(params.add(name + ".bias", Matrix::Zero(1, out))) {}

Var Dense::forward(Tape& tape, ParameterSet& params, Var x) const {
	return add_row(matmul(x, tape.param(params[w_])), tape.param(params[b_]));
}

GraphConvLayer::GraphConvLayer(ParameterSet& params, const std::string& name, Eigen::Index d_in, Eigen::Index d_out,
	Activation activation, double gain, Rng& rng)
	: w_(params.add(name + ".weight", orthogonal_init(2 * d_in, d_out, gain, rng)))
	, f_(activation) {}

Var GraphConvLayer::forward(Tape& tape, ParameterSet& params, Var features, const Matrix& adjacency,
	const Matrix& normalized) const {
	const auto n = features.rows();
	if (adjacency.rows() != n || adjacency.cols() != n || normalized.rows() != n || normalized.cols() != n) {
		fail(ErrorCode::ShapeMismatch, "graph conv: adjacency does not match the feature rows");
	}
	return forward(tape, params, features, std::vector<Matrix>{adjacency}, std::vector<Matrix>{normalized});
}

Var GraphConvLayer::forward(Tape& tape, ParameterSet& params, Var features, const std::vector<Matrix>& adjacency,
	const std::vector<Matrix>& normalized) const {
	if (adjacency.size() != normalized.size()) {
		fail(ErrorCode::ShapeMismatch, "graph conv: adjacency / normalized block counts differ");
	}
	for (std::size_t b = 0; b < adjacency.size(); ++b) {
		if (adjacency[b].rows() != normalized[b].rows() || adjacency[b].cols() != normalized[b].cols()) {
			fail(ErrorCode::ShapeMismatch, "graph conv: adjacency / normalized block shapes differ");
		}
	}
	const Parameter& w = params[w_];
	if (w.value.rows() != 2 * features.cols()) {
		fail(ErrorCode::ShapeMismatch, "graph conv: feature width inconsistent with W");
	}
	const Var joined = concat_cols(block_matmul(adjacency, features), block_matmul(normalized, features));
	return activate(matmul(joined, tape.param(params[w_])), f_);
}

AttentionLayer::AttentionLayer(ParameterSet& params, const std::string& name, Eigen::Index width, int heads, double gain,
	Rng& rng, AttentionNormalization normalization)
	: width_(width)
	, heads_(heads)
	, normalization_(normalization) {
	if (heads < 1 || width % heads != 0) {
		fail(ErrorCode::InvalidSpec, "attention width must be divisible by a positive head count");
	}
	wq_ = params.add(name + ".query", orthogonal_init(width, width, gain, rng));
	wk_ = params.add(name + ".key", orthogonal_init(width, width, gain, rng));
	wv_ = params.add(name + ".value", orthogonal_init(width, width, gain, rng));
	wo_ = params.add(name + ".out.weight", orthogonal_init(width, width, gain, rng));
	bo_ = params.add(name + ".out.bias", Matrix::Zero(1, width));
}

AttentionLayer::Output AttentionLayer::forward(Tape& tape, ParameterSet& params, Var features, const Matrix& mask) const {
	if (mask.rows() != features.rows() || mask.cols() != features.rows()) {
		fail(ErrorCode::ShapeMismatch, "attention: mask does not match the agent count");
	}
	return forward(tape, params, features, std::vector<Matrix>{mask});
}

AttentionLayer::Output AttentionLayer::forward(Tape& tape, ParameterSet& params, Var features,
	const std::vector<Matrix>& masks) const {
	std::vector<Eigen::Index> sizes;
	Eigen::Index rows = 0, width = 0;
	for (const auto& m : masks) {
		if (m.rows() != m.cols()) {
			fail(ErrorCode::ShapeMismatch, "attention: masks must be square");
		}
		sizes.push_back(m.rows());
		rows += m.rows();
		width = std::max(width, m.rows());
	}
	if (rows != features.rows() || features.cols() != width_) {
		fail(ErrorCode::ShapeMismatch, "attention: inputs do not match the layer width / agent count");
	}
	Matrix compact = Matrix::Zero(rows, width);
	Eigen::Index at = 0;
	for (const auto& m : masks) {
		for (Eigen::Index i = 0; i < m.rows(); ++i) {
			if (m(i, i) == 0.0) {
				fail(ErrorCode::EmptyNeighborSet, "neighbour set of agent " + std::to_string(at + i) + " must include itself");
			}
		}
		compact.block(at, 0, m.rows(), m.cols()) = m;
		at += m.rows();
	}
	const Var q = matmul(features, tape.param(params[wq_]));
	const Var k = matmul(features, tape.param(params[wk_]));
	const Var v = matmul(features, tape.param(params[wv_]));
	const Eigen::Index dh = head_width();
	const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

	Output out;
	std::vector<Var> heads;
	for (int h = 0; h < heads_; ++h) {
		const Var qh = slice_cols(q, h * dh, dh);
		const Var kh = slice_cols(k, h * dh, dh);
		const Var vh = slice_cols(v, h * dh, dh);
		const Var logits = scale(block_scores(qh, kh, sizes), inv_sqrt);
		const Var phi = masked_softmax(logits, compact, normalization_);
		out.scores.push_back(phi.value());
		heads.push_back(block_mix(phi, vh, sizes));
	}
	const Var joined = heads.size() == 1 ? heads.front() : concat_cols(heads);
	out.features = add_row(matmul(joined, tape.param(params[wo_])), tape.param(params[bo_]));
	return out;
}

GaussianPolicyHead::GaussianPolicyHead(ParameterSet& params, const std::string& name, Eigen::Index width,
	double action_min, double action_max, double gain, Rng& rng)
	: mean_(params, name + ".mean", width, 1, gain, rng)
	, log_spread_(params.add(name + ".log_spread", Matrix::Zero(1, 1)))
	, lo_(action_min)
	, hi_(action_max) {}

GaussianPolicyHead::Output GaussianPolicyHead::forward(Tape& tape, ParameterSet& params, Var trunk) const {
	const double mid = 0.5 * (lo_ + hi_);
	const double half = 0.5 * (hi_ - lo_);
	const Var squashed = tanh(mean_.forward(tape, params, trunk));
	return {add_scalar(scale(squashed, half), mid), tape.param(params[log_spread_])};
}

Var gaussian_log_density(Var actions, Var mean, Var log_spread) {
	const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
	const Var z = mul_broadcast(sub(actions, mean), exp(neg(log_spread)));
	const Var quad = scale(square(z), -0.5);
	return add_scalar(add_broadcast(quad, neg(log_spread)), -half_log_two_pi);
}

double gaussian_log_density(double action, double mean, double log_spread) noexcept {
	const double z = (action - mean) / std::exp(log_spread);
	return -0.5 * z * z - log_spread - 0.5 * std::log(2.0 * std::numbers::pi);
}

} // namespace cavg::nn
