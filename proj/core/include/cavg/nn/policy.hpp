#pragma once

#include <cavg/graph/adjacency.hpp>
#include <cavg/nn/layers.hpp>

#include <optional>

namespace cavg::nn {

struct NetworkConfig {
	Eigen::Index obs_dim = 6;
	Eigen::Index hidden = 64;
	/// 0 replaces the attention block by an identity pass-through.
	int heads = 8;
	Activation activation = Activation::Tanh;
	AttentionNormalization attention = AttentionNormalization::Softmax;
	double action_min = -3.0;
	double action_max = 3.0;

	void validate() const;
	bool operator==(const NetworkConfig&) const = default;
};

/// Graph tensors as a block-diagonal list: one block per decision step, each
/// block n_b x n_b. Feature rows follow the blocks in order.
struct GraphInputs {
	std::vector<Matrix> weights;
	std::vector<Matrix> normalized;
	std::vector<Matrix> mask;

	static GraphInputs from(const graph::AdjacencyMatrix& adj);
	static GraphInputs single(Matrix weights, Matrix normalized, Matrix mask);

	void append(const GraphInputs& other);
	Eigen::Index rows() const noexcept;
	std::size_t blocks() const noexcept { return weights.size(); }
};

/// Shared actor: encoder -> graph conv -> attention -> Gaussian head.
class ActorNetwork {
public:
	struct Output {
		Var mean;
		Var log_spread;
		std::vector<Matrix> attention_scores;
	};

	ActorNetwork() = default;
	ActorNetwork(const NetworkConfig& config, Rng& rng);

	Output forward(Tape& tape, const Matrix& observations, const GraphInputs& graph);
	/// Deterministic action means without keeping a tape around.
	Vector mean_actions(const Matrix& observations, const GraphInputs& graph);

	ParameterSet& params() noexcept { return params_; }
	const ParameterSet& params() const noexcept { return params_; }
	const NetworkConfig& config() const noexcept { return config_; }
	const GaussianPolicyHead& head() const noexcept { return head_; }

private:
	NetworkConfig config_;
	ParameterSet params_;
	Dense encoder_;
	GraphConvLayer conv_;
	std::optional<AttentionLayer> attention_;
	GaussianPolicyHead head_;
};

/// Centralised graph-convolutional critic producing one value per agent.
class CriticNetwork {
public:
	CriticNetwork() = default;
	CriticNetwork(const NetworkConfig& config, Rng& rng);

	Var forward(Tape& tape, const Matrix& observations, const GraphInputs& graph);
	Vector values(const Matrix& observations, const GraphInputs& graph);

	ParameterSet& params() noexcept { return params_; }
	const ParameterSet& params() const noexcept { return params_; }
	const NetworkConfig& config() const noexcept { return config_; }

private:
	NetworkConfig config_;
	ParameterSet params_;
	Dense encoder_;
	GraphConvLayer conv_;
	Dense value_;
};

} // namespace cavg::nn
