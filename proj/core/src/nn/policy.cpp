#include <cavg/nn/policy.hpp>

#include <cavg/common/error.hpp>

#include <cmath>

namespace cavg::nn {

namespace {
	constexpr double kHiddenGain = 1.0;
	constexpr double kPolicyGain = 0.01;
	constexpr double kValueGain = 1.0;
} // namespace

void NetworkConfig::validate() const {
	if (obs_dim < 1 || hidden < 1) {
		fail(ErrorCode::InvalidSpec, "network widths must be >= 1");
	}
	if (heads < 0 || (heads > 0 && hidden % heads != 0)) {
		fail(ErrorCode::InvalidSpec, "hidden width must be divisible by the attention head count");
	}
	if (!(action_min < action_max)) {
		fail(ErrorCode::InvalidSpec, "action range must be non-empty");
	}
}

GraphInputs GraphInputs::from(const graph::AdjacencyMatrix& adj) {
	return single(adj.weights, graph::degree_normalize(adj), adj.neighbours);
}

GraphInputs GraphInputs::single(Matrix weights, Matrix normalized, Matrix mask) {
	GraphInputs g;
	g.weights.push_back(std::move(weights));
	g.normalized.push_back(std::move(normalized));
	g.mask.push_back(std::move(mask));
	return g;
}

void GraphInputs::append(const GraphInputs& other) {
	weights.insert(weights.end(), other.weights.begin(), other.weights.end());
	normalized.insert(normalized.end(), other.normalized.begin(), other.normalized.end());
	mask.insert(mask.end(), other.mask.begin(), other.mask.end());
}

Eigen::Index GraphInputs::rows() const noexcept {
	Eigen::Index n = 0;
	for (const auto& w : weights) {
		n += w.rows();
	}
	return n;
}

ActorNetwork::ActorNetwork(const NetworkConfig& config, Rng& rng)
	: config_(config) {
	config.validate();
	encoder_ = Dense(params_, "actor.encoder", config.obs_dim, config.hidden, kHiddenGain, rng);
	conv_ = GraphConvLayer(params_, "actor.graph_conv", config.hidden, config.hidden, config.activation, kHiddenGain, rng);
	if (config.heads > 0) {
		attention_.emplace(params_, "actor.attention", config.hidden, config.heads, kHiddenGain, rng, config.attention);
	}
	head_ = GaussianPolicyHead(params_, "actor.policy", config.hidden, config.action_min, config.action_max, kPolicyGain, rng);
}

ActorNetwork::Output ActorNetwork::forward(Tape& tape, const Matrix& observations, const GraphInputs& graph) {
	if (observations.cols() != config_.obs_dim) {
		fail(ErrorCode::ShapeMismatch, "actor: observation width mismatch");
	}
	const Var obs = tape.constant(observations);
	Var h = activate(encoder_.forward(tape, params_, obs), config_.activation);
	h = conv_.forward(tape, params_, h, graph.weights, graph.normalized);
	Output out;
	if (attention_) {
		auto att = attention_->forward(tape, params_, h, graph.mask);
		h = activate(att.features, config_.activation);
		out.attention_scores = std::move(att.scores);
	}
	const auto head = head_.forward(tape, params_, h);
	out.mean = head.mean;
	out.log_spread = head.log_spread;
	return out;
}

Vector ActorNetwork::mean_actions(const Matrix& observations, const GraphInputs& graph) {
	Tape tape;
	const auto out = forward(tape, observations, graph);
	return out.mean.value().col(0);
}

CriticNetwork::CriticNetwork(const NetworkConfig& config, Rng& rng)
	: config_(config) {
	config.validate();
	encoder_ = Dense(params_, "critic.encoder", config.obs_dim, config.hidden, kHiddenGain, rng);
	conv_ = GraphConvLayer(params_, "critic.graph_conv", config.hidden, config.hidden, config.activation, kHiddenGain, rng);
	value_ = Dense(params_, "critic.value", config.hidden, 1, kValueGain, rng);
}

Var CriticNetwork::forward(Tape& tape, const Matrix& observations, const GraphInputs& graph) {
	if (observations.cols() != config_.obs_dim) {
		fail(ErrorCode::ShapeMismatch, "critic: observation width mismatch");
	}
	const Var obs = tape.constant(observations);
	Var h = activate(encoder_.forward(tape, params_, obs), config_.activation);
	h = conv_.forward(tape, params_, h, graph.weights, graph.normalized);
	return value_.forward(tape, params_, h);
}

Vector CriticNetwork::values(const Matrix& observations, const GraphInputs& graph) {
	Tape tape;
	return forward(tape, observations, graph).value().col(0);
}

} // namespace cavg::nn
