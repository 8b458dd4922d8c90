#include <cavg/rl/environment.hpp>

#include <cavg/common/error.hpp>
#include <cavg/sim/observation.hpp>

namespace cavg::rl {

void EnvConfig::validate() const {
	if (!scenario) {
		fail(ErrorCode::InvalidSpec, "environment: scenario missing");
	}
	scenario->network.validate();
	scenario->params.validate();
	scheme.validate();
	reward.validate();
	if (horizon < 1) {
		fail(ErrorCode::InvalidSpec, "horizon must be >= 1");
	}
	if (warmup_steps < 0) {
		fail(ErrorCode::InvalidSpec, "warmup_steps must be >= 0");
	}
	if (!(target_speed > 0.0)) {
		fail(ErrorCode::InvalidSpec, "target_speed must be > 0");
	}
	if (!(scan_scale > 0.0)) {
		fail(ErrorCode::InvalidSpec, "scan_scale must be > 0");
	}
	if (n_human < 0 || n_cav < 0) {
		fail(ErrorCode::InvalidSpec, "vehicle counts must be >= 0");
	}
}

Environment::Environment(EnvConfig config)
	: config_(std::move(config)) {
	config_.validate();
}

void Environment::reset(std::uint64_t episode_seed) {
	state_ = sim::build_network(config_.scenario, config_.n_human, config_.n_cav, episode_seed);
	if (config_.warmup_steps > 0) {
		state_ = sim::warm_up(std::move(state_), config_.warmup_steps);
		if (state_.collided) {
			fail(ErrorCode::InvalidSpec, "collision during warm-up");
		}
	}
	steps_ = 0;
	done_ = false;
}

Matrix Environment::observe(const std::vector<int>& agent_ids) const {
	Matrix obs(static_cast<Eigen::Index>(agent_ids.size()), static_cast<Eigen::Index>(sim::kObservationSize));
	for (std::size_t r = 0; r < agent_ids.size(); ++r) {
		const auto o = sim::local_observation(state_, agent_ids[r], config_.target_speed, config_.scan_scale);
		for (std::size_t c = 0; c < o.size(); ++c) {
			obs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = o[c];
		}
	}
	return obs;
}

graph::AdjacencyMatrix Environment::adjacency() const {
	return graph::build_adjacency(state_, config_.scheme, config_.scan_scale);
}

StepOutcome Environment::step(const Vector& actions) {
	if (done_) {
		fail(ErrorCode::InvalidSpec, "step() on a finished episode; call reset()");
	}
	const auto ids = agents();
	if (static_cast<std::size_t>(actions.size()) != ids.size()) {
		fail(ErrorCode::ShapeMismatch, "one action per agent required");
	}
	sim::ActionMap map;
	for (std::size_t i = 0; i < ids.size(); ++i) {
		map[ids[i]] = actions(static_cast<Eigen::Index>(i));
	}
	auto result = sim::step(state_, map, state_.params().dt);
	state_ = std::move(result.state);
	++steps_;

	StepOutcome out;
	out.reward = team_reward(state_, config_.reward);
	out.collided = state_.collided;
	out.done = out.collided || steps_ >= config_.horizon;
	out.info = std::move(result.info);
	done_ = out.done;
	return out;
}

} // namespace cavg::rl
