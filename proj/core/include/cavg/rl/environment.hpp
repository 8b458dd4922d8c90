#pragma once

#include <cavg/graph/adjacency.hpp>
#include <cavg/rl/reward.hpp>
#include <cavg/sim/simulator.hpp>

#include <cstdint>
#include <memory>
#include <vector>

namespace cavg::rl {

struct EnvConfig {
	std::shared_ptr<const sim::Scenario> scenario;
	int n_human = 0;
	int n_cav = 1;
	int horizon = 500;
	/// All-IDM steps run after placement and before the episode starts.
	int warmup_steps = 0;
	/// Normalises observed speeds.
	double target_speed = 30.0 / 3.6;
	graph::AdjacencyScheme scheme;
	double scan_scale = 30.0;
	RewardSpec reward;

	void validate() const;
};

struct StepOutcome {
	double reward = 0.0;
	bool collided = false;
	bool done = false;
	sim::StepInfo info;
};

/// One episode of a scenario seen from the CAV agents. Agent order is CAV
/// order in the simulator's vehicle list.
class Environment {
public:
	explicit Environment(EnvConfig config);

	void reset(std::uint64_t episode_seed);

	const EnvConfig& config() const noexcept { return config_; }
	const sim::SimState& state() const noexcept { return state_; }
	/// Replaces the simulator state (tests, perturbation checks).
	void set_state(sim::SimState state) { state_ = std::move(state); }

	std::vector<int> agents() const { return state_.cav_ids(); }
	/// Observation of `agent_ids` (rows), sensing limited to the scan scale.
	Matrix observe(const std::vector<int>& agent_ids) const;
	Matrix observe() const { return observe(agents()); }
	graph::AdjacencyMatrix adjacency() const;

	/// `actions` aligned with `agents()`.
	StepOutcome step(const Vector& actions);

	int steps() const noexcept { return steps_; }
	bool done() const noexcept { return done_; }

private:
	EnvConfig config_;
	sim::SimState state_;
	int steps_ = 0;
	bool done_ = true;
};

} // namespace cavg::rl
