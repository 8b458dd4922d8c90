#pragma once

#include <cavg/sim/geometry.hpp>
#include <cavg/sim/types.hpp>

#include <cstdint>
#include <map>
#include <vector>

namespace cavg::sim {

using ActionMap = std::map<int, double>;

struct StepInfo {
	/// Aligned with the post-step `SimState::vehicles`.
	std::vector<double> speeds;
	std::vector<double> accels;
	std::vector<int> spawned_ids;
	std::vector<int> exited_ids;
	bool collided = false;
};

struct StepResult {
	SimState state;
	StepInfo info;
};

/// Uniform placement at standstill. CAV slots are spread evenly around each
/// loop with a seed-dependent phase. Merge networks start empty.
SimState build_network(std::shared_ptr<const Scenario> scenario, int n_human, int n_cav, std::uint64_t seed);

/// Humans: IDM (min over all leader constraints) plus noise, clamped to the
/// human bounds. CAVs: commanded accel clamped to [a_dec, a_acc]. Then
/// v' = max(0, v + a dt), x' = x + v' dt. Merge spawns/exits run afterwards.
StepResult step(const SimState& state, const ActionMap& cav_actions, double dt);

bool detect_collision(const SimState& state);

/// IDM acceleration under a set of leader constraints (the most restrictive wins).
double idm_response(const std::vector<LeaderConstraint>& constraints, double speed, const SimParams& params);

/// Acceleration the IDM controller would apply to vehicle `index` (no noise).
double idm_controller_accel(const SimState& state, int index);

/// IDM driving for every CAV slot (the all-IDM baseline). Noise is drawn from
/// `noise_rng` when given.
ActionMap idm_cav_actions(const SimState& state, Rng* noise_rng);

/// Advances `steps` steps with every vehicle, CAVs included, driven by noisy IDM.
/// Noise comes from the state's own stream, so the result is deterministic.
SimState warm_up(SimState state, int steps);

/// Largest CAV acceleration that keeps a stopping-distance margin to the physical leader.
double safe_accel_bound(const SimState& state, int index, double dt);

} // namespace cavg::sim
