#pragma once

#include <cavg/nn/policy.hpp>
#include <cavg/rl/environment.hpp>

#include <cstdint>
#include <vector>

namespace cavg::eval {

struct Violation {
	int state_index = 0;
	int agent_id = 0;
	double change = 0.0;
};

struct DecentralizationReport {
	int states = 0;
	int agents_checked = 0;
	/// Agent checks with at least one vehicle outside the receptive field.
	int perturbed_checks = 0;
	double max_change = 0.0;
	std::vector<Violation> violations;
	bool passed() const noexcept { return violations.empty(); }
};

/// Scan-scale hops an agent's action can see through: one for the local
/// observation (neighbour CAVs within SC) and one per graph layer (graph conv,
/// plus attention when heads > 0).
int receptive_hops(const nn::NetworkConfig& config) noexcept;

/// Agent indices within `hops` scan-scale hops of `agent` (itself included).
std::vector<int> receptive_field(const Matrix& neighbours, int agent, int hops);

/// Checks one state: for each agent, re-randomises the speeds of every vehicle
/// outside its receptive field and compares its deterministic action.
void check_state(nn::ActorNetwork& actor, rl::Environment& env, const sim::SimState& state, int state_index, Rng& rng,
	double tolerance, DecentralizationReport& report);

/// Samples `states` states from deterministic-policy episodes and checks each.
DecentralizationReport decentralization_check(nn::ActorNetwork& actor, const rl::EnvConfig& env, std::uint64_t seed,
	int states = 100, double tolerance = 1e-9);

} // namespace cavg::eval
