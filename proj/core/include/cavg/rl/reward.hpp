#pragma once

#include <cavg/sim/types.hpp>

#include <span>
#include <string_view>
#include <vector>

namespace cavg::rl {

enum class RewardKind { RingEight, Merge };

std::string_view to_string(RewardKind kind) noexcept;

struct RewardSpec {
	RewardKind kind = RewardKind::RingEight;
	double w_v = 2.0;
	double w_a = 4.0;
	double target_speed = 30.0 / 3.6;
	/// Acceleration threshold a-hat, m/s^2.
	double accel_threshold = 0.5;
	double w_h = 0.1;
	double t_min = 1.0;
	/// Time headway used for (near-)standstill CAVs and CAVs without a leader.
	double headway_cap = 100.0;

	void validate() const;
	bool operator==(const RewardSpec&) const = default;
};

/// r = -w_v (v_T - mean speed) + w_a (a-hat - mean |CAV accel|).
/// An empty speed list counts as mean speed 0; no CAVs means mean |accel| 0.
double reward_ring_eight(std::span<const double> speeds, std::span<const double> cav_accels, const RewardSpec& spec);

/// r = -w_v (v_T - mean speed) + w_h min((mean headway - t_min) / t_min, 0).
/// No CAVs: the headway term is 0.
double reward_merge(std::span<const double> speeds, std::span<const double> cav_headways, const RewardSpec& spec);

/// gap / speed, capped at `cap`.
double time_headway(double gap, double speed, double cap) noexcept;

/// Time headway of every CAV to its physical leader, in vehicle order.
std::vector<double> cav_headways(const sim::SimState& state, double cap);

/// Team reward of a post-step state.
double team_reward(const sim::SimState& state, const RewardSpec& spec);

} // namespace cavg::rl
