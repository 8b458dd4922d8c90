#include <cavg/rl/reward.hpp>

#include <cavg/common/error.hpp>
#include <cavg/sim/geometry.hpp>

#include <algorithm>
#include <cmath>

namespace cavg::rl {

namespace {
	double mean_of(std::span<const double> xs) noexcept {
		if (xs.empty()) {
			return 0.0;
		}
		double s = 0.0;
		for (double x : xs) {
			s += x;
		}
		return s / static_cast<double>(xs.size());
	}
} // namespace

std::string_view to_string(RewardKind kind) noexcept {
	return kind == RewardKind::RingEight ? "ring_eight" : "merge";
}

void RewardSpec::validate() const {
	auto require = [](bool ok, const char* what) {
		if (!ok) {
			fail(ErrorCode::InvalidSpec, std::string("reward: ") + what);
		}
	};
	require(w_v >= 0.0 && w_a >= 0.0 && w_h >= 0.0, "weights must be >= 0");
	require(target_speed > 0.0, "target_speed must be > 0");
	require(t_min > 0.0, "t_min must be > 0");
	require(headway_cap > 0.0, "headway_cap must be > 0");
	require(std::isfinite(accel_threshold), "accel_threshold must be finite");
}

double reward_ring_eight(std::span<const double> speeds, std::span<const double> cav_accels, const RewardSpec& spec) {
	double abs_sum = 0.0;
	for (double a : cav_accels) {
		abs_sum += std::abs(a);
	}
	const double mean_abs = cav_accels.empty() ? 0.0 : abs_sum / static_cast<double>(cav_accels.size());
	return -spec.w_v * (spec.target_speed - mean_of(speeds)) + spec.w_a * (spec.accel_threshold - mean_abs);
}

double reward_merge(std::span<const double> speeds, std::span<const double> cav_headways, const RewardSpec& spec) {
	const double speed_term = -spec.w_v * (spec.target_speed - mean_of(speeds));
	if (cav_headways.empty()) {
		return speed_term;
	}
	const double h = mean_of(cav_headways);
	return speed_term + spec.w_h * std::min((h - spec.t_min) / spec.t_min, 0.0);
}

double time_headway(double gap, double speed, double cap) noexcept {
	if (!(speed > 0.0) || gap >= cap * speed) {
		return cap;
	}
	return gap / speed;
}

std::vector<double> cav_headways(const sim::SimState& state, double cap) {
	const auto leaders = sim::physical_leaders(state);
	std::vector<double> out;
	for (std::size_t i = 0; i < state.vehicles.size(); ++i) {
		const auto& v = state.vehicles[i];
		if (!v.is_cav()) {
			continue;
		}
		const auto& lead = leaders[i];
		out.push_back(lead.leader_index < 0 ? cap : time_headway(lead.gap, v.speed, cap));
	}
	return out;
}

double team_reward(const sim::SimState& state, const RewardSpec& spec) {
	std::vector<double> speeds;
	speeds.reserve(state.vehicles.size());
	for (const auto& v : state.vehicles) {
		speeds.push_back(v.speed);
	}
	if (spec.kind == RewardKind::Merge) {
		return reward_merge(speeds, cav_headways(state, spec.headway_cap), spec);
	}
	std::vector<double> accels;
	for (const auto& v : state.vehicles) {
		if (v.is_cav()) {
			accels.push_back(v.last_accel);
		}
	}
	return reward_ring_eight(speeds, accels, spec);
}

} // namespace cavg::rl
