#include <cavg/sim/idm.hpp>

#include <cavg/common/error.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace cavg::sim {

double idm_desired_gap(const double speed, const double leader_speed, const IdmParams& p) noexcept {
	const double closing = speed - leader_speed;
	return p.s0 + speed * p.time_headway + speed * closing / (2.0 * std::sqrt(p.a_max * p.b_comfort));
}

double idm_free_accel(const double speed, const IdmParams& p) noexcept {
	return p.a_max * (1.0 - std::pow(speed / p.v0, p.delta));
}

double idm_accel(const double speed, const double leader_gap, const double leader_speed, const IdmParams& p) {
	if (!(leader_gap > 0.0)) {
		fail(ErrorCode::DegenerateGap, "IDM leader gap must be positive, got " + std::to_string(leader_gap));
	}
	const double s_star = idm_desired_gap(speed, leader_speed, p);
	const double interaction = s_star / leader_gap;
	return p.a_max * (1.0 - std::pow(speed / p.v0, p.delta) - interaction * interaction);
}

double idm_accel(const VehicleState& ego, const double leader_gap, const double leader_speed, const IdmParams& p) {
	return idm_accel(ego.speed, leader_gap, leader_speed, p);
}

double idm_equilibrium_speed(const double gap, const IdmParams& p) {
	if (!(gap > p.s0)) {
		return 0.0;
	}
	// accel(v) is strictly decreasing in v for dv = 0 on [0, v0].
	double lo = 0.0;
	double hi = p.v0;
	for (int it = 0; it < 200; ++it) {
		const double mid = 0.5 * (lo + hi);
		if (idm_accel(mid, gap, mid, p) > 0.0) {
			lo = mid;
		} else {
			hi = mid;
		}
	}
	return 0.5 * (lo + hi);
}

} // namespace cavg::sim
