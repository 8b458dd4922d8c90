#pragma once

#include <cavg/sim/types.hpp>

namespace cavg::sim {

/// Desired dynamic gap s* = s0 + v*T + v*dv / (2*sqrt(a*b)), dv = v - v_leader.
double idm_desired_gap(double speed, double leader_speed, const IdmParams& params) noexcept;

/// Deterministic IDM acceleration. Throws DegenerateGap when leader_gap <= 0.
double idm_accel(double speed, double leader_gap, double leader_speed, const IdmParams& params);
double idm_accel(const VehicleState& ego, double leader_gap, double leader_speed, const IdmParams& params);

/// Free-road acceleration (no leader).
double idm_free_accel(double speed, const IdmParams& params) noexcept;

/// Speed at which a uniform platoon with bumper gap `gap` is in equilibrium.
double idm_equilibrium_speed(double gap, const IdmParams& params);

} // namespace cavg::sim
