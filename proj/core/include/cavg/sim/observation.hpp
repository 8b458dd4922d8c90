#pragma once

#include <cavg/sim/types.hpp>

#include <array>
#include <limits>

namespace cavg::sim {

inline constexpr std::size_t kObservationSize = 6;

/// [own speed / v_T, own pos / route length,
///  (leader CAV speed - own speed) / v_T, leader CAV distance / route length,
///  (follower CAV speed - own speed) / v_T, follower CAV distance / route length]
///
/// A neighbour slot that is absent, or farther than `sensing_range`, holds the
/// sentinel (0, 1).
using Observation = std::array<double, kObservationSize>;

Observation local_observation(const SimState& state, int cav_id, double target_speed,
	double sensing_range = std::numeric_limits<double>::infinity());

} // namespace cavg::sim
