#include <cavg/sim/observation.hpp>

#include <cavg/common/error.hpp>
#include <cavg/sim/geometry.hpp>

#include <string>

namespace cavg::sim {

Observation local_observation(const SimState& state, int cav_id, double target_speed, double sensing_range) {
	const int idx = state.index_of(cav_id);
	if (idx < 0 || !state.vehicles[idx].is_cav()) {
		fail(ErrorCode::UnknownVehicle, "no live CAV with id " + std::to_string(cav_id));
	}
	const auto& net = state.network();
	const auto& ego = state.vehicles[idx];
	const double length = net.route_length(ego.route_id);
	const auto nb = cav_neighbours(state, idx);

	Observation o{ego.speed / target_speed, ego.route_pos / length, 0.0, 1.0, 0.0, 1.0};
	if (nb.leader_index >= 0 && nb.leader_distance <= sensing_range) {
		o[2] = (state.vehicles[nb.leader_index].speed - ego.speed) / target_speed;
		o[3] = nb.leader_distance / length;
	}
	if (nb.follower_index >= 0 && nb.follower_distance <= sensing_range) {
		o[4] = (state.vehicles[nb.follower_index].speed - ego.speed) / target_speed;
		o[5] = nb.follower_distance / length;
	}
	return o;
}

} // namespace cavg::sim
