#include <cavg/sim/types.hpp>

#include <cavg/common/error.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace cavg::sim {

namespace {
	void require(bool ok, const std::string& what) {
		if (!ok) {
			fail(ErrorCode::InvalidSpec, what);
		}
	}

	bool positive(double x) { return std::isfinite(x) && x > 0.0; }
} // namespace

std::string_view to_string(VehicleKind kind) noexcept {
	return kind == VehicleKind::Cav ? "CAV" : "Human";
}

std::string_view to_string(NetworkKind kind) noexcept {
	switch (kind) {
		case NetworkKind::Ring: return "ring";
		case NetworkKind::FigureEight: return "figure_eight";
		case NetworkKind::Merge: return "merge";
	}
	return "unknown";
}

double RoadNetwork::route_length(int route_id) const {
	switch (kind) {
		case NetworkKind::Ring: return ring_length;
		case NetworkKind::FigureEight: return loop_length;
		case NetworkKind::Merge:
			return route_id == 0 ? highway_length : ramp_length + highway_length - merge_point;
	}
	return 0.0;
}

double RoadNetwork::highway_coordinate(int route_id, double route_pos) const noexcept {
	if (kind == NetworkKind::Merge && route_id == 1) {
		return route_pos + merge_point - ramp_length;
	}
	return route_pos;
}

void RoadNetwork::validate() const {
	require(positive(vehicle_length), "vehicle_length must be > 0");
	switch (kind) {
		case NetworkKind::Ring:
			require(positive(ring_length), "ring_length must be > 0");
			break;
		case NetworkKind::FigureEight:
			require(positive(loop_length), "loop_length must be > 0");
			require(positive(conflict_length), "conflict_length must be > 0");
			require(conflict_start >= 0.0 && conflict_start + conflict_length <= loop_length,
				"conflict zone must lie within its loop");
			require(right_of_way_range >= 0.0, "right_of_way_range must be >= 0");
			break;
		case NetworkKind::Merge:
			require(positive(highway_length), "highway_length must be > 0");
			require(positive(ramp_length), "ramp_length must be > 0");
			require(positive(merge_point) && merge_point < highway_length, "merge_point must lie in (0, highway_length)");
			require(inflow_main >= 0.0 && inflow_ramp >= 0.0, "inflow rates must be >= 0");
			require(cav_share >= 0.0 && cav_share <= 1.0, "cav_share must lie in [0, 1]");
			require(spawn_speed >= 0.0, "spawn_speed must be >= 0");
			require(right_of_way_range >= 0.0, "right_of_way_range must be >= 0");
			break;
	}
}

void IdmParams::validate() const {
	require(positive(v0), "idm v0 must be > 0");
	require(positive(time_headway), "idm time headway must be > 0");
	require(positive(a_max), "idm a_max must be > 0");
	require(positive(b_comfort), "idm comfortable deceleration must be > 0");
	require(positive(delta), "idm delta must be > 0");
	require(positive(s0), "idm s0 must be > 0");
	require(noise_mag >= 0.0, "noise magnitude must be >= 0");
}

void SimParams::validate() const {
	idm.validate();
	require(cav.min < 0.0 && cav.max > 0.0, "CAV accel bounds must satisfy a_dec < 0 < a_acc");
	require(human.min < 0.0 && human.max > 0.0, "human accel bounds must straddle 0");
	require(positive(dt), "dt must be > 0");
}

int SimState::index_of(int vehicle_id) const noexcept {
	for (int i = 0; i < static_cast<int>(vehicles.size()); ++i) {
		if (vehicles[i].id == vehicle_id) {
			return i;
		}
	}
	return -1;
}

std::vector<int> SimState::cav_ids() const {
	std::vector<int> ids;
	for (const auto& v : vehicles) {
		if (v.is_cav()) {
			ids.push_back(v.id);
		}
	}
	return ids;
}

std::size_t SimState::cav_count() const noexcept {
	return static_cast<std::size_t>(std::count_if(vehicles.begin(), vehicles.end(), [](const auto& v) { return v.is_cav(); }));
}

} // namespace cavg::sim
