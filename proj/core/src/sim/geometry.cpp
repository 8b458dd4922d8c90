#include <cavg/sim/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cavg::sim {

namespace {

	constexpr double kMinVirtualGap = 0.1;

	// Indices of vehicles on `route`, ordered by position (ties by index).
	std::vector<int> route_order(const SimState& state, int route) {
		std::vector<int> idx;
		for (int i = 0; i < static_cast<int>(state.vehicles.size()); ++i) {
			if (state.vehicles[i].route_id == route) {
				idx.push_back(i);
			}
		}
		std::sort(idx.begin(), idx.end(), [&](int a, int b) {
			const double pa = state.vehicles[a].route_pos;
			const double pb = state.vehicles[b].route_pos;
			return pa < pb || (pa == pb && a < b);
		});
		return idx;
	}

	double cyclic_shortest(double a, double b, double length) noexcept {
		const double m = wrap(a - b, length);
		return std::min(m, length - m);
	}

	double cyclic_signed(double a, double b, double length) noexcept {
		const double m = wrap(a - b, length);
		return m > 0.5 * length ? m - length : m;
	}

	double conflict_centre(const RoadNetwork& net) noexcept {
		return net.conflict_start + 0.5 * net.conflict_length;
	}

	bool upstream_of_merge(const RoadNetwork& net, const VehicleState& v) noexcept {
		return net.highway_coordinate(v.route_id, v.route_pos) < net.merge_point;
	}

	// Constraint from the crossing loop of a figure eight, if the ego must yield.
	bool must_yield_at_crossing(const SimState& state, int ego_index) {
		const auto& net = state.network();
		const auto& ego = state.vehicles[ego_index];
		if (in_conflict_zone(net, ego.route_pos)) {
			return false;
		}
		const double d_ego = wrap(net.conflict_start - ego.route_pos, net.loop_length);
		if (d_ego > net.right_of_way_range) {
			return false;
		}
		for (const auto& other : state.vehicles) {
			if (other.route_id == ego.route_id) {
				continue;
			}
			if (in_conflict_zone(net, other.route_pos)) {
				return true;
			}
			const double d_other = wrap(net.conflict_start - other.route_pos, net.loop_length);
			if (d_other <= net.right_of_way_range &&
				(d_other < d_ego || (d_other == d_ego && other.route_id < ego.route_id))) {
				return true;
			}
		}
		return false;
	}

	// Nearest vehicle from the other route that the ego zips behind near the merge.
	LeaderConstraint merge_zip_constraint(const SimState& state, int ego_index) {
		const auto& net = state.network();
		const auto& ego = state.vehicles[ego_index];
		const double x_ego = lane_coordinate(net, ego);
		LeaderConstraint best;
		if (x_ego >= net.merge_point || x_ego < net.merge_point - net.right_of_way_range) {
			return best;
		}
		double best_x = kNoGap;
		for (int j = 0; j < static_cast<int>(state.vehicles.size()); ++j) {
			const auto& other = state.vehicles[j];
			if (other.route_id == ego.route_id) {
				continue;
			}
			const double x_other = lane_coordinate(net, other);
			if (x_other >= net.merge_point || x_other < net.merge_point - net.right_of_way_range) {
				continue; // already on the shared lane (physical leader) or not yet merging
			}
			const bool ahead = x_other > x_ego || (x_other == x_ego && other.route_id < ego.route_id);
			if (ahead && x_other < best_x) {
				best_x = x_other;
				best.leader_index = j;
				best.gap = std::max(x_other - net.vehicle_length - x_ego, kMinVirtualGap);
				best.leader_speed = other.speed;
			}
		}
		return best;
	}

} // namespace

double wrap(double pos, double length) noexcept {
	double r = std::fmod(pos, length);
	if (r < 0.0) {
		r += length;
	}
	if (r >= length) {
		r = 0.0;
	}
	return r;
}

double lane_coordinate(const RoadNetwork& net, const VehicleState& v) noexcept {
	return net.highway_coordinate(v.route_id, v.route_pos);
}

bool shares_lane_ahead(const RoadNetwork& net, const VehicleState& ego, const VehicleState& ahead) noexcept {
	if (ego.route_id == ahead.route_id) {
		return true;
	}
	if (net.kind != NetworkKind::Merge) {
		return false;
	}
	return lane_coordinate(net, ahead) >= net.merge_point;
}

bool in_conflict_zone(const RoadNetwork& net, double route_pos) noexcept {
	if (net.kind != NetworkKind::FigureEight) {
		return false;
	}
	// Occupied interval [pos - l, pos] against [start, start + len), on a loop.
	const double rear = wrap(route_pos - net.vehicle_length, net.loop_length);
	const double rel_rear = wrap(rear - net.conflict_start, net.loop_length);
	// Overlap iff the rear lies in the zone, or the zone start lies within the body.
	if (rel_rear < net.conflict_length) {
		return true;
	}
	const double start_in_body = wrap(net.conflict_start - rear, net.loop_length);
	return start_in_body < net.vehicle_length;
}

std::vector<LeaderConstraint> physical_leaders(const SimState& state) {
	const auto& net = state.network();
	const int n = static_cast<int>(state.vehicles.size());
	std::vector<LeaderConstraint> out(n);
	if (net.closed()) {
		for (int route = 0; route < net.route_count(); ++route) {
			const auto order = route_order(state, route);
			const double length = net.route_length(route);
			const int m = static_cast<int>(order.size());
			for (int k = 0; k < m; ++k) {
				const int ego = order[k];
				const int lead = order[(k + 1) % m];
				const double spacing = (lead == ego)
					? length
					: wrap(state.vehicles[lead].route_pos - state.vehicles[ego].route_pos, length);
				out[ego] = {lead, spacing - net.vehicle_length, state.vehicles[lead].speed};
			}
		}
		return out;
	}
	for (int i = 0; i < n; ++i) {
		const auto& ego = state.vehicles[i];
		const double x_ego = lane_coordinate(net, ego);
		double best_x = kNoGap;
		for (int j = 0; j < n; ++j) {
			if (j == i) {
				continue;
			}
			const auto& other = state.vehicles[j];
			const double x_other = lane_coordinate(net, other);
			const bool ahead = x_other > x_ego || (x_other == x_ego && j > i);
			if (ahead && x_other < best_x && shares_lane_ahead(net, ego, other)) {
				best_x = x_other;
				out[i] = {j, x_other - net.vehicle_length - x_ego, other.speed};
			}
		}
	}
	return out;
}

std::vector<std::vector<LeaderConstraint>> idm_constraints(const SimState& state) {
	const auto& net = state.network();
	const auto leaders = physical_leaders(state);
	std::vector<std::vector<LeaderConstraint>> out(leaders.size());
	for (std::size_t i = 0; i < leaders.size(); ++i) {
		if (leaders[i].leader_index >= 0) {
			out[i].push_back(leaders[i]);
		}
		if (net.kind == NetworkKind::FigureEight && must_yield_at_crossing(state, static_cast<int>(i))) {
			const double d = wrap(net.conflict_start - state.vehicles[i].route_pos, net.loop_length);
			out[i].push_back({-1, std::max(d, kMinVirtualGap), 0.0});
		}
		if (net.kind == NetworkKind::Merge) {
			const auto zip = merge_zip_constraint(state, static_cast<int>(i));
			if (zip.leader_index >= 0) {
				out[i].push_back(zip);
			}
		}
	}
	return out;
}

double route_distance(const RoadNetwork& net, const VehicleState& a, const VehicleState& b) noexcept {
	switch (net.kind) {
		case NetworkKind::Ring:
			return cyclic_shortest(a.route_pos, b.route_pos, net.ring_length);
		case NetworkKind::FigureEight: {
			if (a.route_id == b.route_id) {
				return cyclic_shortest(a.route_pos, b.route_pos, net.loop_length);
			}
			const double c = conflict_centre(net);
			return cyclic_shortest(a.route_pos, c, net.loop_length) + cyclic_shortest(b.route_pos, c, net.loop_length);
		}
		case NetworkKind::Merge: {
			const double xa = lane_coordinate(net, a);
			const double xb = lane_coordinate(net, b);
			if (a.route_id != b.route_id && upstream_of_merge(net, a) && upstream_of_merge(net, b)) {
				return (net.merge_point - xa) + (net.merge_point - xb);
			}
			return std::abs(xa - xb);
		}
	}
	return kNoGap;
}

double signed_route_offset(const RoadNetwork& net, const VehicleState& a, const VehicleState& b) noexcept {
	switch (net.kind) {
		case NetworkKind::Ring:
			return cyclic_signed(a.route_pos, b.route_pos, net.ring_length);
		case NetworkKind::FigureEight: {
			if (a.route_id == b.route_id) {
				return cyclic_signed(a.route_pos, b.route_pos, net.loop_length);
			}
			const double c = conflict_centre(net);
			const double pa = cyclic_signed(a.route_pos, c, net.loop_length);
			const double pb = cyclic_signed(b.route_pos, c, net.loop_length);
			const double d = route_distance(net, a, b);
			return pa >= pb ? d : -d;
		}
		case NetworkKind::Merge: {
			const double d = route_distance(net, a, b);
			return lane_coordinate(net, a) >= lane_coordinate(net, b) ? d : -d;
		}
	}
	return 0.0;
}

CavNeighbours cav_neighbours(const SimState& state, int vehicle_index) {
	const auto& net = state.network();
	const auto& ego = state.vehicles[vehicle_index];
	CavNeighbours out;
	if (net.closed()) {
		const double length = net.route_length(ego.route_id);
		for (int j = 0; j < static_cast<int>(state.vehicles.size()); ++j) {
			const auto& other = state.vehicles[j];
			if (j == vehicle_index || !other.is_cav() || other.route_id != ego.route_id) {
				continue;
			}
			const double fwd = wrap(other.route_pos - ego.route_pos, length);
			const double ahead = fwd == 0.0 ? (j > vehicle_index ? 0.0 : length) : fwd;
			const double behind = length - ahead;
			if (ahead < out.leader_distance) {
				out.leader_distance = ahead;
				out.leader_index = j;
			}
			if (behind < out.follower_distance) {
				out.follower_distance = behind;
				out.follower_index = j;
			}
		}
		return out;
	}
	const double x_ego = lane_coordinate(net, ego);
	for (int j = 0; j < static_cast<int>(state.vehicles.size()); ++j) {
		const auto& other = state.vehicles[j];
		if (j == vehicle_index || !other.is_cav()) {
			continue;
		}
		const double x_other = lane_coordinate(net, other);
		const bool ahead = x_other > x_ego || (x_other == x_ego && j > vehicle_index);
		if (ahead) {
			if (shares_lane_ahead(net, ego, other) && x_other - x_ego < out.leader_distance) {
				out.leader_distance = x_other - x_ego;
				out.leader_index = j;
			}
		} else if (shares_lane_ahead(net, other, ego) && x_ego - x_other < out.follower_distance) {
			out.follower_distance = x_ego - x_other;
			out.follower_index = j;
		}
	}
	return out;
}

} // namespace cavg::sim
