#pragma once

#include <cavg/sim/types.hpp>

#include <limits>
#include <vector>

namespace cavg::sim {

inline constexpr double kNoGap = std::numeric_limits<double>::infinity();

/// Something an IDM driver reacts to: a real vehicle or a virtual stop line.
struct LeaderConstraint {
	int leader_index = -1; // -1 for virtual leaders
	double gap = kNoGap;   // bumper-to-bumper, meters
	double leader_speed = 0.0;
};

/// Wrap into [0, length).
double wrap(double pos, double length) noexcept;

/// Highway coordinate of a vehicle (route position for closed networks).
double lane_coordinate(const RoadNetwork& net, const VehicleState& v) noexcept;

/// True when `ahead` shares the physical lane of `ego` at `ahead`'s position
/// (same route, or `ahead` already on the shared highway section).
bool shares_lane_ahead(const RoadNetwork& net, const VehicleState& ego, const VehicleState& ahead) noexcept;

/// Nearest same-lane vehicle ahead of each vehicle. On a closed loop with a
/// single vehicle the vehicle follows its own tail.
std::vector<LeaderConstraint> physical_leaders(const SimState& state);

/// Physical leaders plus right-of-way constraints (figure-eight conflict zone,
/// merge zipper). Entry i lists every constraint for vehicle i.
std::vector<std::vector<LeaderConstraint>> idm_constraints(const SimState& state);

/// Non-negative route distance between two vehicles: shortest cyclic distance on
/// a loop, distance through the crossing point / merge point across routes.
double route_distance(const RoadNetwork& net, const VehicleState& a, const VehicleState& b) noexcept;

/// Signed offset x_a - x_b with magnitude `route_distance`.
double signed_route_offset(const RoadNetwork& net, const VehicleState& a, const VehicleState& b) noexcept;

/// Does the occupied interval [pos - length, pos] overlap the conflict zone?
bool in_conflict_zone(const RoadNetwork& net, double route_pos) noexcept;

/// Same-lane neighbour CAVs used by the local observation.
struct CavNeighbours {
	int leader_index = -1;
	double leader_distance = kNoGap;
	int follower_index = -1;
	double follower_distance = kNoGap;
};

CavNeighbours cav_neighbours(const SimState& state, int vehicle_index);

} // namespace cavg::sim
