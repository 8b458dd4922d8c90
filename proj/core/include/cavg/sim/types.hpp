#pragma once

#include <cavg/common/rng.hpp>

#include <memory>
#include <string_view>
#include <vector>

namespace cavg::sim {

enum class VehicleKind { Human, Cav };

std::string_view to_string(VehicleKind kind) noexcept;

struct VehicleState {
	int id = 0;
	VehicleKind kind = VehicleKind::Human;
	/// Front-bumper position along the vehicle's own route, meters.
	double route_pos = 0.0;
	double speed = 0.0;
	double last_accel = 0.0;
	int route_id = 0;

	bool is_cav() const noexcept { return kind == VehicleKind::Cav; }
	bool operator==(const VehicleState&) const = default;
};

enum class NetworkKind { Ring, FigureEight, Merge };

std::string_view to_string(NetworkKind kind) noexcept;

/// Topology descriptor. Only the fields of the selected kind are consulted.
///
/// Figure-eight: two loops of `loop_length`, each carrying the conflict zone
/// [conflict_start, conflict_start + conflict_length) in its own arc coordinate.
/// Vehicle k is assigned to loop k % 2.
///
/// Merge: route 0 is the highway [0, highway_length). Route 1 starts on the
/// ramp, reaches the highway at ramp_length and continues to the highway end,
/// so its length is ramp_length + highway_length - merge_point. Both routes are
/// mapped onto a shared highway coordinate, see `highway_coordinate`.
struct RoadNetwork {
	NetworkKind kind = NetworkKind::Ring;
	double ring_length = 230.0;

	double loop_length = 143.0;
	double conflict_start = 66.5;
	double conflict_length = 10.0;
	double right_of_way_range = 20.0;

	double highway_length = 500.0;
	double ramp_length = 100.0;
	double merge_point = 400.0;
	double inflow_main = 1000.0; // veh/h
	double inflow_ramp = 200.0;  // veh/h
	double cav_share = 0.25;     // spawn probability of a CAV
	double spawn_speed = 30.0 / 3.6;

	double vehicle_length = 5.0;

	bool closed() const noexcept { return kind != NetworkKind::Merge; }
	int route_count() const noexcept { return kind == NetworkKind::Ring ? 1 : 2; }
	double route_length(int route_id) const;
	/// Position on route 0 coordinates. Identity except for ramp vehicles.
	double highway_coordinate(int route_id, double route_pos) const noexcept;

	/// Throws InvalidSpec naming the violated invariant.
	void validate() const;

	bool operator==(const RoadNetwork&) const = default;
};

enum class NoiseDistribution { Uniform, Gaussian };

struct IdmParams {
	double v0 = 30.0 / 3.6;
	double time_headway = 1.0;
	double a_max = 1.0;
	double b_comfort = 1.5;
	double delta = 4.0;
	double s0 = 2.0;
	/// Uniform half-width, or standard deviation for Gaussian noise.
	double noise_mag = 0.2;

	void validate() const;
	bool operator==(const IdmParams&) const = default;
};

struct AccelBounds {
	double min = -3.0;
	double max = 3.0;

	double clamp(double a) const noexcept { return a < min ? min : (a > max ? max : a); }
	bool operator==(const AccelBounds&) const = default;
};

struct SimParams {
	IdmParams idm;
	NoiseDistribution noise = NoiseDistribution::Uniform;
	AccelBounds cav{-3.0, 3.0};
	AccelBounds human{-9.0, 3.0};
	double dt = 0.1;
	/// Cap CAV speed at a kinematically safe speed behind the physical leader.
	bool safety_clamp = false;

	void validate() const;
	bool operator==(const SimParams&) const = default;
};

struct Scenario {
	RoadNetwork network;
	SimParams params;
	bool operator==(const Scenario&) const = default;
};

struct SpawnState {
	double credit_main = 0.0;
	double credit_ramp = 0.0;
	bool operator==(const SpawnState&) const = default;
};

struct SimState {
	std::shared_ptr<const Scenario> scenario;
	long time_step = 0;
	/// Stable order (by id). Route order is recomputed from positions.
	std::vector<VehicleState> vehicles;
	Rng rng;
	bool collided = false;
	SpawnState spawn;
	int next_id = 0;
	int exited = 0;

	const RoadNetwork& network() const noexcept { return scenario->network; }
	const SimParams& params() const noexcept { return scenario->params; }

	/// Index into `vehicles`, or -1.
	int index_of(int vehicle_id) const noexcept;
	std::vector<int> cav_ids() const;
	std::size_t cav_count() const noexcept;
};

} // namespace cavg::sim
