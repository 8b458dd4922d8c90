#pragma once

#include <cavg/sim/types.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace cavg::sim {

/// Streams `step,vehicle_id,kind,route_pos,speed,accel` rows. Numbers are written
/// in shortest round-trip form so a re-read reproduces every double exactly.
class TrajectoryWriter {
public:
	explicit TrajectoryWriter(const std::filesystem::path& path);

	void write(long step, const SimState& state);

private:
	std::ofstream out_;
};

struct TrajectoryRow {
	long step = 0;
	int vehicle_id = 0;
	VehicleKind kind = VehicleKind::Human;
	double route_pos = 0.0;
	double speed = 0.0;
	double accel = 0.0;
};

std::vector<TrajectoryRow> read_trajectory(const std::filesystem::path& path);

} // namespace cavg::sim
