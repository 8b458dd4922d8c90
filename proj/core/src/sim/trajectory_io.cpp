#include <cavg/sim/trajectory_io.hpp>

#include <cavg/common/error.hpp>

#include <fmt/format.h>

#include <cstdlib>
#include <sstream>

namespace cavg::sim {

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path)
	: out_(path) {
	if (!out_) {
		fail(ErrorCode::IoError, "cannot open " + path.string());
	}
	out_ << "step,vehicle_id,kind,route_pos,speed,accel\n";
}

void TrajectoryWriter::write(long step, const SimState& state) {
	for (const auto& v : state.vehicles) {
		out_ << fmt::format("{},{},{},{},{},{}\n", step, v.id, to_string(v.kind), v.route_pos, v.speed, v.last_accel);
	}
	if (!out_) {
		fail(ErrorCode::IoError, "trajectory write failed");
	}
}

std::vector<TrajectoryRow> read_trajectory(const std::filesystem::path& path) {
	std::ifstream in(path);
	if (!in) {
		fail(ErrorCode::IoError, "cannot open " + path.string());
	}
	std::string line;
	std::getline(in, line);
	if (line != "step,vehicle_id,kind,route_pos,speed,accel") {
		fail(ErrorCode::ParseError, "unexpected trajectory header: " + line);
	}
	std::vector<TrajectoryRow> rows;
	while (std::getline(in, line)) {
		if (line.empty()) {
			continue;
		}
		std::istringstream ss(line);
		std::string step, id, kind, pos, speed, accel;
		if (!std::getline(ss, step, ',') || !std::getline(ss, id, ',') || !std::getline(ss, kind, ',') ||
			!std::getline(ss, pos, ',') || !std::getline(ss, speed, ',') || !std::getline(ss, accel, ',')) {
			fail(ErrorCode::ParseError, "malformed trajectory row: " + line);
		}
		TrajectoryRow r;
		r.step = std::strtol(step.c_str(), nullptr, 10);
		r.vehicle_id = static_cast<int>(std::strtol(id.c_str(), nullptr, 10));
		r.kind = kind == "CAV" ? VehicleKind::Cav : VehicleKind::Human;
		r.route_pos = std::strtod(pos.c_str(), nullptr);
		r.speed = std::strtod(speed.c_str(), nullptr);
		r.accel = std::strtod(accel.c_str(), nullptr);
		rows.push_back(r);
	}
	return rows;
}

} // namespace cavg::sim
