#include <cavg/sim/simulator.hpp>

#include <cavg/common/error.hpp>
#include <cavg/sim/geometry.hpp>
#include <cavg/sim/idm.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace cavg::sim {

namespace {

	constexpr double kMaxPendingSpawns = 3.0;

	std::vector<bool> cav_slots(int total, int n_cav, std::uint64_t seed) {
		std::vector<bool> slots(total, false);
		if (n_cav == 0) {
			return slots;
		}
		auto rng = make_stream(seed, StreamPurpose::Init);
		const auto phase = static_cast<long>(rng() % static_cast<std::uint64_t>(total));
		for (long j = 0; j < n_cav; ++j) {
			const long k = (j * total) / n_cav;
			slots[(k + phase) % total] = true;
		}
		return slots;
	}

	void check_loop_capacity(const RoadNetwork& net, const IdmParams& idm, int count, double length) {
		if (count == 0) {
			return;
		}
		const double gap = length / count - net.vehicle_length;
		if (!(gap > 0.0) || !(count * idm.s0 < length)) {
			fail(ErrorCode::CapacityExceeded, std::to_string(count) + " vehicles do not fit on a " + std::to_string(length) +
				" m loop with positive gaps");
		}
	}

	double noise_sample(Rng& rng, NoiseDistribution dist, double mag) {
		if (mag == 0.0) {
			return 0.0;
		}
		if (dist == NoiseDistribution::Uniform) {
			return std::uniform_real_distribution<double>(-mag, mag)(rng);
		}
		return std::normal_distribution<double>(0.0, mag)(rng);
	}

	// Try to insert one vehicle at the start of `route`.
	bool try_spawn(SimState& s, int route, StepInfo& info) {
		const auto& net = s.network();
		const auto& idm = s.params().idm;
		double upstream_rear = kNoGap;
		for (const auto& v : s.vehicles) {
			if (v.route_id == route) {
				upstream_rear = std::min(upstream_rear, v.route_pos - net.vehicle_length);
			}
		}
		const double needed = idm.s0 + net.spawn_speed * idm.time_headway;
		// The CAV draw is consumed even when the entry is blocked so the stream
		// advances identically regardless of congestion.
		const bool cav = std::uniform_real_distribution<double>(0.0, 1.0)(s.rng) < net.cav_share;
		if (upstream_rear < needed) {
			return false;
		}
		VehicleState v;
		v.id = s.next_id++;
		v.kind = cav ? VehicleKind::Cav : VehicleKind::Human;
		v.route_id = route;
		v.route_pos = 0.0;
		v.speed = net.spawn_speed;
		v.last_accel = 0.0;
		s.vehicles.push_back(v);
		info.spawned_ids.push_back(v.id);
		return true;
	}

	void run_spawns(SimState& s, double dt, StepInfo& info) {
		const auto& net = s.network();
		auto process = [&](double& credit, double inflow, int route) {
			credit = std::min(credit + inflow / 3600.0 * dt, kMaxPendingSpawns);
			if (credit >= 1.0 && try_spawn(s, route, info)) {
				credit -= 1.0;
			}
		};
		process(s.spawn.credit_main, net.inflow_main, 0);
		process(s.spawn.credit_ramp, net.inflow_ramp, 1);
	}

} // namespace

SimState build_network(std::shared_ptr<const Scenario> scenario, int n_human, int n_cav, std::uint64_t seed) {
	if (!scenario) {
		fail(ErrorCode::InvalidSpec, "scenario is null");
	}
	const auto& net = scenario->network;
	net.validate();
	scenario->params.validate();
	if (n_human < 0 || n_cav < 0) {
		fail(ErrorCode::InvalidSpec, "vehicle counts must be >= 0");
	}

	SimState s;
	s.scenario = scenario;
	s.rng = make_stream(seed, StreamPurpose::Environment);

	if (net.kind == NetworkKind::Merge) {
		return s;
	}

	const int total = n_human + n_cav;
	if (total < 1) {
		fail(ErrorCode::InvalidSpec, "closed networks need at least one vehicle");
	}
	const auto slots = cav_slots(total, n_cav, seed);
	const auto& idm = scenario->params.idm;

	if (net.kind == NetworkKind::Ring) {
		check_loop_capacity(net, idm, total, net.ring_length);
		const double spacing = net.ring_length / total;
		for (int k = 0; k < total; ++k) {
			s.vehicles.push_back({k, slots[k] ? VehicleKind::Cav : VehicleKind::Human, k * spacing, 0.0, 0.0, 0});
		}
	} else {
		const int on_loop[2] = {(total + 1) / 2, total / 2};
		for (int loop = 0; loop < 2; ++loop) {
			check_loop_capacity(net, idm, on_loop[loop], net.loop_length);
		}
		// First vehicle's rear sits at the zone exit on both loops.
		const double start = net.conflict_start + net.conflict_length + net.vehicle_length;
		int placed[2] = {0, 0};
		for (int k = 0; k < total; ++k) {
			const int loop = k % 2;
			const double spacing = net.loop_length / on_loop[loop];
			const double pos = wrap(start + placed[loop]++ * spacing, net.loop_length);
			s.vehicles.push_back({k, slots[k] ? VehicleKind::Cav : VehicleKind::Human, pos, 0.0, 0.0, loop});
		}
	}
	s.next_id = total;
	if (detect_collision(s)) {
		fail(ErrorCode::CapacityExceeded, "vehicles cannot be placed without a conflict at t = 0");
	}
	return s;
}

double idm_response(const std::vector<LeaderConstraint>& constraints, double speed, const SimParams& p) {
	double a = idm_free_accel(speed, p.idm);
	for (const auto& c : constraints) {
		if (!(c.gap > 0.0)) {
			return p.human.min;
		}
		a = std::min(a, idm_accel(speed, c.gap, c.leader_speed, p.idm));
	}
	return a;
}

double idm_controller_accel(const SimState& state, int index) {
	const auto constraints = idm_constraints(state);
	return idm_response(constraints[index], state.vehicles[index].speed, state.params());
}

ActionMap idm_cav_actions(const SimState& state, Rng* noise_rng) {
	const auto constraints = idm_constraints(state);
	const auto& p = state.params();
	ActionMap actions;
	for (std::size_t i = 0; i < state.vehicles.size(); ++i) {
		const auto& v = state.vehicles[i];
		if (!v.is_cav()) {
			continue;
		}
		double a = idm_response(constraints[i], v.speed, p);
		if (noise_rng != nullptr) {
			a += noise_sample(*noise_rng, p.noise, p.idm.noise_mag);
		}
		actions[v.id] = a;
	}
	return actions;
}

SimState warm_up(SimState state, int steps) {
	for (int k = 0; k < steps && !state.collided; ++k) {
		const ActionMap actions = idm_cav_actions(state, &state.rng);
		state = step(state, actions, state.params().dt).state;
	}
	return state;
}

double safe_accel_bound(const SimState& state, int index, double dt) {
	const auto leaders = physical_leaders(state);
	const auto& lead = leaders[index];
	const auto& p = state.params();
	if (lead.leader_index < 0) {
		return p.cav.max;
	}
	const double b = -p.cav.min;
	const double room = lead.gap - p.idm.s0 + lead.leader_speed * lead.leader_speed / (2.0 * b);
	const double radicand = b * dt * b * dt + 2.0 * b * room;
	const double v_safe = radicand > 0.0 ? std::max(0.0, -b * dt + std::sqrt(radicand)) : 0.0;
	return std::max(p.cav.min, (v_safe - state.vehicles[index].speed) / dt);
}

StepResult step(const SimState& state, const ActionMap& cav_actions, double dt) {
	if (!(dt > 0.0)) {
		fail(ErrorCode::InvalidSpec, "dt must be > 0");
	}
	const auto& net = state.network();
	const auto& p = state.params();
	const int n = static_cast<int>(state.vehicles.size());

	StepResult out{state, {}};
	SimState& next = out.state;

	const auto constraints = idm_constraints(state);
	std::vector<double> accel(n, 0.0);
	for (int i = 0; i < n; ++i) {
		const auto& v = state.vehicles[i];
		if (v.is_cav()) {
			const auto it = cav_actions.find(v.id);
			if (it == cav_actions.end()) {
				fail(ErrorCode::UnknownVehicle, "no action supplied for CAV " + std::to_string(v.id));
			}
			if (!std::isfinite(it->second)) {
				fail(ErrorCode::NonFiniteValue, "non-finite action for CAV " + std::to_string(v.id));
			}
			double a = p.cav.clamp(it->second);
			if (p.safety_clamp) {
				a = std::min(a, safe_accel_bound(state, i, dt));
			}
			accel[i] = a;
		} else {
			const double a = idm_response(constraints[i], v.speed, p);
			accel[i] = p.human.clamp(a + noise_sample(next.rng, p.noise, p.idm.noise_mag));
		}
	}

	for (int i = 0; i < n; ++i) {
		auto& v = next.vehicles[i];
		v.speed = std::max(0.0, v.speed + accel[i] * dt);
		v.route_pos += v.speed * dt;
		v.last_accel = accel[i];
		if (net.closed()) {
			v.route_pos = wrap(v.route_pos, net.route_length(v.route_id));
		}
	}

	if (net.kind == NetworkKind::Merge) {
		auto& vs = next.vehicles;
		for (const auto& v : vs) {
			if (v.route_pos >= net.route_length(v.route_id)) {
				out.info.exited_ids.push_back(v.id);
			}
		}
		vs.erase(std::remove_if(vs.begin(), vs.end(), [&](const VehicleState& v) {
			return v.route_pos >= net.route_length(v.route_id);
		}), vs.end());
		next.exited += static_cast<int>(out.info.exited_ids.size());
		run_spawns(next, dt, out.info);
	}

	next.time_step = state.time_step + 1;
	next.collided = detect_collision(next);

	out.info.collided = next.collided;
	out.info.speeds.reserve(next.vehicles.size());
	out.info.accels.reserve(next.vehicles.size());
	for (const auto& v : next.vehicles) {
		out.info.speeds.push_back(v.speed);
		out.info.accels.push_back(v.last_accel);
	}
	return out;
}

bool detect_collision(const SimState& state) {
	const auto& net = state.network();
	const auto& vs = state.vehicles;
	if (net.closed()) {
		for (const auto& lead : physical_leaders(state)) {
			if (lead.leader_index >= 0 && lead.gap <= 0.0) {
				return true;
			}
		}
		if (net.kind == NetworkKind::FigureEight) {
			bool occupied[2] = {false, false};
			for (const auto& v : vs) {
				occupied[v.route_id] = occupied[v.route_id] || in_conflict_zone(net, v.route_pos);
			}
			return occupied[0] && occupied[1];
		}
		return false;
	}
	for (std::size_t i = 0; i < vs.size(); ++i) {
		const double hi_i = lane_coordinate(net, vs[i]);
		const double lo_i = hi_i - net.vehicle_length;
		for (std::size_t j = i + 1; j < vs.size(); ++j) {
			const double hi_j = lane_coordinate(net, vs[j]);
			const double lo_j = hi_j - net.vehicle_length;
			const double lo = std::max(lo_i, lo_j);
			const double hi = std::min(hi_i, hi_j);
			if (lo > hi) {
				continue;
			}
			if (vs[i].route_id == vs[j].route_id || hi > net.merge_point) {
				return true;
			}
		}
	}
	return false;
}

} // namespace cavg::sim
