#include <cavg/eval/evaluate.hpp>

#include <cavg/common/error.hpp>
#include <cavg/rl/ppo.hpp>
#include <cavg/sim/trajectory_io.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace cavg::eval {

namespace {

	std::ofstream open_out(const std::filesystem::path& path) {
		if (path.has_parent_path()) {
			std::filesystem::create_directories(path.parent_path());
		}
		std::ofstream out(path);
		if (!out) {
			fail(ErrorCode::IoError, "cannot write " + path.string());
		}
		return out;
	}

	std::ifstream open_in(const std::filesystem::path& path) {
		std::ifstream in(path);
		if (!in) {
			fail(ErrorCode::IoError, "cannot open " + path.string());
		}
		return in;
	}

	std::vector<std::string> split(const std::string& line) {
		std::vector<std::string> out;
		std::stringstream ss(line);
		std::string cell;
		while (std::getline(ss, cell, ',')) {
			out.push_back(cell);
		}
		return out;
	}

	std::pair<double, double> mean_std(const std::vector<double>& xs) {
		if (xs.empty()) {
			return {0.0, 0.0};
		}
		double m = 0.0;
		for (double x : xs) {
			m += x;
		}
		m /= static_cast<double>(xs.size());
		double q = 0.0;
		for (double x : xs) {
			q += (x - m) * (x - m);
		}
		return {m, std::sqrt(q / static_cast<double>(xs.size()))};
	}

	void append_space_time(std::vector<SpaceTimeRow>& rows, const sim::SimState& s, long step) {
		for (const auto& v : s.vehicles) {
			rows.push_back({step, v.id, v.route_pos, v.speed});
		}
	}

	struct EpisodeOutput {
		EpisodeMetrics metrics;
		std::vector<SpaceTimeRow> space_time;
	};

	EpisodeOutput run_episode(nn::ActorNetwork* actor, rl::Environment& env, std::uint64_t seed, bool record,
		const std::filesystem::path& trajectory_dir, std::uint64_t tag, const std::filesystem::path& adjacency_dir) {
		env.reset(seed);
		Rng baseline_noise = make_stream(seed, StreamPurpose::Evaluation);
		EpisodeOutput out;
		rl::StatsAccumulator stats;

		std::optional<sim::TrajectoryWriter> traj;
		std::optional<std::ofstream> rewards;
		std::map<int, int> routes;
		if (!trajectory_dir.empty()) {
			std::filesystem::create_directories(trajectory_dir);
			traj.emplace(trajectory_dir / fmt::format("trajectory_seed{}.csv", tag));
			rewards.emplace(open_out(trajectory_dir / fmt::format("rewards_seed{}.csv", tag)));
			*rewards << "step,reward\n";
		}
		if (!adjacency_dir.empty()) {
			std::filesystem::create_directories(adjacency_dir);
		}

		while (!env.done()) {
			const auto ids = env.agents();
			Vector actions(static_cast<Eigen::Index>(ids.size()));
			if (!ids.empty()) {
				const auto adj = env.adjacency();
				if (!adjacency_dir.empty()) {
					graph::write_adjacency_csv(adjacency_dir / fmt::format("step_{}.csv", env.steps()), adj);
				}
				if (actor != nullptr) {
					actions = actor->mean_actions(env.observe(ids), nn::GraphInputs::from(adj));
				} else {
					const auto idm = sim::idm_cav_actions(env.state(), &baseline_noise);
					for (std::size_t i = 0; i < ids.size(); ++i) {
						actions(static_cast<Eigen::Index>(i)) = idm.at(ids[i]);
					}
				}
			}
			const auto outcome = env.step(actions);
			const auto& s = env.state();
			stats.add(s, outcome.reward, outcome.collided);
			if (record) {
				append_space_time(out.space_time, s, env.steps());
			}
			if (traj) {
				traj->write(env.steps(), s);
				*rewards << fmt::format("{},{}\n", env.steps(), outcome.reward);
				for (const auto& v : s.vehicles) {
					routes[v.id] = v.route_id;
				}
			}
		}
		if (traj) {
			auto r = open_out(trajectory_dir / fmt::format("routes_seed{}.csv", tag));
			r << "vehicle_id,route_id\n";
			for (const auto& [id, route] : routes) {
				r << id << ',' << route << '\n';
			}
		}
		const auto st = stats.result();
		out.metrics = {st.ret, st.mean_speed, st.mean_abs_accel, st.length, st.collided};
		return out;
	}

} // namespace

std::uint64_t eval_episode_seed(std::uint64_t seed, int episode) noexcept {
	return derive_seed(seed, StreamPurpose::Evaluation, static_cast<std::uint64_t>(episode) + 1);
}

EvalReport evaluate(nn::ActorNetwork* actor, const rl::EnvConfig& env_config, std::span<const std::uint64_t> seeds,
	const EvalOptions& options) {
	if (seeds.empty()) {
		fail(ErrorCode::InvalidSpec, "evaluate: seed list is empty");
	}
	if (options.episodes < 1) {
		fail(ErrorCode::InvalidSpec, "evaluate: episodes must be >= 1");
	}
	rl::Environment env(env_config);
	EvalReport report;
	std::vector<double> rets, vels, accs;
	double collisions = 0.0;
	for (std::size_t si = 0; si < seeds.size(); ++si) {
		const auto seed = seeds[si];
		SeedReport sr;
		sr.seed = seed;
		std::vector<double> r, v, a;
		for (int k = 0; k < options.episodes; ++k) {
			const bool first = k == 0;
			auto ep = run_episode(actor, env, eval_episode_seed(seed, k), first,
				first ? options.trajectory_dir : std::filesystem::path{}, seed,
				first && si == 0 ? options.adjacency_dir : std::filesystem::path{});
			r.push_back(ep.metrics.ret);
			v.push_back(ep.metrics.mean_velocity);
			a.push_back(ep.metrics.mean_abs_accel);
			sr.collision_rate += ep.metrics.collided ? 1.0 : 0.0;
			collisions += ep.metrics.collided ? 1.0 : 0.0;
			if (first) {
				sr.space_time = std::move(ep.space_time);
			}
			sr.episodes.push_back(ep.metrics);
		}
		sr.ret = mean_std(r).first;
		sr.mean_velocity = mean_std(v).first;
		sr.mean_abs_accel = mean_std(a).first;
		sr.collision_rate /= options.episodes;
		rets.push_back(sr.ret);
		vels.push_back(sr.mean_velocity);
		accs.push_back(sr.mean_abs_accel);
		report.seeds.push_back(std::move(sr));
	}
	std::tie(report.ret, report.std_ret) = mean_std(rets);
	std::tie(report.mean_velocity, report.std_velocity) = mean_std(vels);
	std::tie(report.mean_abs_accel, report.std_abs_accel) = mean_std(accs);
	report.collision_rate = collisions / static_cast<double>(seeds.size() * static_cast<std::size_t>(options.episodes));
	return report;
}

void space_time_export(std::span<const SpaceTimeRow> rows, const std::filesystem::path& path) {
	auto out = open_out(path);
	out << "step,vehicle_id,route_pos,speed\n";
	for (const auto& r : rows) {
		out << fmt::format("{},{},{},{}\n", r.step, r.vehicle_id, r.route_pos, r.speed);
	}
}

std::vector<SpaceTimeRow> read_space_time(const std::filesystem::path& path) {
	auto in = open_in(path);
	std::string line;
	std::getline(in, line);
	if (line != "step,vehicle_id,route_pos,speed") {
		fail(ErrorCode::ParseError, "unexpected space-time header: " + line);
	}
	std::vector<SpaceTimeRow> rows;
	while (std::getline(in, line)) {
		if (line.empty()) {
			continue;
		}
		const auto cells = split(line);
		if (cells.size() != 4) {
			fail(ErrorCode::ParseError, "malformed space-time row: " + line);
		}
		rows.push_back({std::stol(cells[0]), std::stoi(cells[1]), std::strtod(cells[2].c_str(), nullptr),
			std::strtod(cells[3].c_str(), nullptr)});
	}
	return rows;
}

std::vector<std::pair<long, double>> mean_speed_series(std::span<const SpaceTimeRow> rows) {
	std::map<long, std::pair<double, int>> acc;
	for (const auto& r : rows) {
		auto& [sum, n] = acc[r.step];
		sum += r.speed;
		++n;
	}
	std::vector<std::pair<long, double>> out;
	for (const auto& [step, sn] : acc) {
		out.emplace_back(step, sn.first / sn.second);
	}
	return out;
}

void mean_speed_export(std::span<const SpaceTimeRow> rows, const std::filesystem::path& path) {
	auto out = open_out(path);
	out << "step,mean_speed\n";
	for (const auto& [step, v] : mean_speed_series(rows)) {
		out << fmt::format("{},{}\n", step, v);
	}
}

Matrix speed_matrix(std::span<const SpaceTimeRow> rows) {
	std::map<long, int> step_index;
	std::map<int, int> vehicle_index;
	for (const auto& r : rows) {
		step_index.emplace(r.step, 0);
		vehicle_index.emplace(r.vehicle_id, 0);
	}
	int k = 0;
	for (auto& [s, i] : step_index) {
		i = k++;
	}
	k = 0;
	for (auto& [v, i] : vehicle_index) {
		i = k++;
	}
	Matrix m = Matrix::Constant(static_cast<Eigen::Index>(step_index.size()),
		static_cast<Eigen::Index>(vehicle_index.size()), std::numeric_limits<double>::quiet_NaN());
	for (const auto& r : rows) {
		m(step_index[r.step], vehicle_index[r.vehicle_id]) = r.speed;
	}
	return m;
}

std::vector<double> replay_rewards(const std::filesystem::path& trajectory_csv, const std::filesystem::path& routes_csv,
	std::shared_ptr<const sim::Scenario> scenario, const rl::RewardSpec& spec) {
	std::map<int, int> routes;
	{
		auto in = open_in(routes_csv);
		std::string line;
		std::getline(in, line);
		while (std::getline(in, line)) {
			if (line.empty()) {
				continue;
			}
			const auto cells = split(line);
			if (cells.size() != 2) {
				fail(ErrorCode::ParseError, "malformed routes row: " + line);
			}
			routes[std::stoi(cells[0])] = std::stoi(cells[1]);
		}
	}
	const auto rows = sim::read_trajectory(trajectory_csv);
	std::vector<double> out;
	std::size_t at = 0;
	while (at < rows.size()) {
		sim::SimState s;
		s.scenario = scenario;
		const long step = rows[at].step;
		for (; at < rows.size() && rows[at].step == step; ++at) {
			const auto& r = rows[at];
			const auto route = routes.find(r.vehicle_id);
			if (route == routes.end()) {
				fail(ErrorCode::ParseError, "vehicle " + std::to_string(r.vehicle_id) + " missing from routes file");
			}
			s.vehicles.push_back({r.vehicle_id, r.kind, r.route_pos, r.speed, r.accel, route->second});
		}
		out.push_back(rl::team_reward(s, spec));
	}
	return out;
}

std::vector<double> read_rewards(const std::filesystem::path& path) {
	auto in = open_in(path);
	std::string line;
	std::getline(in, line);
	if (line != "step,reward") {
		fail(ErrorCode::ParseError, "unexpected rewards header: " + line);
	}
	std::vector<double> out;
	while (std::getline(in, line)) {
		if (line.empty()) {
			continue;
		}
		const auto cells = split(line);
		if (cells.size() != 2) {
			fail(ErrorCode::ParseError, "malformed rewards row: " + line);
		}
		out.push_back(std::strtod(cells[1].c_str(), nullptr));
	}
	return out;
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
	nlohmann::json seeds = nlohmann::json::array();
	for (const auto& s : report.seeds) {
		nlohmann::json eps = nlohmann::json::array();
		for (const auto& e : s.episodes) {
			eps.push_back({{"return", e.ret}, {"mean_velocity", e.mean_velocity}, {"mean_abs_accel", e.mean_abs_accel},
				{"length", e.length}, {"collided", e.collided}});
		}
		seeds.push_back({{"seed", s.seed}, {"return", s.ret}, {"mean_velocity", s.mean_velocity},
			{"mean_abs_accel", s.mean_abs_accel}, {"collision_rate", s.collision_rate}, {"episodes", eps}});
	}
	const nlohmann::json doc = {
		{"mean_velocity", report.mean_velocity},
		{"std_velocity", report.std_velocity},
		{"mean_abs_accel", report.mean_abs_accel},
		{"std_abs_accel", report.std_abs_accel},
		{"return", report.ret},
		{"std_return", report.std_ret},
		{"collision_rate", report.collision_rate},
		{"seeds", seeds},
	};
	auto out = open_out(path);
	out << doc.dump(2) << '\n';
}

void write_seed_csv(const EvalReport& report, const std::filesystem::path& path) {
	auto out = open_out(path);
	out << "seed,return,mean_velocity,mean_abs_accel,collision_rate\n";
	for (const auto& s : report.seeds) {
		out << fmt::format("{},{},{},{},{}\n", s.seed, s.ret, s.mean_velocity, s.mean_abs_accel, s.collision_rate);
	}
}

} // namespace cavg::eval
