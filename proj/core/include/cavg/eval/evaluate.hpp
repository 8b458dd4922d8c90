#pragma once

#include <cavg/nn/policy.hpp>
#include <cavg/rl/environment.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace cavg::eval {

/// One exported vehicle sample of a space-time diagram.
struct SpaceTimeRow {
	long step = 0;
	int vehicle_id = 0;
	double route_pos = 0.0;
	double speed = 0.0;
	bool operator==(const SpaceTimeRow&) const = default;
};

struct EpisodeMetrics {
	double ret = 0.0;
	double mean_velocity = 0.0;
	double mean_abs_accel = 0.0;
	int length = 0;
	bool collided = false;
	bool operator==(const EpisodeMetrics&) const = default;
};

struct SeedReport {
	std::uint64_t seed = 0;
	std::vector<EpisodeMetrics> episodes;
	double ret = 0.0;
	double mean_velocity = 0.0;
	double mean_abs_accel = 0.0;
	double collision_rate = 0.0;
	/// First episode of this seed (post-step states, steps 1..length).
	std::vector<SpaceTimeRow> space_time;
	bool operator==(const SeedReport&) const = default;
};

struct EvalReport {
	/// Mean and standard deviation across seeds of the per-seed averages.
	double mean_velocity = 0.0;
	double std_velocity = 0.0;
	double mean_abs_accel = 0.0;
	double std_abs_accel = 0.0;
	double ret = 0.0;
	double std_ret = 0.0;
	double collision_rate = 0.0;
	std::vector<SeedReport> seeds;
	bool operator==(const EvalReport&) const = default;
};

struct EvalOptions {
	int episodes = 10;
	/// When set, the first episode of every seed is written here as
	/// `trajectory_seed<s>.csv`, `routes_seed<s>.csv` and `rewards_seed<s>.csv`.
	std::filesystem::path trajectory_dir;
	/// When set, adjacency matrices of the first episode of the first seed are
	/// written here as `step_<k>.csv`.
	std::filesystem::path adjacency_dir;
};

/// Deterministic evaluation of `actor` (policy mean, no sampling). With a null
/// actor every CAV is driven by noisy IDM instead (the all-IDM baseline).
/// Throws InvalidSpec for an empty seed list.
EvalReport evaluate(nn::ActorNetwork* actor, const rl::EnvConfig& env, std::span<const std::uint64_t> seeds,
	const EvalOptions& options = {});

/// Seed of evaluation episode `k` under evaluation seed `seed`.
std::uint64_t eval_episode_seed(std::uint64_t seed, int episode) noexcept;

/// CSV `step,vehicle_id,route_pos,speed`.
void space_time_export(std::span<const SpaceTimeRow> rows, const std::filesystem::path& path);
std::vector<SpaceTimeRow> read_space_time(const std::filesystem::path& path);

/// CSV `step,mean_speed` derived from space-time rows.
void mean_speed_export(std::span<const SpaceTimeRow> rows, const std::filesystem::path& path);
std::vector<std::pair<long, double>> mean_speed_series(std::span<const SpaceTimeRow> rows);

/// steps x vehicles speed matrix of a closed-network episode (vehicle columns by id order).
Matrix speed_matrix(std::span<const SpaceTimeRow> rows);

/// Recomputes per-step team rewards from an exported trajectory (and its
/// routes sidecar) for the given scenario.
std::vector<double> replay_rewards(const std::filesystem::path& trajectory_csv, const std::filesystem::path& routes_csv,
	std::shared_ptr<const sim::Scenario> scenario, const rl::RewardSpec& spec);

/// CSV `step,reward` as written by evaluate().
std::vector<double> read_rewards(const std::filesystem::path& path);

/// report.json-style summary.
void write_report_json(const EvalReport& report, const std::filesystem::path& path);
/// CSV `seed,return,mean_velocity,mean_abs_accel,collision_rate`.
void write_seed_csv(const EvalReport& report, const std::filesystem::path& path);

} // namespace cavg::eval
