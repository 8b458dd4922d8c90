#include <cavg/common/error.hpp>
#include <cavg/eval/evaluate.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

using namespace cavg;
using namespace cavg::eval;

namespace {

rl::EnvConfig ring_env(int humans, int cavs, int horizon) {
	auto sc = std::make_shared<sim::Scenario>();
	sc->params.safety_clamp = true;
	rl::EnvConfig e;
	e.scenario = sc;
	e.n_human = humans;
	e.n_cav = cavs;
	e.horizon = horizon;
	return e;
}

rl::EnvConfig merge_env(int horizon) {
	auto sc = std::make_shared<sim::Scenario>();
	sc->network.kind = sim::NetworkKind::Merge;
	rl::EnvConfig e;
	e.scenario = sc;
	e.n_human = 0;
	e.n_cav = 0;
	e.horizon = horizon;
	e.warmup_steps = 600;
	e.reward.kind = rl::RewardKind::Merge;
	e.reward.w_v = 1.0;
	return e;
}

std::filesystem::path fresh(const std::string& name) {
	auto p = std::filesystem::temp_directory_path() / ("cavg_eval_" + name);
	std::filesystem::remove_all(p);
	return p;
}

} // namespace

TEST(Evaluate, EmptySeedListIsRejected) {
	try {
		evaluate(nullptr, ring_env(22, 0, 10), {});
		FAIL();
	} catch (const Error& e) {
		EXPECT_EQ(e.code(), ErrorCode::InvalidSpec);
	}
}

TEST(Evaluate, ReportIsDeterministic) {
	Rng rng(1);
	nn::NetworkConfig cfg;
	cfg.hidden = 8;
	nn::ActorNetwork actor(cfg, rng);
	const std::uint64_t seeds[] = {3, 4};
	EvalOptions opts;
	opts.episodes = 2;
	const auto a = evaluate(&actor, ring_env(3, 3, 80), seeds, opts);
	const auto b = evaluate(&actor, ring_env(3, 3, 80), seeds, opts);
	EXPECT_EQ(a, b);
	EXPECT_EQ(a.seeds.size(), 2u);
}

TEST(Evaluate, InvariantsOfTheBaselineReport) {
	const std::uint64_t seeds[] = {0, 1, 2};
	EvalOptions opts;
	opts.episodes = 2;
	const auto r = evaluate(nullptr, ring_env(20, 2, 150), seeds, opts);
	EXPECT_GE(r.mean_velocity, 0.0);
	EXPECT_GE(r.collision_rate, 0.0);
	EXPECT_LE(r.collision_rate, 1.0);
	for (const auto& s : r.seeds) {
		const auto& first = s.episodes.front();
		ASSERT_EQ(s.space_time.size(), static_cast<std::size_t>(first.length) * 22u);
		const Matrix m = speed_matrix(s.space_time);
		EXPECT_EQ(m.rows(), first.length);
		EXPECT_EQ(m.cols(), 22);
		EXPECT_NEAR(m.mean(), first.mean_velocity, 1e-12);
	}
}

TEST(Evaluate, ReturnEqualsReplayedRewards) {
	const auto dir = fresh("replay");
	const std::uint64_t seeds[] = {7};
	EvalOptions opts;
	opts.episodes = 1;
	opts.trajectory_dir = dir;
	const auto env = ring_env(4, 2, 200);
	const auto r = evaluate(nullptr, env, seeds, opts);
	const auto logged = read_rewards(dir / "rewards_seed7.csv");
	const auto replayed = replay_rewards(dir / "trajectory_seed7.csv", dir / "routes_seed7.csv", env.scenario, env.reward);
	ASSERT_EQ(logged.size(), 200u);
	EXPECT_EQ(logged, replayed);
	EXPECT_NEAR(std::accumulate(replayed.begin(), replayed.end(), 0.0), r.ret, 1e-9);
}

TEST(Evaluate, MergeRewardsReplayThroughTheRoutesFile) {
	const auto dir = fresh("replay_merge");
	const std::uint64_t seeds[] = {2};
	EvalOptions opts;
	opts.episodes = 1;
	opts.trajectory_dir = dir;
	const auto env = merge_env(150);
	evaluate(nullptr, env, seeds, opts);
	const auto logged = read_rewards(dir / "rewards_seed2.csv");
	EXPECT_EQ(logged, replay_rewards(dir / "trajectory_seed2.csv", dir / "routes_seed2.csv", env.scenario, env.reward));
}

TEST(SpaceTime, RoundTripIsExact) {
	const std::uint64_t seeds[] = {5};
	EvalOptions opts;
	opts.episodes = 1;
	const auto r = evaluate(nullptr, ring_env(5, 1, 120), seeds, opts);
	const auto path = fresh("st") / "st.csv";
	space_time_export(r.seeds[0].space_time, path);
	const auto back = read_space_time(path);
	EXPECT_EQ(back, r.seeds[0].space_time);
	EXPECT_EQ(speed_matrix(back), speed_matrix(r.seeds[0].space_time));
}

TEST(SpaceTime, EmptyEpisodeGivesHeaderOnly) {
	const auto path = fresh("st_empty") / "st.csv";
	space_time_export({}, path);
	std::ifstream in(path);
	std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
	EXPECT_EQ(all, "step,vehicle_id,route_pos,speed\n");
	EXPECT_TRUE(read_space_time(path).empty());
}

TEST(SpaceTime, MeanSpeedSeries) {
	const std::vector<SpaceTimeRow> rows{{1, 0, 0.0, 2.0}, {1, 1, 5.0, 4.0}, {2, 0, 0.2, 6.0}, {2, 1, 5.4, 8.0}};
	const auto s = mean_speed_series(rows);
	ASSERT_EQ(s.size(), 2u);
	EXPECT_EQ(s[0], std::make_pair(1L, 3.0));
	EXPECT_EQ(s[1], std::make_pair(2L, 7.0));
}

TEST(Evaluate, AdjacencyDumpCoversTheFirstEpisode) {
	const auto dir = fresh("adj");
	const std::uint64_t seeds[] = {1, 2};
	EvalOptions opts;
	opts.episodes = 2;
	opts.adjacency_dir = dir;
	evaluate(nullptr, ring_env(3, 3, 25), seeds, opts);
	int files = 0;
	for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) {
		++files;
	}
	EXPECT_EQ(files, 25);
}

TEST(Evaluate, ReportFiles) {
	const auto dir = fresh("files");
	const std::uint64_t seeds[] = {1};
	EvalOptions opts;
	opts.episodes = 1;
	const auto r = evaluate(nullptr, ring_env(3, 1, 20), seeds, opts);
	write_report_json(r, dir / "report.json");
	write_seed_csv(r, dir / "seeds.csv");
	std::ifstream in(dir / "seeds.csv");
	std::string header;
	std::getline(in, header);
	EXPECT_EQ(header, "seed,return,mean_velocity,mean_abs_accel,collision_rate");
	EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
}
