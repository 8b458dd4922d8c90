#include <cavg/common/error.hpp>
#include <cavg/rl/ppo.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cavg;
using namespace cavg::rl;

namespace {

Transition make(std::vector<int> ids, std::vector<double> rewards, std::vector<double> continues, bool done) {
	Transition t;
	const auto n = static_cast<Eigen::Index>(ids.size());
	t.agent_ids = std::move(ids);
	t.obs = Matrix::Zero(n, 6);
	t.next_obs = Matrix::Zero(n, 6);
	t.graph = nn::GraphInputs::single(Matrix::Identity(n, n), Matrix::Identity(n, n), Matrix::Identity(n, n));
	t.actions = Vector::Zero(n);
	t.old_log_prob = Vector::Zero(n);
	t.rewards = Eigen::Map<const Vector>(rewards.data(), n);
	t.continues = Eigen::Map<const Vector>(continues.data(), n);
	t.done = done;
	return t;
}

ValueFn constant_value(double v) {
	return [v](const Matrix& obs, const nn::GraphInputs&) { return Vector::Constant(obs.rows(), v); };
}

TrainConfig tiny(std::uint64_t seed) {
	auto sc = std::make_shared<sim::Scenario>();
	sc->params.safety_clamp = true;
	TrainConfig c;
	c.env.scenario = sc;
	c.env.n_human = 2;
	c.env.n_cav = 3;
	c.env.horizon = 60;
	c.network.hidden = 8;
	c.network.heads = 2;
	c.ppo.batch_size = 50;
	c.ppo.minibatch_size = 16;
	c.ppo.epochs = 2;
	c.ppo.episodes = 3;
	c.seed = seed;
	return c;
}

std::string slurp(const std::filesystem::path& p) {
	std::ifstream in(p);
	std::stringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

} // namespace

TEST(Advantage, SingleTerminalStep) {
	std::vector<Transition> b{make({0}, {1.0}, {0.0}, true)};
	compute_advantages(b, constant_value(0.3), PpoConfig{});
	EXPECT_DOUBLE_EQ(b[0].returns(0), 1.0);
	EXPECT_DOUBLE_EQ(b[0].advantages(0), 0.7);
}

TEST(Advantage, RewardToGoIsGeometric) {
	PpoConfig cfg;
	cfg.gamma = 0.9;
	std::vector<Transition> b{make({0}, {1.0}, {1.0}, false), make({0}, {1.0}, {1.0}, false), make({0}, {1.0}, {0.0}, true)};
	compute_advantages(b, constant_value(0.0), cfg);
	EXPECT_NEAR(b[0].returns(0), 1.0 + 0.9 + 0.81, 1e-12);
	EXPECT_NEAR(b[1].returns(0), 1.9, 1e-12);
	EXPECT_NEAR(b[2].returns(0), 1.0, 1e-12);
}

TEST(Advantage, TruncatedBatchBootstrapsFromTheCritic) {
	PpoConfig cfg;
	cfg.gamma = 0.9;
	std::vector<Transition> b{make({0}, {1.0}, {1.0}, false)};
	compute_advantages(b, constant_value(2.0), cfg);
	EXPECT_NEAR(b[0].returns(0), 1.0 + 0.9 * 2.0, 1e-12);
	EXPECT_NEAR(b[0].advantages(0), 0.8, 1e-12);
}

TEST(Advantage, ReturnsFollowAgentIdsAcrossRowChanges) {
	PpoConfig cfg;
	cfg.gamma = 0.5;
	// Agent 7 leaves after the first step; agent 3 stays and changes row.
	std::vector<Transition> b{make({7, 3}, {1.0, 1.0}, {0.0, 1.0}, false), make({3}, {4.0}, {0.0}, true)};
	compute_advantages(b, constant_value(0.0), cfg);
	EXPECT_DOUBLE_EQ(b[0].returns(0), 1.0);
	EXPECT_DOUBLE_EQ(b[0].returns(1), 1.0 + 0.5 * 4.0);
}

TEST(Advantage, NormalisationGivesZeroMeanUnitSpread) {
	std::vector<Transition> b{make({0, 1}, {1.0, 2.0}, {0.0, 0.0}, true), make({0}, {6.0}, {0.0}, true)};
	compute_advantages(b, constant_value(0.0), PpoConfig{});
	normalize_advantages(b);
	const double mean = (b[0].advantages.sum() + b[1].advantages.sum()) / 3.0;
	const double sq = b[0].advantages.squaredNorm() + b[1].advantages.squaredNorm();
	EXPECT_NEAR(mean, 0.0, 1e-12);
	EXPECT_NEAR(sq / 3.0, 1.0, 1e-6);
}

TEST(Surrogate, ClippedValues) {
	nn::Tape t;
	Matrix r(4, 1);
	r << 1.5, 0.5, 0.5, 1.1;
	Vector a(4);
	a << 1.0, -1.0, 1.0, -2.0;
	// min(1.5, 1.2) = 1.2; min(-0.5, -0.8) = -0.8; min(0.5, 0.8) = 0.5; -2.2
	EXPECT_NEAR(clipped_surrogate(t.constant(r), a, 0.2).scalar(), (1.2 - 0.8 + 0.5 - 2.2) / 4.0, 1e-12);
}

TEST(Ppo, ConfigValidation) {
	PpoConfig c;
	c.clip = 0.0;
	EXPECT_THROW(c.validate(), Error);
	c = {};
	c.gamma = 1.5;
	EXPECT_THROW(c.validate(), Error);
	c = {};
	c.batch_size = 0;
	EXPECT_THROW(c.validate(), Error);
}

TEST(Ppo, CriticUpdateReducesTdErrorOnFixedTargets) {
	const auto cfg = tiny(1);
	Rng init(3);
	nn::CriticNetwork critic(cfg.network, init);
	nn::ActorNetwork actor(cfg.network, init);
	Environment env(cfg.env);
	Rng policy(4);
	auto rollout = collect_rollout(actor, env, 99, policy);
	auto full = stack_transitions(rollout.transitions);
	full.td_targets = td_targets(full, critic, cfg.ppo.gamma);
	double before = 0.0;
	{
		nn::Tape t;
		before = critic_loss(t, critic, full).scalar();
	}
	nn::Adam opt(critic.params());
	PpoConfig pc = cfg.ppo;
	pc.epochs = 10;
	Rng mb(5);
	const auto [initial, lr] = critic_update(rollout.transitions, critic, opt, pc, mb);
	EXPECT_NEAR(initial, before, 1e-12);
	EXPECT_EQ(lr, pc.critic_lr);
	nn::Tape t;
	EXPECT_LT(critic_loss(t, critic, full).scalar(), before);
}

TEST(Ppo, RolloutRespectsHorizonAndRecordsEveryStep) {
	const auto cfg = tiny(2);
	Rng init(1);
	nn::ActorNetwork actor(cfg.network, init);
	Environment env(cfg.env);
	Rng policy(2);
	const auto r = collect_rollout(actor, env, 5, policy);
	EXPECT_LE(r.stats.length, cfg.env.horizon);
	EXPECT_EQ(static_cast<int>(r.transitions.size()), r.stats.length);
	EXPECT_TRUE(r.transitions.back().done);
	for (const auto& tr : r.transitions) {
		EXPECT_EQ(tr.agents(), 3);
	}
}

TEST(Ppo, TrainingIsDeterministic) {
	const auto dir = std::filesystem::temp_directory_path() / "cavg_ppo_det";
	const auto a = train(tiny(11));
	const auto b = train(tiny(11));
	write_learning_curve(dir / "a.csv", a.curve);
	write_learning_curve(dir / "b.csv", b.curve);
	EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
	EXPECT_EQ(a.actor.params().flat_values(), b.actor.params().flat_values());
	const auto c = train(tiny(12));
	EXPECT_NE(a.actor.params().flat_values(), c.actor.params().flat_values());
}

TEST(Ppo, LearningCurveHeader) {
	const auto path = std::filesystem::temp_directory_path() / "cavg_ppo_curve.csv";
	write_learning_curve(path, {});
	EXPECT_EQ(slurp(path), "episode,seed,return,mean_speed,mean_abs_accel,episode_len\n");
}

TEST(Ppo, CheckpointsAndResume) {
	auto cfg = tiny(21);
	cfg.ppo.checkpoint_every = 1;
	cfg.ppo.episodes = 2;
	const auto dir = std::filesystem::temp_directory_path() / "cavg_ppo_resume";
	std::filesystem::remove_all(dir);
	TrainOptions opts;
	opts.checkpoint_dir = dir;
	const auto first = train(cfg, opts);
	EXPECT_TRUE(std::filesystem::exists(dir / "episode_1.json"));
	EXPECT_TRUE(std::filesystem::exists(dir / "episode_2.json"));
	EXPECT_TRUE(std::filesystem::exists(dir / "final.json"));

	const auto ckpt = nn::load_checkpoint(dir / "final.json");
	ASSERT_TRUE(ckpt.training);
	EXPECT_EQ(ckpt.training->episode, 2);
	cfg.ppo.episodes = 4;
	TrainOptions more;
	more.resume = &ckpt;
	const auto resumed = train(cfg, more);
	ASSERT_EQ(resumed.curve.size(), 2u);
	EXPECT_EQ(resumed.curve.front().episode, 2);
	EXPECT_EQ(resumed.curve.front().seed, 21u);
}

TEST(Ppo, ResumeRejectsOtherArchitecture) {
	auto cfg = tiny(22);
	cfg.ppo.episodes = 1;
	const auto dir = std::filesystem::temp_directory_path() / "cavg_ppo_resume_bad";
	TrainOptions opts;
	opts.checkpoint_dir = dir;
	train(cfg, opts);
	const auto ckpt = nn::load_checkpoint(dir / "final.json");
	cfg.network.heads = 4;
	TrainOptions more;
	more.resume = &ckpt;
	EXPECT_THROW(train(cfg, more), Error);
}
