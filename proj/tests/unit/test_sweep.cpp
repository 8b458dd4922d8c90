#include <cavg/common/error.hpp>
#include <cavg/eval/sweep.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace cavg;
using namespace cavg::eval;

namespace {

rl::TrainConfig base() {
	auto sc = std::make_shared<sim::Scenario>();
	sc->params.safety_clamp = true;
	rl::TrainConfig c;
	c.env.scenario = sc;
	c.env.n_human = 2;
	c.env.n_cav = 4;
	c.env.horizon = 30;
	c.network.hidden = 8;
	c.network.heads = 2;
	c.ppo.batch_size = 30;
	c.ppo.minibatch_size = 16;
	c.ppo.epochs = 1;
	c.ppo.episodes = 1;
	return c;
}

std::string first_line(const std::filesystem::path& p) {
	std::ifstream in(p);
	std::string line;
	std::getline(in, line);
	return line;
}

} // namespace

TEST(Sweep, VariableNames) {
	for (auto v : {SweepVariable::PenetrationRate, SweepVariable::TargetSpeed, SweepVariable::ScanScale,
			 SweepVariable::AdjacencyScheme, SweepVariable::AttentionHeads}) {
		EXPECT_EQ(sweep_variable_from_string(to_string(v)), v);
	}
	EXPECT_THROW(sweep_variable_from_string("scan_scalee"), Error);
}

TEST(Sweep, SpecNeedsValuesAndSeeds) {
	SweepSpec s;
	s.seeds = {1};
	EXPECT_THROW(s.validate(), Error);
	s.values = {"1"};
	s.seeds.clear();
	EXPECT_THROW(s.validate(), Error);
}

TEST(Sweep, PenetrationRateRoundsCavCount) {
	EXPECT_EQ(apply_sweep_value(base(), SweepVariable::PenetrationRate, "0.5").env.n_cav, 3);
	const auto c = apply_sweep_value(base(), SweepVariable::PenetrationRate, "0.25");
	EXPECT_EQ(c.env.n_cav, 2); // round(1.5)
	EXPECT_EQ(c.env.n_human, 4);
	EXPECT_THROW(apply_sweep_value(base(), SweepVariable::PenetrationRate, "1.5"), Error);
}

TEST(Sweep, TargetSpeedMovesEveryDependentValue) {
	const auto c = apply_sweep_value(base(), SweepVariable::TargetSpeed, "36");
	EXPECT_DOUBLE_EQ(c.env.target_speed, 10.0);
	EXPECT_DOUBLE_EQ(c.env.reward.target_speed, 10.0);
	EXPECT_DOUBLE_EQ(c.env.scheme.target_speed, 10.0);
	EXPECT_DOUBLE_EQ(c.env.scenario->params.idm.v0, 10.0);
	EXPECT_NE(base().env.scenario->params.idm.v0, 10.0);
}

TEST(Sweep, OtherVariables) {
	EXPECT_DOUBLE_EQ(apply_sweep_value(base(), SweepVariable::ScanScale, "45").env.scan_scale, 45.0);
	EXPECT_EQ(apply_sweep_value(base(), SweepVariable::AttentionHeads, "0").network.heads, 0);
	EXPECT_EQ(apply_sweep_value(base(), SweepVariable::AdjacencyScheme, "position").env.scheme.kind,
		graph::SchemeKind::PositionOnly);
	EXPECT_EQ(apply_sweep_value(base(), SweepVariable::AdjacencyScheme, "velocity").env.scheme.kind,
		graph::SchemeKind::VelocityOnly);
	EXPECT_EQ(apply_sweep_value(base(), SweepVariable::AdjacencyScheme, "both").env.scheme.kind,
		graph::SchemeKind::GaussianSpeedField);
	EXPECT_THROW(apply_sweep_value(base(), SweepVariable::AdjacencyScheme, "distance"), Error);
	EXPECT_THROW(apply_sweep_value(base(), SweepVariable::AttentionHeads, "2.5"), Error);
}

TEST(Sweep, SingleCellGivesOneRow) {
	SweepSpec s;
	s.variable = SweepVariable::AttentionHeads;
	s.values = {"0"};
	s.seeds = {3};
	s.episodes = 1;
	const auto rows = run_sweep(s, base());
	ASSERT_EQ(rows.size(), 1u);
	EXPECT_FALSE(rows[0].failed);
	EXPECT_EQ(rows[0].variable, "attention_heads");
	EXPECT_EQ(rows[0].value, "0");
	EXPECT_EQ(rows[0].seed, 3u);
}

TEST(Sweep, FailedCellIsRecordedAndTheSweepContinues) {
	SweepSpec s;
	s.variable = SweepVariable::AttentionHeads;
	s.values = {"3", "1"}; // 3 heads do not divide the width of 8
	s.seeds = {1};
	s.episodes = 1;
	const auto rows = run_sweep(s, base());
	ASSERT_EQ(rows.size(), 2u);
	EXPECT_TRUE(rows[0].failed);
	EXPECT_TRUE(std::isnan(rows[0].ret));
	EXPECT_FALSE(rows[0].error.empty());
	EXPECT_FALSE(rows[1].failed);

	const auto dir = std::filesystem::temp_directory_path() / "cavg_sweep";
	write_sweep_csv(rows, dir / "sweep.csv");
	write_sweep_errors(rows, dir / "errors.csv");
	EXPECT_EQ(first_line(dir / "sweep.csv"), "variable,value,seed,return,mean_velocity,mean_abs_accel");
	EXPECT_EQ(first_line(dir / "errors.csv"), "variable,value,seed,error");
}

TEST(Sweep, TargetSpeedProtocolReportsPercentages) {
	SweepSpec s;
	s.variable = SweepVariable::TargetSpeed;
	s.values = {"20", "30"};
	s.seeds = {2};
	s.episodes = 1;
	const auto rows = run_sweep(s, base());
	ASSERT_EQ(rows.size(), 2u);
	ASSERT_TRUE(rows[0].pct_vs_baseline.has_value());
	EXPECT_NEAR(*rows[0].pct_vs_baseline, 0.0, 1e-12);
	EXPECT_TRUE(rows[1].pct_vs_baseline.has_value());
}
