#include <cavg/common/error.hpp>
#include <cavg/config/run_config.hpp>

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

using namespace cavg;
using namespace cavg::config;

namespace {

ErrorCode code_of(std::string_view text) {
	try {
		parse_config_text(text);
	} catch (const Error& e) {
		return e.code();
	}
	return ErrorCode::InvalidSpec; // sentinel: no error
}

std::string message_of(std::string_view text) {
	try {
		parse_config_text(text);
	} catch (const Error& e) {
		return e.what();
	}
	return {};
}

} // namespace

TEST(Config, MinimalRingFillsDefaults) {
	const auto c = parse_config_text(R"({"scenario": {"network": "ring"}})");
	EXPECT_EQ(c.scenario.network.kind, sim::NetworkKind::Ring);
	EXPECT_EQ(c.scheme.kernel.length_scale, 4.0);
	EXPECT_EQ(c.scenario.params.dt, 0.1);
	EXPECT_EQ(c.scenario.network.ring_length, 230.0);
	EXPECT_EQ(c.reward.w_v, 2.0);
	EXPECT_EQ(c.reward.w_a, 4.0);
	EXPECT_EQ(c.network.heads, 8);
	EXPECT_EQ(c.horizon, 3000);
	EXPECT_EQ(c.n_human + c.n_cav, 22);
	EXPECT_EQ(c.n_cav, 16);
	EXPECT_DOUBLE_EQ(c.scenario.params.idm.v0, 30.0 / 3.6);
	EXPECT_DOUBLE_EQ(c.reward.target_speed, 30.0 / 3.6);
	EXPECT_EQ(c.scan_scale, 30.0);
}

TEST(Config, EmptyObjectIsTheRingDefault) {
	EXPECT_EQ(parse_config_text("{}"), parse_config_text(R"({"scenario": {"network": "ring"}})"));
}

TEST(Config, MergeDefaults) {
	const auto c = parse_config_text(R"({"scenario": {"network": "merge"}})");
	EXPECT_EQ(c.reward.kind, rl::RewardKind::Merge);
	EXPECT_EQ(c.reward.w_v, 1.0);
	EXPECT_EQ(c.reward.w_h, 0.1);
	EXPECT_EQ(c.reward.t_min, 1.0);
	EXPECT_EQ(c.horizon, 600);
	EXPECT_EQ(c.scenario.network.inflow_main, 1000.0);
	EXPECT_EQ(c.scenario.network.inflow_ramp, 200.0);
}

TEST(Config, FigureEightDefaults) {
	const auto c = parse_config_text(R"({"scenario": {"network": "figure_eight"}})");
	EXPECT_EQ(c.horizon, 1500);
	EXPECT_EQ(c.scenario.network.loop_length, 143.0);
}

TEST(Config, TargetSpeedPropagates) {
	const auto c = parse_config_text(R"({"scenario": {"target_speed_kmh": 36}})");
	EXPECT_DOUBLE_EQ(c.target_speed(), 10.0);
	EXPECT_DOUBLE_EQ(c.scenario.params.idm.v0, 10.0);
	EXPECT_DOUBLE_EQ(c.scheme.target_speed, 10.0);
	EXPECT_DOUBLE_EQ(to_env_config(c).target_speed, 10.0);
	const auto kept = parse_config_text(R"({"scenario": {"target_speed_kmh": 36, "idm": {"v0": 12}}})");
	EXPECT_DOUBLE_EQ(kept.scenario.params.idm.v0, 12.0);
}

TEST(Config, NegativeHorizonIsAValidationError) {
	EXPECT_EQ(code_of(R"({"scenario": {"horizon": -5}})"), ErrorCode::ValidationError);
	EXPECT_NE(message_of(R"({"scenario": {"horizon": -5}})").find("horizon"), std::string::npos);
}

TEST(Config, OtherValidationErrors) {
	EXPECT_EQ(code_of(R"({"seeds": []})"), ErrorCode::ValidationError);
	EXPECT_EQ(code_of(R"({"graph": {"scan_scale": 0}})"), ErrorCode::ValidationError);
	EXPECT_EQ(code_of(R"({"nn": {"hidden": 10, "heads": 3}})"), ErrorCode::ValidationError);
	EXPECT_EQ(code_of(R"({"ppo": {"clip": 0}})"), ErrorCode::ValidationError);
	EXPECT_EQ(code_of(R"({"scenario": {"n_human": 0, "n_cav": 0}})"), ErrorCode::ValidationError);
}

TEST(Config, UnknownKeyNamesThePath) {
	const std::string text = R"({"graph": {"scan_scalee": 30}})";
	EXPECT_EQ(code_of(text), ErrorCode::ParseError);
	EXPECT_NE(message_of(text).find("graph.scan_scalee"), std::string::npos);
	EXPECT_NE(message_of(R"({"typo": 1})").find("'typo'"), std::string::npos);
	EXPECT_NE(message_of(R"({"scenario": {"idm": {"s1": 1}}})").find("scenario.idm.s1"), std::string::npos);
}

TEST(Config, WrongTypesAreParseErrors) {
	EXPECT_EQ(code_of(R"({"ppo": {"epochs": 2.5}})"), ErrorCode::ParseError);
	EXPECT_EQ(code_of(R"({"scenario": {"horizon": "long"}})"), ErrorCode::ParseError);
	EXPECT_EQ(code_of(R"({"seeds": [-1]})"), ErrorCode::ParseError);
	EXPECT_EQ(code_of(R"({"scenario": {"network": "torus"}})"), ErrorCode::ParseError);
	EXPECT_EQ(code_of(R"({"graph": {"scheme": "distance"}})"), ErrorCode::ParseError);
	EXPECT_EQ(code_of(R"({"scenario": {"cav_accel": [1]}})"), ErrorCode::ParseError);
}

TEST(Config, MalformedJsonReportsLine) {
	const std::string text = "{\n  \"scenario\": {\n    \"horizon\": 10,\n  }\n}";
	EXPECT_EQ(code_of(text), ErrorCode::ParseError);
	EXPECT_NE(message_of(text).find(":4:"), std::string::npos) << message_of(text);
}

TEST(Config, RoundTripIsIdentity) {
	for (const char* text : {R"({})", R"({"scenario": {"network": "merge", "cav_share": 0.4}, "seeds": [4, 5]})",
			 R"({"scenario": {"network": "figure_eight", "target_speed_kmh": 23.7}, "nn": {"activation": "relu", "attention": "ratio_softmax"}})",
			 R"({"graph": {"scheme": "velocity", "epsilon": 0.01}, "ppo": {"normalize_advantages": false}})"}) {
		const auto c = parse_config_text(text);
		EXPECT_EQ(parse_config_text(dump(c)), c) << text;
		EXPECT_EQ(dump(parse_config_text(dump(c))), dump(c));
		EXPECT_EQ(config_hash(parse_config_text(dump(c))), config_hash(c));
	}
}

TEST(Config, HashTracksContent) {
	const auto a = parse_config_text("{}");
	const auto b = parse_config_text(R"({"seeds": [1]})");
	EXPECT_EQ(config_hash(a).size(), 16u);
	EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, TrainConfigMapping) {
	const auto c = parse_config_text(R"({"scenario": {"n_human": 2, "n_cav": 4, "horizon": 500}, "ppo": {"batch_size": 500}})");
	const auto t = to_train_config(c, 9);
	EXPECT_EQ(t.seed, 9u);
	EXPECT_EQ(t.env.n_cav, 4);
	EXPECT_EQ(t.env.horizon, 500);
	EXPECT_EQ(t.ppo.batch_size, 500);
	EXPECT_EQ(t.network.obs_dim, 6);
	EXPECT_TRUE(t.env.scenario->params.safety_clamp);
}
