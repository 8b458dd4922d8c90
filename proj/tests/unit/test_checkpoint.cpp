#include <cavg/common/error.hpp>
#include <cavg/nn/checkpoint.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace cavg;
using namespace cavg::nn;

namespace {

std::filesystem::path temp(const std::string& name) {
	return std::filesystem::temp_directory_path() / ("cavg_ckpt_" + name + ".json");
}

NetworkConfig config() {
	NetworkConfig c;
	c.hidden = 8;
	c.heads = 2;
	return c;
}

} // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
	Rng rng(1);
	ActorNetwork actor(config(), rng);
	CriticNetwork critic(config(), rng);
	const auto path = temp("roundtrip");
	save_checkpoint(path, actor, critic);
	const auto loaded = load_checkpoint(path);
	EXPECT_EQ(loaded.actor.params().flat_values(), actor.params().flat_values());
	EXPECT_EQ(loaded.critic.params().flat_values(), critic.params().flat_values());
	EXPECT_EQ(loaded.actor.config(), actor.config());
	EXPECT_FALSE(loaded.training.has_value());
}

TEST(Checkpoint, TrainingStateRoundTrip) {
	Rng rng(2);
	ActorNetwork actor(config(), rng);
	CriticNetwork critic(config(), rng);
	TrainingState st{Adam(actor.params()), Adam(critic.params()), 17};
	for (auto& p : actor.params()) {
		p.grad.setConstant(0.3);
	}
	st.actor_opt.step(actor.params(), 1e-3);
	save_checkpoint(temp("state"), actor, critic, &st);
	const auto loaded = load_checkpoint(temp("state"));
	ASSERT_TRUE(loaded.training.has_value());
	EXPECT_EQ(loaded.training->episode, 17);
	EXPECT_EQ(loaded.training->actor_opt.steps(), 1);
	EXPECT_EQ(loaded.training->actor_opt.first_moments(), st.actor_opt.first_moments());
	EXPECT_EQ(loaded.training->actor_opt.second_moments(), st.actor_opt.second_moments());
}

TEST(Checkpoint, ArchitectureMismatchIsRejected) {
	Rng rng(3);
	ActorNetwork actor(config(), rng);
	CriticNetwork critic(config(), rng);
	save_checkpoint(temp("mismatch"), actor, critic);
	NetworkConfig other = config();
	other.heads = 4;
	try {
		load_checkpoint(temp("mismatch"), &other);
		FAIL();
	} catch (const Error& e) {
		EXPECT_EQ(e.code(), ErrorCode::IncompatibleCheckpoint);
	}
}

TEST(Checkpoint, CorruptFilesAreRejected) {
	const auto path = temp("corrupt");
	{
		std::ofstream(path) << "{\"format\": \"something-else\"}";
	}
	EXPECT_THROW(load_checkpoint(path), Error);
	EXPECT_THROW(load_checkpoint(temp("does_not_exist")), Error);
}
